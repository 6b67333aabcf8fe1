"""Lyapunov exponents from the main path against Ulam matrices of increasing size."""

from rpfkit import builtin
from rpfkit.oracle import oracle_lyapunov
from rpfkit.rpf import RpfSolver


def main(name="figure1", K=16):
    E = builtin(name)
    main_val = RpfSolver(E).lyapunov(K, 40, warmup=20)["lyapunov"]
    print(f"{name}: main path {main_val:.6f}")
    for N in (1024, 4096, 16384):
        o = oracle_lyapunov(E, N, 40, K, warmup=20)["lyapunov"]
        print(f"  Ulam N = {N:>5}: {o:.6f}  gap {o - main_val:+.2e}")


if __name__ == "__main__":
    main()
