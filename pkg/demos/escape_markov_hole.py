"""Survivor masses of the doubling map through the hole (1/4, 3/8) against the eighths matrix."""

import math

import numpy as np

from rpfkit import parse_config
from rpfkit.escape import escape_rate


def doubling(hole):
    return parse_config({
        "schema_version": 1,
        "ensemble": {"maps": [{"hole": hole, "branches": [
            {"family": "affine", "params": {"a": 2, "b": 0}, "domain": [0, 0.5]},
            {"family": "affine", "params": {"a": 2, "b": -1}, "domain": [0.5, 1]}]}]},
        "potential": {"type": "constant", "value": 0.0},
        "driver": {"type": "iid", "probabilities": [1.0], "seed": 0},
    })


def main():
    P = np.zeros((8, 8))
    for i in range(8):
        if i != 2:
            P[i, (2 * i) % 8] = P[i, (2 * i + 1) % 8] = 0.5
    exact = -math.log(max(abs(np.linalg.eigvals(P))))
    fit = escape_rate(doubling([]), doubling([[0.25, 0.375]]), 0, 30)
    for n, m in zip(fit.ns[::5], fit.masses[::5]):
        print(f"n = {n:2d}  survivor mass {m:.6e}")
    print(f"fitted escape rate {fit.rate:.10f}, eigenvalue rate {exact:.10f}")


if __name__ == "__main__":
    main()
