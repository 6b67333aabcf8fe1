"""Nested hole families, survivor masses and escape rates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .certify import sample_points
from .ensemble import ConfigError, RandomEnsemble, escape_holes
from .interval_fn import normalize_set
from .random_map import survivor_partition
from .rpf import RpfSolver


def _covered(inner, outer, base) -> bool:
    """Whether the union ``inner`` lies inside the union ``outer`` (up to shared endpoints)."""
    A, B = base
    tol = 1e-12 * (B - A)
    out = normalize_set(outer, A, B) if outer else []
    for lo, hi in normalize_set(inner, A, B) if inner else []:
        if not any(a - tol <= lo and hi <= b + tol for a, b in out):
            return False
    return True


@dataclass(frozen=True)
class HoleFamily:
    """Per-symbol holes on a sorted epsilon grid; ``holes[i][s]`` is the hole of symbol ``s`` at ``eps[i]``."""

    eps: tuple
    holes: tuple

    def __post_init__(self):
        if len(self.eps) != len(self.holes):
            raise ConfigError("one hole entry per epsilon is required")
        if list(self.eps) != sorted(self.eps):
            raise ConfigError("epsilon grid must be sorted")

    @classmethod
    def from_config(cls, cfg: dict) -> "HoleFamily":
        eps, holes = escape_holes(cfg)
        return cls(tuple(eps), tuple(tuple(tuple(map(tuple, h)) for h in hs) for hs in holes))

    def check_nested(self, base) -> None:
        """Raise unless ``H^{eps'}`` sits inside ``H^{eps}`` for every ``eps' < eps`` and symbol."""
        for i in range(len(self.eps) - 1):
            for s, (small, big) in enumerate(zip(self.holes[i], self.holes[i + 1])):
                if not _covered(small, big, base):
                    raise ConfigError(
                        f"hole family is not nested: symbol {s}, eps {self.eps[i]} -> {self.eps[i + 1]}"
                    )

    def ensemble(self, E: RandomEnsemble, i: int) -> RandomEnsemble:
        return E.with_holes(self.holes[i])


def survivor_mass(E_small: RandomEnsemble, E_big: RandomEnsemble, k: int, n: int,
                  nu_n: int | None = None, nu_depth: int = 30) -> float:
    """``nu^{small}_k(X^{big}_{k,n})`` for nested holes (``E_small`` has the smaller ones).

    Since ``L^{big,(n)} f = L^{small,(n)}(f 1_{X^{big}_n})``, conformality of
    ``nu^{small}`` gives the mass as
    ``nu^{small}_{k+n}(L^{big,(n)} 1) / lam^{small,+(n)}_k``, which avoids
    enumerating the (exponentially many) survivor elements.
    """
    small = RpfSolver(E_small, nu_depth=nu_depth)
    big = RpfSolver(E_big, nu_depth=nu_depth)
    f, log_scale = big.push(k, n, E_big.one())
    num = small.nu(k + n, f, nu_n).value
    log_lp = math.log(small.lambda_plus(k, nu_n, steps=n))
    return num * math.exp(log_scale - log_lp)


def survivor_mass_partition(E_small: RandomEnsemble, E_big: RandomEnsemble, k: int, n: int,
                            cells: int = 1024, nu_depth: int = 30) -> float:
    """Same quantity from the explicit survivor partition integrated against the CDF table of ``nu^{small}_k``."""
    part = survivor_partition(E_big.maps, E_big.word(k, n))
    fiber = RpfSolver(E_small, nu_depth=nu_depth)
    grid, cdf = fiber.cdf_table(k, cells)
    return float(sum(np.interp(hi, grid, cdf) - np.interp(lo, grid, cdf) for lo, hi in part.intervals))


@dataclass(frozen=True)
class EscapeFit:
    ns: tuple
    masses: tuple
    rate: float  # -slope of log mass over the upper half of ns
    upper_from: int


def escape_rate(E_small: RandomEnsemble, E_big: RandomEnsemble, k: int, n_max: int,
                nu_n: int | None = None, nu_depth: int = 30) -> EscapeFit:
    """Survivor masses for ``n = 1..n_max`` and the fitted exponential escape rate."""
    if n_max < 2:
        raise ValueError("need at least two survivor levels")
    ns = list(range(1, n_max + 1))
    masses = [survivor_mass(E_small, E_big, k, n, nu_n, nu_depth) for n in ns]
    start = n_max // 2
    x = np.asarray(ns[start - 1:], dtype=float)
    y = np.log(np.asarray(masses[start - 1:]))
    slope = float(np.polyfit(x, y, 1)[0])
    return EscapeFit(tuple(ns), tuple(masses), -slope, start)


@dataclass(frozen=True)
class EscapeRow:
    eps: float
    lyapunov: float
    stderr: float


@dataclass(frozen=True)
class EscapePair:
    eps_small: float
    eps_big: float
    pressure_gap: float  # Lambda^{eps'} - Lambda^{eps}
    fitted_rate: float
    residual: float


@dataclass(frozen=True)
class EscapeTable:
    rows: tuple
    pairs: tuple
    monotone: bool
    n: int
    K: int


def lambda_vs_epsilon(E: RandomEnsemble, family: HoleFamily, n: int, K: int, warmup: int = 20,
                      base_index: int = 0, rate_n: int | None = None, offset: int = 0) -> EscapeTable:
    """``Lambda^eps`` per grid point, the monotonicity check and escape-rate residuals of adjacent pairs."""
    family.check_nested(E.base)
    ens = [family.ensemble(E, i) for i in range(len(family.eps))]
    rows = []
    for eps, Ei in zip(family.eps, ens):
        ly = RpfSolver(Ei).lyapunov(K, n, warmup=warmup, offset=offset)
        rows.append(EscapeRow(eps, ly["lyapunov"], ly["stderr"]))
    monotone = all(
        b.lyapunov <= a.lyapunov + 2.0 * math.hypot(a.stderr, b.stderr) + 1e-12
        for a, b in zip(rows, rows[1:])
    )
    pairs = []
    for i in range(len(rows) - 1):
        gap = rows[i].lyapunov - rows[i + 1].lyapunov
        fit = escape_rate(ens[i], ens[i + 1], base_index, rate_n or n)
        pairs.append(EscapePair(rows[i].eps, rows[i + 1].eps, gap, fit.rate, abs(gap - fit.rate)))
    return EscapeTable(tuple(rows), tuple(pairs), monotone, n, K)


def domination_violations(E_small: RandomEnsemble, E_big: RandomEnsemble, n_max: int, K: int,
                          offset: int = 0) -> int:
    """Count words where ``Einf(L^{big,(n)} 1) > Einf(L^{small,(n)} 1)`` (should be zero)."""
    bad = 0
    for k in sample_points(E_small, K, offset):
        f, g = E_small.one(), E_big.one()
        for j in range(n_max):
            s = E_small.word(k + j, 1)[0]
            f = E_small.operator(s).apply(f)
            g = E_big.operator(s).apply(g)
            a, b = f.essinf(), g.essinf()
            if b > a * (1.0 + 1e-12):
                bad += 1
            # common rescaling keeps the comparison intact
            f, g = f.scale(1.0 / a), g.scale(1.0 / a)
    return bad
