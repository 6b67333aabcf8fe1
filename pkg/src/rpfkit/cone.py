"""Cones of positive BV functions and the Hilbert projective metric on them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .interval_fn import PiecewiseFn, combine


@dataclass(frozen=True)
class Membership:
    member: bool
    margin: float  # a * essinf(f) - var(f)
    variation: float
    essinf: float


def cone_member(f: PiecewiseFn, a: float) -> Membership:
    """Is ``f`` in ``C_a = {f > 0, var f <= a essinf f}``? The signed margin is reported raw."""
    v = f.variation()
    m = f.essinf()
    return Membership(bool(m > 0 and v <= a * m), a * m - v, v, m)


def _dominated(h: PiecewiseFn, f: PiecewiseFn, lam: float, a: float, sign: int) -> bool:
    """Whether ``sign * (h - lam f)`` lies in ``C_a`` or is zero."""
    d = combine(sign, h, -sign * lam, f)
    m = d.essinf()
    scale = max(h.sup_norm(), lam * f.sup_norm())
    if d.sup_norm() <= 1e-14 * scale:
        return True
    return m > 0 and d.variation() <= a * m


def _exact_multiple(f: PiecewiseFn, h: PiecewiseFn) -> float | None:
    r = h.esssup() / f.esssup()
    if combine(1.0, h, -r, f).sup_norm() <= 1e-12 * h.sup_norm():
        return r
    return None


def _check_members(f, h, a):
    for name, g in (("f", f), ("h", h)):
        mem = cone_member(g, a)
        if not mem.member and mem.margin < -1e-12 * max(1.0, mem.variation):
            raise ValueError(f"{name} is not in the cone C_{a} (margin {mem.margin:.3g})")
        if mem.essinf <= 0:
            raise ValueError(f"{name} is not strictly positive")


def tau_rho(f: PiecewiseFn, h: PiecewiseFn, a: float, rtol: float = 1e-10) -> tuple[float, float]:
    """``tau = sup{l : l f <= h}`` and ``rho = inf{m : m f >= h}`` for the cone order of ``C_a``.

    Both feasibility sets are intervals (the variation of ``h - l f`` is
    convex in ``l`` and its essential infimum concave), so bisection applies.
    Returns ``tau = 0`` / ``rho = inf`` when the order relation never holds.
    """
    _check_members(f, h, a)
    r = _exact_multiple(f, h)
    if r is not None:
        return r, r
    # tau: feasible at 0, infeasible at esssup h / essinf f
    lo, hi = 0.0, h.esssup() / f.essinf()
    if _dominated(h, f, hi, a, 1):
        lo = hi
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if _dominated(h, f, mid, a, 1):
            lo = mid
        else:
            hi = mid
    tau = lo if lo > 0 else (0.0 if not _dominated(h, f, hi, a, 1) else hi)
    # rho: infeasible at essinf h / esssup f, grow the upper end until feasible
    lo = h.essinf() / f.esssup()
    hi = max(2.0 * lo, h.esssup() / f.essinf())
    while not _dominated(h, f, hi, a, -1):
        lo = hi
        hi *= 2.0
        if hi > 1e15 * (lo + 1.0):
            return tau, math.inf
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if _dominated(h, f, mid, a, -1):
            hi = mid
        else:
            lo = mid
    return tau, hi


def theta(f: PiecewiseFn, h: PiecewiseFn, a: float, rtol: float = 1e-10) -> float:
    """Hilbert projective distance ``log(rho / tau)`` in ``C_a`` (``inf`` when unbounded)."""
    tau, rho = tau_rho(f, h, a, rtol)
    if tau <= 0 or math.isinf(rho):
        return math.inf
    return max(0.0, math.log(rho / tau))


def diameter_bound(gamma: float, a: float) -> float:
    """Upper bound on the diameter of ``C_{gamma a}`` inside ``C_a``."""
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    if a <= 0:
        raise ValueError("cone aperture must be positive")
    return 2.0 * math.log((1.0 + gamma * (a + 1.0)) / (1.0 - gamma))


def contraction_factor(diameter: float) -> float:
    """Birkhoff contraction coefficient ``tanh(diameter / 4)``."""
    if not math.isfinite(diameter):
        raise ValueError("diameter must be finite")
    return math.tanh(diameter / 4.0)


def random_cone_function(rng: np.random.Generator, a: float, base=(0.0, 1.0), pieces: int = 6,
                         fill: float = 0.9) -> PiecewiseFn:
    """A random piecewise-affine element of ``C_a`` with variation about ``fill * a * essinf``."""
    from .interval_fn import Affine

    A, B = base
    inner = np.sort(rng.uniform(A, B, pieces - 1))
    bp = np.concatenate(([A], inner, [B]))
    ends = rng.uniform(-1.0, 1.0, size=(pieces, 2))
    f = PiecewiseFn(bp, [Affine((e1 - e0) / (b - a0), e0 - (e1 - e0) / (b - a0) * a0)
                         for (e0, e1), a0, b in zip(ends, bp[:-1], bp[1:])])
    v = f.variation()
    m = f.essinf()
    if v == 0:
        return f.shift(1.0 - m)
    # shift so that var = fill * a * essinf, then normalize essinf to 1
    shift = v / (fill * a) - m
    g = f.shift(shift)
    return g.scale(1.0 / g.essinf())
