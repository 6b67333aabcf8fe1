"""Independent brute-force checks: Ulam matrices and direct node-wise operator sums.

Only the branch formulas and their inverses are shared with the main path;
weights, cells, quadrature and cocycle products are redone here from the
configuration data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .random_map import OpenMap
from .transfer import ConstantPotential, GeometricPotential, PiecewiseAffineLogPotential

QUAD_POINTS = 32


def weight_function(m: OpenMap, potential, symbol: int):
    """``x, branch -> g(x)`` straight from the potential spec."""

    def g(x, branch):
        x = np.asarray(x, dtype=float)
        if isinstance(potential, ConstantPotential):
            return np.full(x.shape, math.exp(potential.value))
        if isinstance(potential, GeometricPotential):
            d = np.abs(m.branches[branch].derivative(x))
            with np.errstate(divide="ignore", over="ignore"):
                return np.where(np.isinf(d), 0.0, d ** (-potential.t))
        lw = potential.log_weights[symbol]
        # piecewise-affine data: evaluate the affine formula directly
        idx = np.clip(np.searchsorted(lw.bp, x, side="right") - 1, 0, lw.bp.size - 2)
        return np.exp(lw.slope[idx] * x + lw.intercept[idx])

    return g


@dataclass(frozen=True)
class UlamMatrix:
    N: int
    base: tuple
    matrix: sparse.csr_matrix  # matrix[k, i]: mass sent from cell i to cell k

    @property
    def h(self) -> float:
        return (self.base[1] - self.base[0]) / self.N

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def _survivor_pieces(m: OpenMap):
    """(branch index, lo, hi) for each branch domain intersected with each survivor component."""
    out = []
    for b, br in enumerate(m.branches):
        lo, hi = br.domain
        for s0, s1 in m.survivor_set:
            a, c = max(lo, s0), min(hi, s1)
            if c > a:
                out.append((b, a, c))
    return out


def ulam_matrix(m: OpenMap, potential, symbol: int, N: int, quad: int = QUAD_POINTS) -> UlamMatrix:
    """Cell-to-cell masses ``(1/h) int_{cell_i cap X cap T^{-1} cell_k} g |T'| dx``.

    Each branch piece is cut at the cell edges and at the preimages of the
    cell edges, so every sub-interval lies in one source and one target cell;
    the integral uses a ``quad``-point composite midpoint rule.
    """
    if N < 2:
        raise ValueError("need at least two cells")
    A, B = m.base
    h = (B - A) / N
    edges = A + h * np.arange(N + 1)
    g = weight_function(m, potential, symbol)
    rows, cols, vals = [], [], []
    for b, lo, hi in _survivor_pieces(m):
        br = m.branches[b]
        ylo, yhi = br.image_of(lo, hi)
        ey = edges[(edges > ylo) & (edges < yhi)]
        cuts = np.concatenate(([lo, hi], edges[(edges > lo) & (edges < hi)], br.inverse(ey)))
        cuts = np.unique(cuts)
        a, c = cuts[:-1], cuts[1:]
        keep = c - a > 1e-15 * (B - A)
        a, c = a[keep], c[keep]
        mid = 0.5 * (a + c)
        src = np.clip(((mid - A) / h).astype(np.int64), 0, N - 1)
        tgt = np.clip(((br.forward(mid) - A) / h).astype(np.int64), 0, N - 1)
        # composite midpoint rule on each piece
        t = (np.arange(quad) + 0.5) / quad
        x = a[:, None] + (c - a)[:, None] * t[None, :]
        dens = g(x, b) * np.abs(br.derivative(x))
        dens = np.where(np.isfinite(dens), dens, 0.0)
        mass = dens.mean(axis=1) * (c - a)
        rows.append(tgt); cols.append(src); vals.append(mass / h)
    M = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
    )
    return UlamMatrix(N, (A, B), M)


class UlamCocycle:
    """Ulam matrices of every symbol of an ensemble, with cocycle products."""

    def __init__(self, E, N: int, quad: int = QUAD_POINTS):
        self.E = E
        self.N = N
        self.mats = [ulam_matrix(m, E.potential, s, N, quad).matrix for s, m in enumerate(E.maps)]
        A, B = E.base
        self.h = (B - A) / N

    def push(self, start: int, n: int, v: np.ndarray) -> tuple[np.ndarray, float]:
        """Apply ``n`` steps from index ``start``; returns the L1-normalized vector and the log growth."""
        log_growth = 0.0
        for s in self.E.word(start, n) if n else ():
            v = self.mats[s] @ v
            norm = np.abs(v).sum() * self.h
            if not norm > 0:
                raise ValueError("Ulam cocycle collapsed to zero")
            log_growth += math.log(norm)
            v = v / norm
        return v, log_growth

    def leading_vector(self, k: int, depth: int) -> np.ndarray:
        """Cell values of the backward limit at fiber ``k``, normalized to unit L1 mass."""
        v = np.ones(self.N) / (self.N * self.h)
        v, _ = self.push(k - depth, depth, v)
        return v


def oracle_lyapunov(E, N: int, n: int, K: int, warmup: int = 0, offset: int = 0) -> dict:
    """``(1/n) log ||M_{w_{n-1}} ... M_{w_0} v||_1`` averaged over ``K`` base points."""
    from .certify import sample_points

    U = UlamCocycle(E, N)
    vals = []
    for k in sample_points(E, K, offset):
        v = np.ones(N)
        if warmup:
            v, _ = U.push(k - warmup, warmup, v)
        else:
            v = v / (np.abs(v).sum() * U.h)
        _, lg = U.push(k, n, v)
        vals.append(lg / n)
    vals = np.asarray(vals)
    se = float(vals.std(ddof=1) / math.sqrt(K)) if K > 1 else 0.0
    return {"lyapunov": float(vals.mean()), "stderr": se, "N": N, "n": n, "K": K, "warmup": warmup,
            "per_point": vals.tolist()}


def grid_apply(m: OpenMap, potential, symbol: int, x: np.ndarray, f_values: np.ndarray) -> np.ndarray:
    """``sum_Z g f (T_Z^{-1} x) 1_{T(Z)}(x)`` at the nodes ``x`` (``f`` linearly interpolated).

    At a node on the edge of a branch image the right limit is used, except
    at the right end of the base where it is the left limit.
    """
    x = np.asarray(x, dtype=float)
    f_values = np.asarray(f_values, dtype=float)
    A, B = m.base
    g = weight_function(m, potential, symbol)
    out = np.zeros(x.size)
    for b, lo, hi in _survivor_pieces(m):
        br = m.branches[b]
        ylo, yhi = br.image_of(lo, hi)
        inside = ((x >= ylo) & (x < yhi)) | ((x == B) & (yhi >= B) & (ylo < B))
        if not np.any(inside):
            continue
        z = br.inverse(x[inside])
        out[inside] += g(z, b) * np.interp(z, x, f_values)
    return out
