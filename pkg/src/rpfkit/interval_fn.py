"""Piecewise representatives of bounded-variation functions on a compact interval.

A :class:`PiecewiseFn` stores breakpoints and, for every piece between
consecutive breakpoints, either an affine formula or equispaced samples that
are linearly interpolated. Values *at* breakpoints are never stored: every
query goes through one-sided limits, so two representatives that differ on a
finite set are indistinguishable and the variation reported is that of the
minimal-variation representative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

DEFAULT_RESOLUTION = 4096
MIN_PIECE_NODES = 8
MERGE_RTOL = 1e-12


@dataclass(frozen=True)
class Affine:
    slope: float
    intercept: float


@dataclass(frozen=True)
class Samples:
    values: tuple


def piece_node_count(length: float, span: float, resolution: int = DEFAULT_RESOLUTION) -> int:
    """Number of equispaced nodes for a piece of the given length.

    Spacing is close to ``span / resolution`` so that pieces of dyadic length
    get dyadic node spacing; never fewer than ``MIN_PIECE_NODES``.
    """
    return max(MIN_PIECE_NODES, int(round(resolution * length / span)) + 1)


def merge_breakpoints(points: Iterable[float], lo: float, hi: float) -> np.ndarray:
    """Sorted unique breakpoints in [lo, hi], merging points closer than the tolerance."""
    tol = MERGE_RTOL * (hi - lo)
    pts = np.asarray(list(points) if not isinstance(points, np.ndarray) else points, dtype=float)
    pts = pts[(pts > lo + tol) & (pts < hi - tol)]
    pts = np.sort(pts)
    if pts.size:
        keep = np.concatenate(([True], np.diff(pts) > tol))
        pts = pts[keep]
    return np.concatenate(([lo], pts, [hi]))


def normalize_set(S, lo: float, hi: float) -> list[tuple[float, float]]:
    """Turn a set description into sorted, disjoint, clipped components.

    ``S`` may be ``None`` (the whole base), a single ``(a, b)`` pair, or an
    iterable of pairs. Components of non-positive length are dropped.
    """
    if S is None:
        return [(lo, hi)]
    S = list(S)
    if len(S) == 2 and np.isscalar(S[0]) and np.isscalar(S[1]):
        S = [tuple(S)]
    comps = []
    for a, b in S:
        a, b = max(float(a), lo), min(float(b), hi)
        if b > a:
            comps.append((a, b))
    comps.sort()
    merged: list[list[float]] = []
    for a, b in comps:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return [(a, b) for a, b in merged]


class PiecewiseFn:
    """Immutable piecewise-affine / piecewise-sampled function on ``[A, B]``.

    Parameters
    ----------
    breakpoints : array_like
        Strictly increasing, first entry ``A`` and last entry ``B``.
    pieces : sequence of Affine or Samples
        One record per consecutive breakpoint pair.
    """

    __slots__ = ("bp", "kind", "slope", "intercept", "offset", "count", "values", "_key")

    def __init__(self, breakpoints, pieces: Sequence[Affine | Samples]):
        bp = np.asarray(breakpoints, dtype=float)
        if bp.ndim != 1 or bp.size < 2:
            raise ValueError("need at least two breakpoints")
        if not np.all(np.diff(bp) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        if len(pieces) != bp.size - 1:
            raise ValueError("piece count must equal breakpoint count - 1")
        P = len(pieces)
        kind = np.zeros(P, dtype=np.int8)
        slope = np.zeros(P)
        intercept = np.zeros(P)
        offset = np.full(P, -1, dtype=np.int64)
        count = np.zeros(P, dtype=np.int64)
        chunks = []
        pos = 0
        for i, pc in enumerate(pieces):
            if isinstance(pc, Affine):
                slope[i] = pc.slope
                intercept[i] = pc.intercept
            elif isinstance(pc, Samples):
                v = np.asarray(pc.values, dtype=float)
                if v.size < 2:
                    raise ValueError("sampled pieces need at least two nodes")
                kind[i] = 1
                offset[i] = pos
                count[i] = v.size
                chunks.append(v)
                pos += v.size
            else:
                raise TypeError(f"unknown piece type {type(pc)!r}")
        values = np.concatenate(chunks) if chunks else np.zeros(0)
        self._set(bp, kind, slope, intercept, offset, count, values)

    def _set(self, bp, kind, slope, intercept, offset, count, values):
        for arr in (bp, kind, slope, intercept, offset, count, values):
            arr.setflags(write=False)
        object.__setattr__(self, "bp", bp)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "slope", slope)
        object.__setattr__(self, "intercept", intercept)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "count", count)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_key", None)

    def __setattr__(self, name, value):
        raise AttributeError("PiecewiseFn is immutable")

    @classmethod
    def _raw(cls, bp, kind, slope, intercept, offset, count, values) -> "PiecewiseFn":
        obj = cls.__new__(cls)
        obj._set(
            np.array(bp, dtype=float),
            np.array(kind, dtype=np.int8),
            np.array(slope, dtype=float),
            np.array(intercept, dtype=float),
            np.array(offset, dtype=np.int64),
            np.array(count, dtype=np.int64),
            np.array(values, dtype=float),
        )
        return obj

    # constructors -------------------------------------------------------

    @classmethod
    def constant(cls, c: float, base=(0.0, 1.0)) -> "PiecewiseFn":
        return cls([base[0], base[1]], [Affine(0.0, float(c))])

    @classmethod
    def affine(cls, slope: float, intercept: float, base=(0.0, 1.0)) -> "PiecewiseFn":
        return cls([base[0], base[1]], [Affine(float(slope), float(intercept))])

    @classmethod
    def step(cls, breakpoints, levels) -> "PiecewiseFn":
        """Piecewise-constant function with the given levels."""
        return cls(breakpoints, [Affine(0.0, float(v)) for v in levels])

    @classmethod
    def indicator(cls, lo: float, hi: float, base=(0.0, 1.0)) -> "PiecewiseFn":
        """Indicator of the interval ``[lo, hi]`` intersected with the base."""
        A, B = base
        lo, hi = max(lo, A), min(hi, B)
        if hi <= lo:
            return cls.constant(0.0, base)
        bp = merge_breakpoints([lo, hi], A, B)
        mids = 0.5 * (bp[:-1] + bp[1:])
        return cls.step(bp, ((mids > lo) & (mids < hi)).astype(float))

    @classmethod
    def indicator_of_set(cls, S, base=(0.0, 1.0)) -> "PiecewiseFn":
        A, B = base
        comps = normalize_set(S, A, B)
        if not comps:
            return cls.constant(0.0, base)
        bp = merge_breakpoints([p for c in comps for p in c], A, B)
        mids = 0.5 * (bp[:-1] + bp[1:])
        inside = np.zeros(mids.size, dtype=bool)
        for a, b in comps:
            inside |= (mids > a) & (mids < b)
        return cls.step(bp, inside.astype(float))

    @classmethod
    def from_callable(
        cls,
        func: Callable[[np.ndarray], np.ndarray],
        breakpoints=(0.0, 1.0),
        resolution: int = DEFAULT_RESOLUTION,
    ) -> "PiecewiseFn":
        """Sample a vectorized callable on every piece.

        The callable is evaluated at the piece nodes, endpoints included, so it
        should return the appropriate one-sided limits there (continuous
        callables need no care).
        """
        bp = np.asarray(breakpoints, dtype=float)
        span = bp[-1] - bp[0]
        pieces = []
        for a, b in zip(bp[:-1], bp[1:]):
            x = np.linspace(a, b, piece_node_count(b - a, span, resolution))
            pieces.append(Samples(tuple(np.asarray(func(x), dtype=float))))
        return cls(bp, pieces)

    # basic properties -----------------------------------------------------

    @property
    def base(self) -> tuple[float, float]:
        return float(self.bp[0]), float(self.bp[-1])

    @property
    def n_pieces(self) -> int:
        return self.kind.size

    @property
    def pieces(self) -> list[Affine | Samples]:
        out = []
        for i in range(self.n_pieces):
            if self.kind[i] == 0:
                out.append(Affine(float(self.slope[i]), float(self.intercept[i])))
            else:
                o, m = self.offset[i], self.count[i]
                out.append(Samples(tuple(self.values[o : o + m].tolist())))
        return out

    @property
    def layout_key(self) -> tuple:
        """Hashable description of breakpoints, piece kinds and node counts."""
        if self._key is None:
            key = (self.bp.tobytes(), self.kind.tobytes(), self.count.tobytes())
            object.__setattr__(self, "_key", key)
        return self._key

    def same_layout(self, other: "PiecewiseFn") -> bool:
        return self.layout_key == other.layout_key

    def is_affine(self) -> bool:
        return not np.any(self.kind)

    def nodes(self) -> np.ndarray:
        """Node abscissae of the sampled pieces, in storage order."""
        xs = [
            np.linspace(self.bp[i], self.bp[i + 1], self.count[i])
            for i in range(self.n_pieces)
            if self.kind[i] == 1
        ]
        return np.concatenate(xs) if xs else np.zeros(0)

    def with_values(self, values: np.ndarray) -> "PiecewiseFn":
        """Same layout, new sample values (affine pieces unchanged)."""
        values = np.asarray(values, dtype=float)
        if values.shape != self.values.shape:
            raise ValueError("value array does not match the layout")
        return PiecewiseFn._raw(
            self.bp, self.kind, self.slope, self.intercept, self.offset, self.count, values
        )

    def __repr__(self) -> str:
        A, B = self.base
        return f"PiecewiseFn([{A}, {B}], pieces={self.n_pieces}, sampled={int(self.kind.sum())})"

    # evaluation -------------------------------------------------------------

    def piece_index(self, x, side) -> np.ndarray:
        """Index of the piece whose one-sided limit is requested at ``x``."""
        x = np.asarray(x, dtype=float)
        P = self.n_pieces
        if isinstance(side, str):
            how = "right" if side == "right" else "left"
            idx = np.searchsorted(self.bp, x, side=how) - 1
        else:
            side = np.asarray(side, dtype=bool)  # True means right-hand limit
            idx = np.where(
                side,
                np.searchsorted(self.bp, x, side="right"),
                np.searchsorted(self.bp, x, side="left"),
            ) - 1
        return np.clip(idx, 0, P - 1)

    def _eval_in(self, idx: np.ndarray, x: np.ndarray) -> np.ndarray:
        out = self.slope[idx] * x + self.intercept[idx]
        samp = self.kind[idx] == 1
        if np.any(samp):
            i = idx[samp]
            xs = x[samp]
            a, b = self.bp[i], self.bp[i + 1]
            m = self.count[i]
            s = (xs - a) / (b - a) * (m - 1)
            j = np.clip(np.floor(s).astype(np.int64), 0, m - 2)
            fr = np.clip(s - j, 0.0, 1.0)
            o = self.offset[i] + j
            out[samp] = self.values[o] * (1.0 - fr) + self.values[o + 1] * fr
        return out

    def evaluate(self, x, side="right") -> np.ndarray:
        """Vectorized one-sided limits. ``side`` is 'left', 'right' or a boolean array."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self._eval_in(self.piece_index(x, side), x)

    def eval_one_sided(self, x: float, side: str) -> float:
        A, B = self.base
        if side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        if not (A <= x <= B):
            raise ValueError(f"{x} outside [{A}, {B}]")
        if side == "left" and x == A:
            raise ValueError("no left limit at the left endpoint")
        if side == "right" and x == B:
            raise ValueError("no right limit at the right endpoint")
        return float(self.evaluate([x], side)[0])

    # per-piece extrema and variation ------------------------------------------

    def _piece_polyline(self, i: int, a: float, b: float) -> np.ndarray:
        """Values of the piece restricted to ``[a, b]``: endpoint limits plus interior nodes."""
        if self.kind[i] == 0:
            return self.slope[i] * np.array([a, b]) + self.intercept[i]
        lo, hi = self.bp[i], self.bp[i + 1]
        m = self.count[i]
        o = self.offset[i]
        v = self.values[o : o + m]
        if a <= lo and b >= hi:
            return v
        xs = np.linspace(lo, hi, m)
        inner = v[(xs > a) & (xs < b)]
        ends = self._eval_in(np.array([i, i]), np.array([a, b]))
        return np.concatenate(([ends[0]], inner, [ends[1]]))

    def _components(self, S):
        A, B = self.base
        return normalize_set(S, A, B)

    def _pieces_in(self, a: float, b: float):
        """Yield ``(piece, lo, hi)`` overlaps of positive length with ``[a, b]``."""
        i0 = int(np.clip(np.searchsorted(self.bp, a, side="right") - 1, 0, self.n_pieces - 1))
        i1 = int(np.clip(np.searchsorted(self.bp, b, side="left") - 1, 0, self.n_pieces - 1))
        for i in range(i0, i1 + 1):
            lo, hi = max(a, self.bp[i]), min(b, self.bp[i + 1])
            if hi > lo:
                yield i, lo, hi

    def _whole(self, S) -> bool:
        if S is None:
            return True
        comps = self._components(S)
        return len(comps) == 1 and comps[0] == self.base

    def _all_limit_values(self) -> np.ndarray:
        aff = self.kind == 0
        ends = np.concatenate(
            (
                self.slope[aff] * self.bp[:-1][aff] + self.intercept[aff],
                self.slope[aff] * self.bp[1:][aff] + self.intercept[aff],
            )
        )
        return np.concatenate((ends, self.values))

    def essinf_on(self, S=None) -> float:
        """Essential infimum over ``S`` (whole base if ``None``); 0 on an empty set."""
        if self._whole(S):
            return float(np.min(self._all_limit_values()))
        vals = [
            np.min(self._piece_polyline(i, lo, hi))
            for a, b in self._components(S)
            for i, lo, hi in self._pieces_in(a, b)
        ]
        return float(min(vals)) if vals else 0.0

    def esssup_on(self, S=None) -> float:
        """Essential supremum over ``S``; 0 on an empty set."""
        if self._whole(S):
            return float(np.max(self._all_limit_values()))
        vals = [
            np.max(self._piece_polyline(i, lo, hi))
            for a, b in self._components(S)
            for i, lo, hi in self._pieces_in(a, b)
        ]
        return float(max(vals)) if vals else 0.0

    def essinf(self) -> float:
        return self.essinf_on(None)

    def esssup(self) -> float:
        return self.esssup_on(None)

    def sup_norm(self, S=None) -> float:
        return max(abs(self.essinf_on(S)), abs(self.esssup_on(S)))

    def jumps(self) -> np.ndarray:
        """Absolute jumps at the interior breakpoints."""
        if self.n_pieces < 2:
            return np.zeros(0)
        x = self.bp[1:-1]
        left = self._eval_in(np.arange(self.n_pieces - 1), x.copy())
        right = self._eval_in(np.arange(1, self.n_pieces), x.copy())
        return np.abs(right - left)

    def variation_on(self, S=None) -> float:
        """Total variation of the minimal representative over ``S``."""
        if self._whole(S):
            aff = self.kind == 0
            within = float(np.sum(np.abs(self.slope[aff]) * np.diff(self.bp)[aff]))
            if self.values.size:
                d = np.abs(np.diff(self.values))
                # drop differences that straddle two sampled pieces
                ends = (self.offset + self.count)[self.kind == 1] - 1
                ends = ends[ends < d.size]
                mask = np.ones(d.size, dtype=bool)
                mask[ends] = False
                within += float(np.sum(d[mask]))
            return within + float(np.sum(self.jumps()))
        total = 0.0
        for a, b in self._components(S):
            prev_right = None
            for i, lo, hi in self._pieces_in(a, b):
                poly = self._piece_polyline(i, lo, hi)
                total += float(np.sum(np.abs(np.diff(poly))))
                if prev_right is not None:
                    total += abs(poly[0] - prev_right)
                prev_right = poly[-1]
        return total

    def variation(self) -> float:
        return self.variation_on(None)

    def bv_norm(self) -> float:
        return self.variation() + self.sup_norm()

    def integral(self, S=None) -> float:
        """Lebesgue integral over ``S`` (trapezoid rule on sampled pieces)."""
        total = 0.0
        for a, b in self._components(S):
            for i, lo, hi in self._pieces_in(a, b):
                if self.kind[i] == 0:
                    total += self.slope[i] * 0.5 * (hi * hi - lo * lo) + self.intercept[i] * (hi - lo)
                else:
                    pl, ph = self.bp[i], self.bp[i + 1]
                    m = self.count[i]
                    xs = np.linspace(pl, ph, m)
                    if lo <= pl and hi >= ph:
                        total += float(np.trapezoid(self.values[self.offset[i] : self.offset[i] + m], xs))
                    else:
                        inner = (xs > lo) & (xs < hi)
                        px = np.concatenate(([lo], xs[inner], [hi]))
                        py = self._piece_polyline(i, lo, hi)
                        total += float(np.trapezoid(py, px))
        return total

    # algebra ------------------------------------------------------------------

    def scale(self, alpha: float) -> "PiecewiseFn":
        return PiecewiseFn._raw(
            self.bp, self.kind, alpha * self.slope, alpha * self.intercept,
            self.offset, self.count, alpha * self.values,
        )

    def shift(self, c: float) -> "PiecewiseFn":
        return PiecewiseFn._raw(
            self.bp, self.kind, self.slope, self.intercept + c * (self.kind == 0),
            self.offset, self.count, self.values + c,
        )

    def map_values(self, func: Callable[[np.ndarray], np.ndarray]) -> "PiecewiseFn":
        """Apply a pointwise function; affine pieces become sampled unless constant."""
        span = self.bp[-1] - self.bp[0]
        pieces = []
        for i in range(self.n_pieces):
            a, b = self.bp[i], self.bp[i + 1]
            if self.kind[i] == 0 and self.slope[i] == 0.0:
                pieces.append(Affine(0.0, float(func(np.array([self.intercept[i]]))[0])))
            elif self.kind[i] == 0:
                x = np.linspace(a, b, piece_node_count(b - a, span))
                pieces.append(Samples(tuple(func(self.slope[i] * x + self.intercept[i]))))
            else:
                o, m = self.offset[i], self.count[i]
                pieces.append(Samples(tuple(func(self.values[o : o + m]))))
        return PiecewiseFn(self.bp, pieces)

    def __add__(self, other):
        if isinstance(other, PiecewiseFn):
            return combine(1.0, self, 1.0, other)
        return self.shift(float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, PiecewiseFn):
            return combine(1.0, self, -1.0, other)
        return self.shift(-float(other))

    def __neg__(self):
        return self.scale(-1.0)

    def __mul__(self, other):
        if isinstance(other, PiecewiseFn):
            return pointwise_mul(self, other)
        return self.scale(float(other))

    __rmul__ = __mul__


def _check_base(f: PiecewiseFn, g: PiecewiseFn):
    if f.base != g.base:
        raise ValueError(f"mismatched base intervals {f.base} and {g.base}")


def _binary(f: PiecewiseFn, g: PiecewiseFn, op, affine_rule, resolution: int) -> PiecewiseFn:
    """Pointwise binary operation on the merged breakpoint set."""
    A, B = f.base
    span = B - A
    bp = merge_breakpoints(np.concatenate((f.bp, g.bp)), A, B)
    mids = 0.5 * (bp[:-1] + bp[1:])
    fi = f.piece_index(mids, "right")
    gi = g.piece_index(mids, "right")
    pieces = []
    for k in range(bp.size - 1):
        a, b = bp[k], bp[k + 1]
        i, j = fi[k], gi[k]
        if f.kind[i] == 0 and g.kind[j] == 0:
            rule = affine_rule(f.slope[i], f.intercept[i], g.slope[j], g.intercept[j])
            if rule is not None:
                pieces.append(Affine(*rule))
                continue
        dens = []
        for h, p in ((f, i), (g, j)):
            if h.kind[p] == 1:
                dens.append((h.count[p] - 1) / (h.bp[p + 1] - h.bp[p]))
        m = piece_node_count(b - a, span, resolution)
        if dens:
            m = max(MIN_PIECE_NODES, int(np.ceil(max(dens) * (b - a) - 1e-9)) + 1)
        x = np.linspace(a, b, m)
        fv = f._eval_in(np.full(m, i), x.copy())
        gv = g._eval_in(np.full(m, j), x.copy())
        pieces.append(Samples(tuple(op(fv, gv))))
    return PiecewiseFn(bp, pieces)


def combine(alpha: float, f: PiecewiseFn, beta: float, g: PiecewiseFn,
            resolution: int = DEFAULT_RESOLUTION) -> PiecewiseFn:
    """``alpha*f + beta*g``; exact for affine pieces."""
    _check_base(f, g)
    if f.same_layout(g):
        return PiecewiseFn._raw(
            f.bp, f.kind, alpha * f.slope + beta * g.slope,
            alpha * f.intercept + beta * g.intercept,
            f.offset, f.count, alpha * f.values + beta * g.values,
        )
    return _binary(
        f, g,
        lambda u, v: alpha * u + beta * v,
        lambda s1, i1, s2, i2: (alpha * s1 + beta * s2, alpha * i1 + beta * i2),
        resolution,
    )


def pointwise_mul(f: PiecewiseFn, g: PiecewiseFn, resolution: int = DEFAULT_RESOLUTION) -> PiecewiseFn:
    """Pointwise product. Affine times constant stays affine; other products are sampled."""
    _check_base(f, g)
    if f.same_layout(g) and f.is_affine() is False and not np.any(f.kind == 0):
        return f.with_values(f.values * g.values)

    def rule(s1, i1, s2, i2):
        if s1 == 0.0:
            return (i1 * s2, i1 * i2)
        if s2 == 0.0:
            return (s1 * i2, i1 * i2)
        return None

    return _binary(f, g, lambda u, v: u * v, rule, resolution)
