"""Interval maps with holes: monotone branches, survivor partitions and branch counts."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .interval_fn import (
    DEFAULT_RESOLUTION,
    Affine,
    PiecewiseFn,
    Samples,
    merge_breakpoints,
    normalize_set,
    piece_node_count,
)

FULL_RTOL = 1e-10
DROP_RTOL = 1e-12
INVERSE_TOL = 1e-13


class AssumptionError(ValueError):
    """A standing assumption of the setting fails (e.g. no full branch inside X)."""


class NumericalError(RuntimeError):
    """An iteration failed to converge or produced a non-finite value."""


def snap_to_base(lo: float, hi: float, base) -> tuple[float, float]:
    """Move image endpoints lying within the full-branch tolerance onto the base endpoints.

    Without this, rounding in a branch formula (say ``c * 0.1**0.75`` landing
    just below 1) is amplified by the next branch wherever its derivative
    blows up, and genuinely full chains get classified as partial.
    """
    A, B = base
    tol = FULL_RTOL * (B - A)
    if abs(lo - A) <= tol:
        lo = A
    if abs(hi - B) <= tol:
        hi = B
    return lo, hi


# ---------------------------------------------------------------------------
# branch families


@dataclass(frozen=True)
class AffineFamily:
    a: float
    b: float
    tag = "affine"

    def forward(self, x):
        return self.a * np.asarray(x, dtype=float) + self.b

    def derivative(self, x):
        return np.full(np.shape(x), float(self.a))

    def inverse(self, y, lo, hi):
        return (np.asarray(y, dtype=float) - self.b) / self.a


@dataclass(frozen=True)
class PowerFamily:
    """``c * |x - x0|**p + d`` on one side of ``x0``."""

    c: float
    x0: float
    p: float
    d: float = 0.0
    tag = "power"

    def forward(self, x):
        return self.c * np.abs(np.asarray(x, dtype=float) - self.x0) ** self.p + self.d

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        u = x - self.x0
        with np.errstate(divide="ignore", invalid="ignore"):
            mag = self.c * self.p * np.abs(u) ** (self.p - 1.0)
            # at the cusp sign(u) = 0 would turn an infinite slope into nan
            return np.where(u == 0, mag, mag * np.sign(u))

    def inverse(self, y, lo, hi):
        r = np.clip((np.asarray(y, dtype=float) - self.d) / self.c, 0.0, None) ** (1.0 / self.p)
        side = 1.0 if 0.5 * (lo + hi) > self.x0 else -1.0
        return self.x0 + side * r


@dataclass(frozen=True)
class QuadraticFamily:
    """``alpha * (x - r0) * (x - r1)`` restricted to one monotone side."""

    alpha: float
    r0: float
    r1: float
    tag = "quadratic"

    @property
    def vertex(self) -> float:
        return 0.5 * (self.r0 + self.r1)

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        return self.alpha * (x - self.r0) * (x - self.r1)

    def derivative(self, x):
        return self.alpha * (2.0 * np.asarray(x, dtype=float) - self.r0 - self.r1)

    def inverse(self, y, lo, hi):
        h = 0.5 * (self.r1 - self.r0)
        disc = np.clip(h * h + np.asarray(y, dtype=float) / self.alpha, 0.0, None)
        side = 1.0 if 0.5 * (lo + hi) > self.vertex else -1.0
        return self.vertex + side * np.sqrt(disc)


@dataclass(frozen=True)
class MannevillePomeauFamily:
    """The intermittent branch ``x (1 + 2**gamma x**gamma)`` on ``[0, 1/2]``."""

    gamma: float
    tag = "mp"

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        return x * (1.0 + 2.0**self.gamma * np.abs(x) ** self.gamma)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return 1.0 + (1.0 + self.gamma) * 2.0**self.gamma * np.abs(x) ** self.gamma

    def inverse(self, y, lo, hi):
        # safeguarded Newton: keep a bracket and bisect whenever a step leaves it
        y = np.atleast_1d(np.asarray(y, dtype=float))
        a = np.full(y.shape, float(lo))
        b = np.full(y.shape, float(hi))
        x = np.clip(y / 2.0, a, b)
        for _ in range(200):
            fx = self.forward(x) - y
            a = np.where(fx < 0, x, a)
            b = np.where(fx > 0, x, b)
            step = fx / self.derivative(x)
            xn = x - step
            bad = (xn < a) | (xn > b) | ~np.isfinite(xn)
            xn = np.where(bad, 0.5 * (a + b), xn)
            done = (np.abs(xn - x) < INVERSE_TOL) | (fx == 0) | (b - a < INVERSE_TOL)
            x = np.where(fx == 0, x, xn)
            if np.all(done):
                break
        return x


FAMILIES = {
    "affine": AffineFamily,
    "power": PowerFamily,
    "quadratic": QuadraticFamily,
    "mp": MannevillePomeauFamily,
}


@dataclass(frozen=True)
class Branch:
    """A monotone continuous branch on the closed interval ``domain``."""

    family: object
    domain: tuple

    def __post_init__(self):
        lo, hi = map(float, self.domain)
        if not hi > lo:
            raise ValueError(f"empty branch domain {self.domain}")
        object.__setattr__(self, "domain", (lo, hi))
        y = self.family.forward(np.array([lo, 0.5 * (lo + hi), hi]))
        if not (np.all(np.diff(y) > 0) or np.all(np.diff(y) < 0)):
            raise ValueError(f"branch {self.family} is not monotone on {self.domain}")

    @cached_property
    def increasing(self) -> bool:
        lo, hi = self.domain
        y = self.family.forward(np.array([lo, hi]))
        return bool(y[1] > y[0])

    def forward(self, x):
        return self.family.forward(x)

    def derivative(self, x):
        return self.family.derivative(x)

    def image_of(self, lo: float, hi: float) -> tuple[float, float]:
        y = self.family.forward(np.array([lo, hi], dtype=float))
        return float(min(y)), float(max(y))

    @cached_property
    def image(self) -> tuple[float, float]:
        return self.image_of(*self.domain)

    def inverse(self, y):
        """Preimage of ``y`` inside the domain (vectorized, no range check)."""
        lo, hi = self.domain
        return np.clip(self.family.inverse(y, lo, hi), lo, hi)

    def pull_back(self, ylo: float, yhi: float) -> tuple[float, float]:
        """Preimage of ``[ylo, yhi]`` (assumed inside the image), as an ordered pair."""
        x = self.inverse(np.array([ylo, yhi], dtype=float))
        return float(min(x)), float(max(x))


def invert_branch(br: Branch, y: float, tol: float = 1e-12) -> float:
    """Unique preimage of ``y`` under ``br``; raises if ``y`` is outside the image."""
    lo, hi = br.image
    if y < lo - tol * max(1.0, abs(lo)) or y > hi + tol * max(1.0, abs(hi)):
        raise ValueError(f"{y} outside branch image [{lo}, {hi}]")
    return float(br.inverse(np.array([min(max(y, lo), hi)]))[0])


def make_branch(family: str, params: dict, domain) -> Branch:
    try:
        cls = FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown branch family {family!r}") from None
    return Branch(cls(**params), tuple(domain))


# ---------------------------------------------------------------------------
# open maps


@dataclass(frozen=True)
class Element:
    """A level-one survivor element: a closed interval on which one branch acts."""

    lo: float
    hi: float
    branch: int
    increasing: bool
    image: tuple


@dataclass(frozen=True)
class OpenMap:
    """Finitely many monotone branches plus a hole made of open intervals.

    Parts of the base interval not covered by any branch must lie inside the
    hole (such points die immediately, so no formula is needed there).
    """

    branches: tuple
    hole: tuple = ()
    base: tuple = (0.0, 1.0)
    name: str = ""
    check_full: bool = True

    def __post_init__(self):
        A, B = map(float, self.base)
        object.__setattr__(self, "base", (A, B))
        brs = tuple(sorted(self.branches, key=lambda b: b.domain[0]))
        object.__setattr__(self, "branches", brs)
        hole = tuple(tuple(map(float, h)) for h in normalize_set(self.hole, A, B))
        object.__setattr__(self, "hole", hole)
        tol = DROP_RTOL * (B - A)
        for b1, b2 in zip(brs[:-1], brs[1:]):
            if b2.domain[0] < b1.domain[1] - tol:
                raise ValueError("branch domains overlap")
        for br in brs:
            if br.domain[0] < A - tol or br.domain[1] > B + tol:
                raise ValueError(f"branch domain {br.domain} outside base {self.base}")
            ilo, ihi = br.image
            if ilo < A - 1e-9 * (B - A) or ihi > B + 1e-9 * (B - A):
                raise ValueError(f"branch on {br.domain} maps outside the base interval")
        gaps = []
        edge = A
        for br in brs:
            if br.domain[0] > edge + tol:
                gaps.append((edge, br.domain[0]))
            edge = max(edge, br.domain[1])
        if edge < B - tol:
            gaps.append((edge, B))
        for g0, g1 in gaps:
            if not any(h0 <= g0 + tol and g1 <= h1 + tol for h0, h1 in hole):
                raise ValueError(f"uncovered region ({g0}, {g1}) is not inside the hole")
        if self.check_full and not any(e_full for e_full in self._element_full_flags()):
            raise AssumptionError(
                "no full branch contained in the survivor set (standing assumption fails)"
            )

    @property
    def span(self) -> float:
        return self.base[1] - self.base[0]

    def is_full_image(self, lo: float, hi: float) -> bool:
        A, B = self.base
        tol = FULL_RTOL * (B - A)
        return abs(lo - A) <= tol and abs(hi - B) <= tol

    @cached_property
    def survivor_set(self) -> list[tuple[float, float]]:
        """Components of ``X = I \\ H``."""
        A, B = self.base
        out = []
        edge = A
        for h0, h1 in self.hole:
            if h0 > edge:
                out.append((edge, h0))
            edge = max(edge, h1)
        if edge < B:
            out.append((edge, B))
        return out

    @cached_property
    def elements(self) -> tuple:
        """Level-one survivor elements in left-to-right order."""
        tol = DROP_RTOL * self.span
        out = []
        for k, br in enumerate(self.branches):
            lo, hi = br.domain
            for s0, s1 in self.survivor_set:
                a, b = max(lo, s0), min(hi, s1)
                if b - a > tol:
                    out.append(Element(a, b, k, br.increasing, snap_to_base(*br.image_of(a, b), self.base)))
        return tuple(out)

    def _element_full_flags(self):
        return [self.is_full_image(*e.image) for e in self.elements]

    @cached_property
    def full_flags(self) -> tuple:
        return tuple(self._element_full_flags())

    def forward(self, x, side="right"):
        """Apply the map pointwise (NaN where no branch is defined)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.full(x.shape, np.nan)
        for br in self.branches:
            lo, hi = br.domain
            m = (x >= lo) & (x <= hi) if side == "right" else (x > lo) & (x <= hi)
            if side == "right":
                m &= np.isnan(out)
            out[m] = br.forward(x[m])
        return out

    def in_hole(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        m = np.zeros(x.shape, dtype=bool)
        for h0, h1 in self.hole:
            m |= (x > h0) & (x < h1)
        return m

    def compose(self, f: PiecewiseFn, resolution: int = DEFAULT_RESOLUTION) -> PiecewiseFn:
        """The function ``f o T``, set to zero on the hole.

        Breakpoints are element endpoints plus preimages of the breakpoints of
        ``f``; affine ``f`` through affine branches stays affine.
        """
        A, B = self.base
        pts = [A, B]
        for e in self.elements:
            pts += [e.lo, e.hi]
            br = self.branches[e.branch]
            inside = f.bp[(f.bp > e.image[0]) & (f.bp < e.image[1])]
            if inside.size:
                pts += list(br.inverse(inside))
        bp = merge_breakpoints(pts, A, B)
        mids = 0.5 * (bp[:-1] + bp[1:])
        owner = np.full(mids.size, -1)
        for k, e in enumerate(self.elements):
            owner[(mids > e.lo) & (mids < e.hi)] = k
        pieces = []
        for i in range(mids.size):
            a, b = bp[i], bp[i + 1]
            if owner[i] < 0:
                pieces.append(Affine(0.0, 0.0))
                continue
            e = self.elements[owner[i]]
            br = self.branches[e.branch]
            ym = br.forward(np.array([mids[i]]))
            p = f.piece_index(ym, "right")[0]
            fam = br.family
            if f.kind[p] == 0 and (f.slope[p] == 0 or isinstance(fam, AffineFamily)):
                s, c = f.slope[p], f.intercept[p]
                pieces.append(Affine(s * fam.a, s * fam.b + c) if s else Affine(0.0, float(c)))
                continue
            x = np.linspace(a, b, piece_node_count(b - a, B - A, resolution))
            # the whole piece maps into piece p of f; clipping keeps rounding at the
            # ends from reading the neighbouring piece
            y = np.clip(br.forward(x), f.bp[p], f.bp[p + 1])
            pieces.append(Samples(tuple(f._eval_in(np.full(x.size, p), y))))
        return PiecewiseFn(bp, pieces)


# ---------------------------------------------------------------------------
# survivor partitions


@dataclass(frozen=True)
class SurvivorPartition:
    """Elements of the coarsest partition of the n-step survivor set."""

    word: tuple
    lo: np.ndarray
    hi: np.ndarray
    chains: np.ndarray  # shape (count, n): branch index per step
    full: np.ndarray
    images: np.ndarray  # shape (count, 2): composed forward image

    @property
    def intervals(self) -> list[tuple[float, float]]:
        return list(zip(self.lo.tolist(), self.hi.tolist()))

    @property
    def b_full(self) -> int:
        return int(np.sum(self.full))

    @property
    def xi(self) -> int:
        return longest_partial_run(self.full)

    @property
    def measure(self) -> float:
        return float(np.sum(self.hi - self.lo))

    def __len__(self) -> int:
        return int(self.lo.size)


def longest_partial_run(full) -> int:
    best = run = 0
    for f in full:
        run = 0 if f else run + 1
        best = max(best, run)
    return best


def push_forward_chain(maps: Sequence[OpenMap], word, chain, x):
    """Forward image of points ``x`` along a branch chain."""
    x = np.asarray(x, dtype=float)
    for sym, b in zip(word, chain):
        x = maps[sym].branches[b].forward(x)
    return x


def branch_image(maps: Sequence[OpenMap], word, chain, domain) -> tuple[float, float]:
    """Forward image of ``domain`` under the composed chain, tracking orientation."""
    lo, hi = domain
    for sym, b in zip(word, chain):
        lo, hi = snap_to_base(*maps[sym].branches[b].image_of(lo, hi), maps[sym].base)
    return lo, hi


def survivor_partition(maps: Sequence[OpenMap], word) -> SurvivorPartition:
    """Explicit n-step survivor partition by iterated pull-back.

    The cost grows like the number of elements, i.e. exponentially in the word
    length; :func:`partition_stats` returns ``b_f`` and ``xi`` without the
    enumeration.
    """
    word = tuple(int(s) for s in word)
    if not word:
        raise ValueError("word must be nonempty")
    last = maps[word[-1]]
    span = last.span
    tol = DROP_RTOL * span
    els = last.elements
    lo = np.array([e.lo for e in els])
    hi = np.array([e.hi for e in els])
    chains = np.array([[e.branch] for e in els], dtype=np.int64).reshape(len(els), 1)
    images = np.array([e.image for e in els]).reshape(len(els), 2)
    for k in range(len(word) - 2, -1, -1):
        m = maps[word[k]]
        tail = word[k + 1 :]
        nlo, nhi, nch, nim = [], [], [], []
        for e in m.elements:
            br = m.branches[e.branch]
            y0, y1 = e.image
            sel = np.nonzero((hi > y0) & (lo < y1))[0]
            if sel.size == 0:
                continue
            clo = np.maximum(lo[sel], y0)
            chi = np.minimum(hi[sel], y1)
            keep = chi - clo > 0
            sel, clo, chi = sel[keep], clo[keep], chi[keep]
            xa = br.inverse(clo)
            xb = br.inverse(chi)
            plo, phi = np.minimum(xa, xb), np.maximum(xa, xb)
            img = images[sel].copy()
            clipped = np.nonzero((clo > lo[sel]) | (chi < hi[sel]))[0]
            for c in clipped:
                img[c] = branch_image(maps, tail, chains[sel[c]], (clo[c], chi[c]))
            ch = np.concatenate((np.full((sel.size, 1), e.branch), chains[sel]), axis=1)
            order = slice(None) if e.increasing else slice(None, None, -1)
            nlo.append(plo[order]); nhi.append(phi[order])
            nch.append(ch[order]); nim.append(img[order])
        if not nlo:
            raise AssumptionError(f"empty survivor set for word {word}")
        lo = np.concatenate(nlo); hi = np.concatenate(nhi)
        chains = np.concatenate(nch); images = np.concatenate(nim)
        keep = hi - lo > tol
        lo, hi, chains, images = lo[keep], hi[keep], chains[keep], images[keep]
    A, B = last.base
    ftol = FULL_RTOL * (B - A)
    full = (np.abs(images[:, 0] - A) <= ftol) & (np.abs(images[:, 1] - B) <= ftol)
    return SurvivorPartition(word, lo, hi, chains, full, images)


# run-length summaries: (n_full, n_total, max_partial_run, left_run, right_run)
_EMPTY = (0, 0, 0, 0, 0)


def _concat(s, t):
    if s[1] == 0:
        return t
    if t[1] == 0:
        return s
    nf = s[0] + t[0]
    left = s[3] if s[0] else s[1] + t[3]
    right = t[4] if t[0] else t[1] + s[4]
    return (nf, s[1] + t[1], max(s[2], t[2], s[4] + t[3]), left, right)


def _reverse(s):
    return (s[0], s[1], s[2], s[4], s[3])


@dataclass(frozen=True)
class PartitionStats:
    b_full: int
    xi: int
    count: int


def partition_stats(maps: Sequence[OpenMap], word) -> PartitionStats:
    """``b_f``, ``xi`` and element count of the survivor partition of ``word``.

    Equivalent to :func:`survivor_partition` followed by counting, but the
    partition restricted to an image interval is summarized by a run-length
    record and memoized on (depth, interval), so repeated images (full
    branches in particular) are processed once.
    """
    word = tuple(int(s) for s in word)
    if not word:
        raise ValueError("word must be nonempty")
    n = len(word)
    A, B = maps[word[0]].base
    span = B - A
    tol = DROP_RTOL * span
    memo: dict = {}

    def summary(k: int, lo: float, hi: float):
        key = (k, round(lo / span, 13), round(hi / span, 13))
        hit = memo.get(key)
        if hit is not None:
            return hit
        m = maps[word[k]]
        acc = _EMPTY
        for e in m.elements:
            a, b = max(e.lo, lo), min(e.hi, hi)
            if b - a <= tol:
                continue
            br = m.branches[e.branch]
            ilo, ihi = e.image if (a == e.lo and b == e.hi) else snap_to_base(*br.image_of(a, b), m.base)
            if k == n - 1:
                s = (1, 1, 0, 0, 0) if m.is_full_image(ilo, ihi) else (0, 1, 1, 1, 1)
            else:
                s = summary(k + 1, ilo, ihi)
                if not e.increasing:
                    s = _reverse(s)
            acc = _concat(acc, s)
        memo[key] = acc
        return acc

    s = summary(0, A, B)
    if s[1] == 0:
        raise AssumptionError(f"empty survivor set for word {word}")
    return PartitionStats(int(s[0]), int(s[2]), int(s[1]))


def xi_growth_bound(maps: Sequence[OpenMap], word) -> int:
    """Upper bound ``n * prod (xi_1 + 2)`` for the run length of a word."""
    bound = len(word)
    for s in word:
        bound *= longest_partial_run(maps[s].full_flags) + 2
    return bound
