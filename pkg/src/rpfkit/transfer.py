"""Weighted transfer operators, their word compositions and Lasota-Yorke constants."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import sparse

from .interval_fn import (
    DEFAULT_RESOLUTION,
    MERGE_RTOL,
    PiecewiseFn,
    merge_breakpoints,
    piece_node_count,
)
from .random_map import (
    AffineFamily,
    AssumptionError,
    OpenMap,
    branch_image,
    partition_stats,
    push_forward_chain,
    survivor_partition,
)

# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class ConstantPotential:
    """``log g`` equal to the same constant for every symbol."""

    value: float = 0.0


@dataclass(frozen=True)
class GeometricPotential:
    """``log g = -t log|T'|``."""

    t: float


@dataclass(frozen=True)
class PiecewiseAffineLogPotential:
    """``log g`` given as one :class:`PiecewiseFn` per symbol."""

    log_weights: tuple


Potential = ConstantPotential | GeometricPotential | PiecewiseAffineLogPotential


class SymbolWeight:
    """The weight ``g`` of one symbol, evaluated branch by branch."""

    def __init__(self, m: OpenMap, potential: Potential, symbol: int):
        self.map = m
        self.potential = potential
        self.symbol = symbol
        self.constant = None
        if isinstance(potential, ConstantPotential):
            self.constant = float(np.exp(potential.value))
        elif isinstance(potential, PiecewiseAffineLogPotential):
            lw = potential.log_weights[symbol]
            if lw.is_affine() and not np.any(lw.slope) and np.ptp(lw.intercept) == 0:
                self.constant = float(np.exp(lw.intercept[0]))

    def branch_constant(self, branch: int) -> float | None:
        """The value of ``g`` when it is constant along ``branch``, else None."""
        if self.constant is not None:
            return self.constant
        if isinstance(self.potential, GeometricPotential):
            fam = self.map.branches[branch].family
            if isinstance(fam, AffineFamily):
                return float(abs(fam.a) ** (-self.potential.t))
        return None

    def at(self, branch: int, x, side=True) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.constant is not None:
            return np.full(x.shape, self.constant)
        if isinstance(self.potential, GeometricPotential):
            d = np.abs(self.map.branches[branch].derivative(x))
            with np.errstate(divide="ignore", over="ignore"):
                return np.where(np.isinf(d), 0.0, d ** (-self.potential.t))
        lw = self.potential.log_weights[self.symbol]
        return np.exp(lw.evaluate(x, side))

    def inf_on(self, branch: int, lo: float, hi: float) -> float:
        """Infimum of ``g`` over ``[lo, hi]`` inside one branch."""
        if self.constant is not None:
            return self.constant
        if isinstance(self.potential, GeometricPotential):
            # |T'| is monotone on each branch of every supported family
            return float(np.min(self.at(branch, np.array([lo, hi]))))
        lw = self.potential.log_weights[self.symbol]
        return float(np.exp(lw.essinf_on([(lo, hi)])))

    def function(self, resolution: int = DEFAULT_RESOLUTION) -> PiecewiseFn:
        """``g`` as a function on the base; regions without a branch copy the neighbouring value."""
        A, B = self.map.base
        if self.constant is not None:
            return PiecewiseFn.constant(self.constant, (A, B))
        if isinstance(self.potential, PiecewiseAffineLogPotential):
            return self.potential.log_weights[self.symbol].map_values(np.exp)
        from .interval_fn import Affine, Samples

        pts = [A, B] + [p for br in self.map.branches for p in br.domain]
        bp = merge_breakpoints(pts, A, B)
        pieces = []
        last = None
        for a, b in zip(bp[:-1], bp[1:]):
            mid = 0.5 * (a + b)
            k = next(
                (i for i, br in enumerate(self.map.branches) if br.domain[0] <= mid <= br.domain[1]),
                None,
            )
            if k is None:
                pieces.append(None)
                continue
            br = self.map.branches[k]
            if isinstance(br.family, AffineFamily):
                v = float(self.at(k, np.array([mid]))[0])
                pieces.append(Affine(0.0, v))
                last = v
            else:
                x = np.linspace(a, b, piece_node_count(b - a, B - A, resolution))
                vals = self.at(k, x)
                pieces.append(Samples(tuple(vals)))
                last = float(vals[-1])
        # fill gaps with the value on the left (or right, at the left edge)
        for i, pc in enumerate(pieces):
            if pc is None:
                v = last
                j = i - 1
                while j >= 0 and pieces[j] is None:
                    j -= 1
                if j >= 0:
                    pj = pieces[j]
                    v = pj.intercept if isinstance(pj, Affine) else pj.values[-1]
                else:
                    j = next(jj for jj in range(i, len(pieces)) if pieces[jj] is not None)
                    pj = pieces[j]
                    v = pj.intercept if isinstance(pj, Affine) else pj.values[0]
                pieces[i] = Affine(0.0, float(v))
        return PiecewiseFn(bp, pieces)


# ---------------------------------------------------------------------------
# the operator of one symbol


_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(4)


def _jump_cells(y: np.ndarray, jumps: np.ndarray):
    """Quadrature that replaces point samples by cell averages next to jumps.

    A node whose cell ``[y_j - h/2, y_j + h/2]`` contains a jump gets the
    average over its cell, split at the jumps, so linear interpolation of the
    samples keeps the mass on both sides of the jump. End nodes keep their
    one-sided point values. Returns ``(points, node index, weight)``.
    """
    m = y.size
    if not jumps.size or m < 3:
        return np.zeros(0), np.zeros(0, dtype=np.int64), np.zeros(0)
    h = y[1] - y[0]
    jumps = np.sort(jumps)
    j = np.clip(np.rint((jumps - y[0]) / h).astype(np.int64), 1, m - 2)
    pts, tgt, wts = [], [], []
    for node in np.unique(j):
        lo, hi = y[node] - 0.5 * h, y[node] + 0.5 * h
        cuts = np.concatenate(([lo], jumps[(jumps > lo) & (jumps < hi)], [hi]))
        for a, b in zip(cuts[:-1], cuts[1:]):
            if b <= a:
                continue
            pts.append(0.5 * (a + b) + 0.5 * (b - a) * _GAUSS_X)
            wts.append(0.5 * (b - a) / h * _GAUSS_W)
            tgt.append(np.full(_GAUSS_X.size, node))
    return np.concatenate(pts), np.concatenate(tgt), np.concatenate(wts)


class _Plan:
    __slots__ = ("bp", "kind", "counts", "offsets", "nvals", "affine_terms", "tgt", "x",
                 "g", "p", "i0", "i1", "w0", "w1", "aff", "matrix")


class TransferOperator:
    """``L f = sum_Z 1_{T(Z)} (f g) o T_Z^{-1}`` over level-one survivor elements.

    Output breakpoints are the images of the element endpoints. With
    ``track_budget > 0`` the images of the breakpoints of ``f`` are added as
    well, as long as the total stays within the budget; this keeps jumps of
    ``f`` exact for Markov-like maps instead of smearing them over one cell.
    """

    def __init__(self, m: OpenMap, weight: SymbolWeight, resolution: int = DEFAULT_RESOLUTION,
                 track_budget: int = 64):
        self.map = m
        self.weight = weight
        self.resolution = int(resolution)
        self.track_budget = int(track_budget)
        A, B = m.base
        self.base = (A, B)
        self.elements = m.elements
        pts = [A, B] + [y for e in self.elements for y in e.image]
        self.std_bp = merge_breakpoints(pts, A, B)
        self._plans: dict = {}

    # -- plan construction ------------------------------------------------

    def _output_bp(self, f: PiecewiseFn) -> np.ndarray:
        if self.track_budget <= 0:
            return self.std_bp
        A, B = self.base
        tol = MERGE_RTOL * (B - A)
        extra = []
        for e in self.elements:
            inner = f.bp[(f.bp > e.lo + tol) & (f.bp < e.hi - tol)]
            if inner.size:
                extra.append(self.map.branches[e.branch].forward(inner))
        if not extra:
            return self.std_bp
        bp = merge_breakpoints(np.concatenate([self.std_bp] + extra), A, B)
        return bp if bp.size - 1 <= self.track_budget else self.std_bp

    def _plan(self, f: PiecewiseFn, force_samples: bool = False) -> _Plan:
        key = (f.layout_key, force_samples)
        plan = self._plans.get(key)
        if plan is not None:
            return plan
        A, B = self.base
        span = B - A
        tol = MERGE_RTOL * span
        bp = self.std_bp if force_samples else self._output_bp(f)
        P = bp.size - 1
        kind = np.zeros(P, dtype=np.int8)
        counts = np.zeros(P, dtype=np.int64)
        offsets = np.full(P, -1, dtype=np.int64)
        affine_terms = [[] for _ in range(P)]
        chunks = {k: [] for k in ("tgt", "y", "probe", "side", "branch", "w")}
        inner_bp = f.bp[1:-1]
        pos = 0
        # preimages of every output breakpoint, one inverse call per element
        lo_img = np.array([e.image[0] for e in self.elements])
        hi_img = np.array([e.image[1] for e in self.elements])
        pre = [self.map.branches[e.branch].inverse(bp) for e in self.elements]
        for k in range(P):
            p0, p1 = bp[k], bp[k + 1]
            hits = np.flatnonzero((lo_img <= p0 + tol) & (p1 <= hi_img + tol))
            all_affine = not force_samples
            subs = []
            for i in hits:
                e = self.elements[i]
                br = self.map.branches[e.branch]
                x0, x1 = sorted((float(pre[i][k]), float(pre[i][k + 1])))
                subs.append((e, br, x0, x1))
                if all_affine:
                    if self.weight.branch_constant(e.branch) is None or not isinstance(br.family, AffineFamily):
                        all_affine = False
                        continue
                    xm = 0.5 * (x0 + x1)
                    pi = int(f.piece_index(np.array([xm]), "right")[0])
                    if f.kind[pi] != 0 or f.bp[pi] > x0 + tol or f.bp[pi + 1] < x1 - tol:
                        all_affine = False
            if all_affine:
                for e, br, x0, x1 in subs:
                    xm = 0.5 * (x0 + x1)
                    pi = int(f.piece_index(np.array([xm]), "right")[0])
                    affine_terms[k].append((br.family.a, br.family.b, pi, self.weight.branch_constant(e.branch)))
                continue
            kind[k] = 1
            mcount = piece_node_count(p1 - p0, span, self.resolution)
            counts[k] = mcount
            offsets[k] = pos
            y = np.linspace(p0, p1, mcount)
            # images of the jumps of f that land strictly inside this output piece
            jumps = []
            for e, br, x0, x1 in subs:
                lo, hi = min(x0, x1), max(x0, x1)
                inside = inner_bp[(inner_bp > lo + tol) & (inner_bp < hi - tol)]
                if inside.size:
                    jumps.append(br.forward(inside))
            qy, qt, qw = _jump_cells(y, np.concatenate(jumps) if jumps else np.zeros(0))
            plain = np.ones(mcount, dtype=bool)
            plain[qt] = False
            nodes = np.flatnonzero(plain)
            # end nodes sit on images of breakpoints, where the inverse can round to
            # the wrong side: the input piece is located from a point nudged inward
            inset = 1e-3 * (p1 - p0) / (mcount - 1)
            y_probe = np.clip(y[nodes], p0 + inset, p1 - inset)
            ns = len(subs)
            inc = np.array([e.increasing for e, *_ in subs])
            tn = np.concatenate([pos + nodes, pos + qt])
            # the right end node takes the limit from the other side
            last = np.concatenate([nodes == mcount - 1, np.zeros(qt.size, dtype=bool)])
            chunks["tgt"].append(np.tile(tn, ns))
            chunks["y"].append(np.tile(np.concatenate([y[nodes], qy]), ns))
            chunks["probe"].append(np.tile(np.concatenate([y_probe, qy]), ns))
            chunks["side"].append(np.repeat(inc, tn.size) ^ np.tile(last, ns))
            chunks["branch"].append(np.repeat([e.branch for e, *_ in subs], tn.size))
            chunks["w"].append(np.tile(np.concatenate([np.ones(nodes.size), qw]), ns))
            pos += mcount
        plan = _Plan()
        plan.bp, plan.kind, plan.counts, plan.offsets, plan.nvals = bp, kind, counts, offsets, pos
        plan.affine_terms = affine_terms
        if chunks["tgt"]:
            tgt = np.concatenate(chunks["tgt"]).astype(np.int64)
            yv = np.concatenate(chunks["y"])
            yp = np.concatenate(chunks["probe"])
            side = np.concatenate(chunks["side"])
            branch = np.concatenate(chunks["branch"]).astype(np.int64)
            g = np.concatenate(chunks["w"])
        else:
            tgt = branch = np.zeros(0, dtype=np.int64); yv = yp = g = np.zeros(0); side = np.zeros(0, bool)
        # one inverse call per branch: the Newton-based inverses are costly per call
        x, probe = np.empty(yv.size), np.empty(yv.size)
        for b in np.unique(branch):
            sel = branch == b
            br = self.map.branches[b]
            x[sel] = br.inverse(yv[sel])
            probe[sel] = br.inverse(yp[sel])
            g[sel] *= self.weight.at(int(b), x[sel], side[sel])
        p = f.piece_index(probe, side)
        x = np.clip(x, f.bp[p], f.bp[p + 1])
        aff = f.kind[p] == 0
        i0 = np.zeros(x.size, dtype=np.int64)
        w1 = np.zeros(x.size)
        s = ~aff
        if np.any(s):
            ps = p[s]
            a, b = f.bp[ps], f.bp[ps + 1]
            mm = f.count[ps]
            u = (x[s] - a) / (b - a) * (mm - 1)
            j = np.clip(np.floor(u).astype(np.int64), 0, mm - 2)
            i0[s] = f.offset[ps] + j
            w1[s] = np.clip(u - j, 0.0, 1.0)
        plan.tgt, plan.x, plan.g, plan.p, plan.aff = tgt, x, g, p, aff
        plan.i0 = i0
        plan.i1 = np.where(aff, i0, i0 + 1)
        plan.w1 = np.where(aff, 0.0, w1)
        plan.w0 = np.where(aff, 0.0, 1.0 - w1)
        plan.matrix = None
        if len(self._plans) > 256:
            self._plans.clear()
        self._plans[key] = plan
        return plan

    # -- application ----------------------------------------------------------

    def _assemble(self, plan: _Plan, f: PiecewiseFn, values: np.ndarray) -> PiecewiseFn:
        P = plan.kind.size
        slope = np.zeros(P)
        intercept = np.zeros(P)
        for k, terms in enumerate(plan.affine_terms):
            for a, b, pi, gc in terms:
                s, c = f.slope[pi], f.intercept[pi]
                slope[k] += gc * s / a
                intercept[k] += gc * (c - s * b / a)
        return PiecewiseFn._raw(plan.bp, plan.kind, slope, intercept, plan.offsets, plan.counts, values)

    def apply(self, f: PiecewiseFn) -> PiecewiseFn:
        if f.base != self.base:
            raise ValueError("function and map have different base intervals")
        plan = self._plan(f)
        if plan.tgt.size:
            vals = f.values
            if vals.size:
                fv = vals[plan.i0] * plan.w0 + vals[plan.i1] * plan.w1
            else:
                fv = np.zeros(plan.x.size)
            fa = f.slope[plan.p] * plan.x + f.intercept[plan.p]
            fv = np.where(plan.aff, fa, fv)
            out = np.bincount(plan.tgt, weights=plan.g * fv, minlength=plan.nvals)
        else:
            out = np.zeros(plan.nvals)
        return self._assemble(plan, f, out)

    def sampled_layout(self) -> PiecewiseFn:
        """A zero function carrying the all-sampled output layout of this operator."""
        plan = self._plan(PiecewiseFn.constant(0.0, self.base), force_samples=True)
        return PiecewiseFn._raw(plan.bp, plan.kind, np.zeros(plan.kind.size), np.zeros(plan.kind.size),
                                plan.offsets, plan.counts, np.zeros(plan.nvals))

    def matrix(self, layout: PiecewiseFn) -> sparse.csr_matrix:
        """Sparse matrix acting on the sample values of functions with an all-sampled ``layout``.

        The output layout is :meth:`sampled_layout`.
        """
        if np.any(layout.kind == 0):
            raise ValueError("matrix form needs an all-sampled input layout")
        plan = self._plan(layout, force_samples=True)
        if plan.matrix is None:
            rows = np.concatenate((plan.tgt, plan.tgt))
            cols = np.concatenate((plan.i0, plan.i1))
            data = np.concatenate((plan.g * plan.w0, plan.g * plan.w1))
            plan.matrix = sparse.csr_matrix(
                (data, (rows, cols)), shape=(plan.nvals, layout.values.size)
            )
        return plan.matrix


# ---------------------------------------------------------------------------
# word-level quantities


def apply_word(ops: Sequence[TransferOperator], word, f: PiecewiseFn) -> PiecewiseFn:
    """``L^{(n)} f``: left fold of single-symbol applications along ``word``."""
    if len(word) == 0:
        raise ValueError("word must be nonempty")
    for s in word:
        f = ops[s].apply(f)
    return f


def apply_word_chains(maps: Sequence[OpenMap], weights: Sequence[SymbolWeight], word,
                      f: PiecewiseFn, y) -> np.ndarray:
    """Pointwise ``L^{(n)} f (y)`` as a direct sum over survivor-partition chains.

    Cross-check only: the cost is proportional to the number of n-step
    survivor elements.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    part = survivor_partition(maps, word)
    out = np.zeros(y.size)
    for lo, hi, chain, img in zip(part.lo, part.hi, part.chains, part.images):
        inside = (y > img[0]) & (y < img[1])
        if not np.any(inside):
            continue
        z = y[inside]
        pts = [z]
        for sym, b in zip(reversed(word), reversed(chain)):
            z = maps[sym].branches[b].inverse(z)
            pts.append(z)
        x = pts[-1]
        w = np.ones(x.size)
        xs = x
        for sym, b in zip(word, chain):
            w *= weights[sym].at(b, xs)
            xs = maps[sym].branches[b].forward(xs)
        out[inside] += w * f.evaluate(x, "right")
    return out


def _sparse_table(a: np.ndarray) -> list[np.ndarray]:
    table = [a]
    j = 1
    while 2 * j <= a.size:
        prev = table[-1]
        table.append(np.minimum(prev[:-j], prev[j:]))
        j *= 2
    return table


def _range_min(table, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    length = hi - lo + 1
    k = np.floor(np.log2(length)).astype(np.int64)
    out = np.empty(lo.size)
    for lev in np.unique(k):
        m = k == lev
        t = table[lev]
        out[m] = np.minimum(t[lo[m]], t[hi[m] - (1 << lev) + 1])
    return out


class _CellData:
    """Per-symbol cell/element overlaps for the survivor-infimum recursion."""

    def __init__(self, m: OpenMap, w: SymbolWeight, ncells: int):
        A, B = m.base
        h = (B - A) / ncells
        cell, loginf, lo_idx, hi_idx = [], [], [], []
        for e in m.elements:
            br = m.branches[e.branch]
            c0 = int(np.clip(np.floor((e.lo - A) / h), 0, ncells - 1))
            c1 = int(np.clip(np.ceil((e.hi - A) / h) - 1, c0, ncells - 1))
            cs = np.arange(c0, c1 + 1)
            a = np.maximum(A + cs * h, e.lo)
            b = np.minimum(A + (cs + 1) * h, e.hi)
            ok = b > a
            cs, a, b = cs[ok], a[ok], b[ok]
            ya, yb = br.forward(a), br.forward(b)
            ylo, yhi = np.minimum(ya, yb), np.maximum(ya, yb)
            lo_i = np.clip(np.floor((ylo - A) / h + 1e-9).astype(np.int64), 0, ncells - 1)
            hi_i = np.clip(np.ceil((yhi - A) / h - 1e-9).astype(np.int64) - 1, 0, ncells - 1)
            hi_i = np.maximum(hi_i, lo_i)
            if w.constant is not None:
                gi = np.full(cs.size, w.constant)
            elif isinstance(w.potential, GeometricPotential):
                gi = np.minimum(w.at(e.branch, a), w.at(e.branch, b))
            else:
                gi = np.array([w.inf_on(e.branch, aa, bb) for aa, bb in zip(a, b)])
            with np.errstate(divide="ignore"):
                loginf.append(np.log(gi))
            cell.append(cs); lo_idx.append(lo_i); hi_idx.append(hi_i)
        self.ncells = ncells
        self.cell = np.concatenate(cell)
        self.loginf = np.concatenate(loginf)
        self.lo = np.concatenate(lo_idx)
        self.hi = np.concatenate(hi_idx)


@dataclass(frozen=True)
class WeightBounds:
    log_sup_prod: float
    log_inf_on_survivor: float
    s_tilde: float

    @property
    def sup_prod(self) -> float:
        return float(np.exp(self.log_sup_prod))

    @property
    def inf_on_survivor(self) -> float:
        return float(np.exp(self.log_inf_on_survivor))


@dataclass(frozen=True)
class LyConstants:
    n: int
    word: tuple
    s_tilde: float
    log_sup_prod: float
    log_inf_on_survivor: float
    b_full: int
    xi: int
    c: float
    d: float

    @property
    def sup_prod(self) -> float:
        return float(np.exp(self.log_sup_prod))

    @property
    def inf_on_survivor(self) -> float:
        return float(np.exp(self.log_inf_on_survivor))

    @property
    def log_c(self) -> float:
        return float(np.log(self.c))


class WordAnalyzer:
    """Caches per-symbol data used by :func:`weight_bounds` and :func:`ly_constants`."""

    def __init__(self, maps: Sequence[OpenMap], weights: Sequence[SymbolWeight],
                 ncells: int = DEFAULT_RESOLUTION, resolution: int = DEFAULT_RESOLUTION):
        self.maps = list(maps)
        self.weights = list(weights)
        self.ncells = ncells
        self.resolution = resolution
        self._cells: dict = {}
        self._gstats: dict = {}
        self._ly: dict = {}

    def cells(self, s: int) -> _CellData:
        if s not in self._cells:
            self._cells[s] = _CellData(self.maps[s], self.weights[s], self.ncells)
        return self._cells[s]

    def gstats(self, s: int) -> tuple[float, float, float]:
        """(esssup g, essinf g, var g) over the base interval."""
        if s not in self._gstats:
            g = self.weights[s].function(self.resolution)
            st = (g.esssup(), g.essinf(), g.variation())
            # finitely many maps make the integrability conditions automatic once these are finite
            if not all(np.isfinite(st)):
                raise AssumptionError(f"weight of symbol {s} is unbounded or of infinite variation")
            self._gstats[s] = st
        return self._gstats[s]

    def log_inf_on_survivor(self, word) -> float:
        """Log of the essential infimum of the weight cocycle over the survivor set.

        Backward recursion over a uniform cell grid: each cell gets the
        infimum of the weight on its surviving part times the minimum of the
        next level over the image, which bounds the true infimum from below
        and is exact for weights constant on each symbol.
        """
        word = tuple(word)
        nxt = np.zeros(self.ncells)
        for s in reversed(word):
            cd = self.cells(s)
            table = _sparse_table(nxt)
            cand = cd.loginf + _range_min(table, cd.lo, cd.hi)
            cur = np.full(self.ncells, np.inf)
            np.minimum.at(cur, cd.cell, cand)
            nxt = cur
        val = float(np.min(nxt))
        if not np.isfinite(val) and val > 0:
            raise AssumptionError(f"empty survivor set for word {word}")
        return val

    def weight_bounds(self, word) -> WeightBounds:
        word = tuple(word)
        log_sup = 0.0
        s_tilde = 0.0
        for s in word:
            sup, _, var = self.gstats(s)
            log_sup += float(np.log(sup))
            s_tilde += var / sup
        return WeightBounds(log_sup, self.log_inf_on_survivor(word), s_tilde)

    def ly_constants(self, word) -> LyConstants:
        word = tuple(word)
        hit = self._ly.get(word)
        if hit is not None:
            return hit
        st = partition_stats(self.maps, word)
        if st.b_full == 0:
            raise AssumptionError(f"no full branch for word {word}: Lasota-Yorke constants undefined")
        wb = self.weight_bounds(word)
        d = 3.0 * (1.0 + wb.s_tilde) * (1.0 + 2.0 * st.xi) * np.exp(wb.log_sup_prod - wb.log_inf_on_survivor)
        out = LyConstants(len(word), word, wb.s_tilde, wb.log_sup_prod, wb.log_inf_on_survivor,
                          st.b_full, st.xi, float(d / st.b_full), float(d))
        if len(self._ly) > 100_000:
            self._ly.clear()
        self._ly[word] = out
        return out
