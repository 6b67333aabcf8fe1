"""Checks that a random potential is strongly contracting, and the cone-scale series."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .driver import RotationDriver, base_points
from .ensemble import RandomEnsemble
from .random_map import NumericalError, longest_partial_run, partition_stats, xi_growth_bound


def sample_points(E: RandomEnsemble, K: int, offset: int = 0) -> list[int]:
    """Base indices for m-averages: spread out for random drivers, a Birkhoff window for rotations."""
    stride = 1 if isinstance(E.driver, RotationDriver) else 4096
    return base_points(K, stride, offset)


def _mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


# ---------------------------------------------------------------------------
# n* search


@dataclass(frozen=True)
class NStarRow:
    n: int
    mean_log_c: float
    stderr: float


@dataclass(frozen=True)
class NStarResult:
    n_star: int | None
    estimate: float
    stderr: float
    gamma: float | None
    table: tuple


def choose_gamma(estimate: float) -> float:
    """``exp(estimate / 2)``, which sits strictly between ``exp(estimate)`` and 1."""
    if not estimate < 0:
        raise ValueError("gamma needs a negative estimate of the mean log c")
    g = math.exp(0.5 * estimate)
    lo = math.exp(estimate)
    return min(max(g, math.nextafter(lo, 1.0)), math.nextafter(1.0, 0.0))


def search_n_star(E: RandomEnsemble, n_max: int, K: int = 64, offset: int = 0) -> NStarResult:
    """Smallest block length ``n`` whose Monte-Carlo mean of ``log c_n`` is below zero by 2 stderr."""
    if n_max < 1 or K < 1:
        raise ValueError("n_max and K must be positive")
    pts = sample_points(E, K, offset)
    rows = []
    for n in range(1, n_max + 1):
        logs = [E.analyzer.ly_constants(E.word(k, n)).log_c for k in pts]
        m, se = _mean_se(logs)
        rows.append(NStarRow(n, m, se))
        if m + 2.0 * se < 0:
            return NStarResult(n, m, se, choose_gamma(m), tuple(rows))
    return NStarResult(None, math.nan, math.nan, None, tuple(rows))


# ---------------------------------------------------------------------------
# the cone-scale series


@dataclass(frozen=True)
class SeriesResult:
    value: float
    terms: int
    tail_bound: float
    heuristic: bool = True  # the tail bound extrapolates the observed decay


def a_series(c_back: Callable[[int], float], d_back: Callable[[int], float], gamma: float,
             tol: float = 1e-13, horizon: int = 100_000, stall: int = 64) -> SeriesResult:
    """``sum_{j>=0} gamma^{-j-1} d_{-j-1} prod_{k=1}^{j} c_{-k}``.

    ``c_back(k)`` and ``d_back(k)`` return the constants ``k`` blocks in the
    past. Summation stops once the extrapolated tail is below ``tol`` times
    the partial sum; ``stall`` consecutive non-decreasing terms raise.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    log_p = 0.0  # log of gamma^{-j} prod_{k<=j} c_{-k}
    total = 0.0
    dmax = 0.0
    prev = math.inf
    rising = 0
    for j in range(horizon):
        if j > 0:
            c = c_back(j)
            if c == 0.0:
                return SeriesResult(total, j, 0.0, False)
            log_p += math.log(c) - math.log(gamma)
        d = d_back(j + 1)
        dmax = max(dmax, d)
        term = math.exp(log_p) * d / gamma
        total += term
        if not math.isfinite(total):
            raise NumericalError("cone-scale series overflowed")
        rising = rising + 1 if term >= prev else 0
        if rising >= stall:
            raise NumericalError(f"cone-scale series did not decay over {stall} terms")
        prev = term
        if j >= 1:
            ratio = math.exp(log_p / j)
            if ratio < 1.0:
                tail = dmax / gamma * math.exp(log_p) * ratio / (1.0 - ratio)
                if tail <= tol * total:
                    return SeriesResult(total, j + 1, tail)
    raise NumericalError(f"cone-scale series not converged within {horizon} terms")


class ConeScale:
    """Cone apertures ``a`` on the blocked cocycle (blocks of ``n_star`` steps)."""

    def __init__(self, E: RandomEnsemble, n_star: int, gamma: float, tol: float = 1e-13):
        self.E = E
        self.n_star = n_star
        self.gamma = gamma
        self.tol = tol
        self._cd: dict = {}

    def constants(self, k: int) -> tuple[float, float]:
        """``(c, d)`` for the block starting at index ``k``."""
        hit = self._cd.get(k)
        if hit is None:
            ly = self.E.analyzer.ly_constants(self.E.word(k, self.n_star))
            hit = (ly.c, ly.d)
            self._cd[k] = hit
        return hit

    def a(self, k: int) -> SeriesResult:
        ns = self.n_star
        return a_series(lambda j: self.constants(k - j * ns)[0], lambda j: self.constants(k - j * ns)[1],
                        self.gamma, self.tol)

    def recursion_residual(self, k: int) -> float:
        """``|gamma a(k + n*) - (c_k a(k) + d_k)|``."""
        c, d = self.constants(k)
        return abs(self.gamma * self.a(k + self.n_star).value - (c * self.a(k).value + d))

    def temperedness(self, k: int, span: int = 64) -> list[tuple[int, float]]:
        """``(j, log(a(k + j n*)) / |j|)`` for ``0 < |j| <= span``."""
        out = []
        for j in range(-span, span + 1):
            if j:
                out.append((j, math.log(self.a(k + j * self.n_star).value) / abs(j)))
        return out


@dataclass(frozen=True)
class ContractionProfile:
    ratios: tuple  # Theta after / Theta before, one per block
    bounds: tuple  # tanh(Delta / 4) for the aperture of the next block
    geometric_mean: float


def contraction_profile(cs: ConeScale, k: int, blocks: int, rng: np.random.Generator) -> ContractionProfile:
    """Push two random cone functions through ``blocks`` consecutive blocks and record each contraction.

    Block ``j`` starts at ``k + j n*`` with aperture ``a(k + j n*)``; its
    image is measured in the cone of the next block.
    """
    from .cone import contraction_factor, diameter_bound, random_cone_function, theta
    from .transfer import apply_word

    E, ns = cs.E, cs.n_star
    a = cs.a(k).value
    f, h = random_cone_function(rng, a, E.base), random_cone_function(rng, a, E.base)
    ratios, bounds = [], []
    for j in range(blocks):
        start = k + j * ns
        a_next = cs.a(start + ns).value
        before = theta(f, h, a)
        f = apply_word(E.operators, E.word(start, ns), f)
        h = apply_word(E.operators, E.word(start, ns), h)
        # the projective metric ignores scale, so renormalize to keep magnitudes tame
        f, h = f.scale(1.0 / f.essinf()), h.scale(1.0 / h.essinf())
        after = theta(f, h, a_next)
        if not before > 0:
            break
        ratios.append(after / before)
        bounds.append(contraction_factor(diameter_bound(cs.gamma, a_next)))
        a = a_next
    pos = [r for r in ratios if r > 0]
    gm = math.exp(float(np.mean(np.log(pos)))) if pos else 0.0
    return ContractionProfile(tuple(ratios), tuple(bounds), gm)


def a_omega(E: RandomEnsemble, k: int, n_star: int, gamma: float, tol: float = 1e-13) -> float:
    return ConeScale(E, n_star, gamma, tol).a(k).value


# ---------------------------------------------------------------------------
# Kingman profiles and the sufficient conditions


@dataclass(frozen=True)
class KingmanRow:
    n: int
    beta_f: float
    beta_f_se: float
    minus_phi_minus: float
    minus_phi_minus_se: float
    max_xi: int


@dataclass(frozen=True)
class KingmanProfile:
    rows: tuple
    phi_plus: float
    phi_plus_se: float

    @property
    def beta_f(self) -> float:
        """Largest ``beta_{f,n}``; the sequence increases to its limit."""
        return max(r.beta_f for r in self.rows)

    @property
    def minus_phi_minus(self) -> float:
        """Smallest ``-phi^-_n``; the sequence decreases to its limit."""
        return min(r.minus_phi_minus for r in self.rows)


def kingman_profile(E: RandomEnsemble, n_max: int, K: int = 64, offset: int = 0) -> KingmanProfile:
    if n_max < 1:
        raise ValueError("n_max must be positive")
    pts = sample_points(E, K, offset)
    an = E.analyzer
    rows = []
    for n in range(1, n_max + 1):
        beta, mphi, xis = [], [], []
        for k in pts:
            w = E.word(k, n)
            st = partition_stats(E.maps, w)
            beta.append(math.log(st.b_full) / n if st.b_full > 0 else -math.inf)
            mphi.append(-an.log_inf_on_survivor(w) / n)
            xis.append(st.xi)
        rows.append(KingmanRow(n, *_mean_se(beta), *_mean_se(mphi), int(max(xis))))
    sup = [math.log(an.gstats(E.word(k, 1)[0])[0]) for k in pts]
    return KingmanProfile(tuple(rows), *_mean_se(sup))


@dataclass(frozen=True)
class Margin:
    value: float
    stderr: float

    @property
    def holds(self) -> bool:
        return self.value + 2.0 * self.stderr < 0


@dataclass(frozen=True)
class SufficientConditions:
    one_step: Margin  # item (1)
    branch_count: Margin  # item (2), first form
    branch_count_limit: float  # item (2), second form with phi^- and beta_f
    xi_bounded: Margin  # item (3)
    xi_K: float
    xi: float
    xi_source: str


def sufficient_conditions(E: RandomEnsemble, K: int = 64, n_max: int = 6, xi_bound: tuple | None = None,
                          offset: int = 0, profile: KingmanProfile | None = None) -> SufficientConditions:
    """Monte-Carlo estimates of the three closed-form sufficient conditions.

    Negative margins certify the potential. ``xi_bound = (K, xi)`` supplies
    the growth bound of item (3); without it the bound is taken as
    ``(1, 1)`` when no sampled word up to ``n_max`` has a partial run, and
    otherwise ``xi = max(xi^(1)) + 2`` from the general growth estimate.
    """
    pts = sample_points(E, K, offset)
    an = E.analyzer
    prof = profile or kingman_profile(E, n_max, K, offset)
    c1, c2, c3 = [], [], []
    for k in pts:
        s = E.word(k, 1)[0]
        sup, _, var = an.gstats(s)
        log_sup = math.log(sup)
        log_inf = an.log_inf_on_survivor((s,))
        st = partition_stats(E.maps, (s,))
        lb = math.log(st.b_full)
        c1.append(log_sup - log_inf + math.log(3.0) + math.log1p(var / sup) + math.log(1 + 2 * st.xi) - lb)
        c2.append(log_sup - log_inf + math.log(2 + st.xi) - lb)
        c3.append(log_sup - log_inf)
    if xi_bound is not None:
        kk, xi = map(float, xi_bound)
        source = "supplied"
    elif all(r.max_xi == 0 for r in prof.rows):
        kk, xi = 1.0, 1.0
        source = "observed: no partial runs up to n_max"
    else:
        kk = float(n_max)
        xi = float(max(longest_partial_run(m.full_flags) for m in E.maps) + 2)
        source = "growth bound n * prod(xi1 + 2)"
    m2 = _mean_se(c2)
    lim = prof.phi_plus + prof.minus_phi_minus + float(np.mean([math.log(2 + partition_stats(E.maps, E.word(k, 1)).xi)
                                                                for k in pts])) - prof.beta_f
    m3 = _mean_se(c3)
    return SufficientConditions(
        Margin(*_mean_se(c1)),
        Margin(*m2),
        lim,
        Margin(m3[0] + math.log(xi) - prof.beta_f, m3[1]),
        kk,
        xi,
        source,
    )


@dataclass(frozen=True)
class XiGrowthReport:
    checked: int
    violations: int
    worst_ratio: float


def xi_growth_check(E: RandomEnsemble, n_max: int = 8, K: int = 64, offset: int = 0) -> XiGrowthReport:
    """Compare ``xi^(n)`` with ``n * prod(xi^(1) + 2)`` on every sampled word."""
    checked = violations = 0
    worst = 0.0
    for k in sample_points(E, K, offset):
        for n in range(1, n_max + 1):
            w = E.word(k, n)
            xi = partition_stats(E.maps, w).xi
            bound = xi_growth_bound(E.maps, w)
            checked += 1
            violations += xi > bound
            worst = max(worst, xi / bound)
    return XiGrowthReport(checked, violations, worst)


# ---------------------------------------------------------------------------


@dataclass
class Certificate:
    n_star: int | None
    estimate: float
    stderr: float
    gamma: float | None
    search_table: tuple
    a_values: list = field(default_factory=list)  # (base index, a, terms, tail bound)
    conditions: SufficientConditions | None = None
    profile: KingmanProfile | None = None

    @property
    def strongly_contracting(self) -> bool:
        return self.n_star is not None


def certify(E: RandomEnsemble, n_max: int = 8, K: int = 64, a_points: int = 8, offset: int = 0,
            xi_bound: tuple | None = None, profile_n: int | None = None) -> Certificate:
    res = search_n_star(E, n_max, K, offset)
    prof = kingman_profile(E, profile_n or min(n_max, 8), K, offset)
    cert = Certificate(res.n_star, res.estimate, res.stderr, res.gamma, res.table,
                       conditions=sufficient_conditions(E, K, profile_n or min(n_max, 8), xi_bound, offset, prof),
                       profile=prof)
    if res.n_star is not None:
        cs = ConeScale(E, res.n_star, res.gamma)
        for k in sample_points(E, a_points, offset):
            s = cs.a(k)
            cert.a_values.append((k, s.value, s.terms, s.tail_bound))
    return cert
