"""Equivariant densities, conformal functionals, multipliers and what is built from them.

Fibers are addressed by driver indices ``k``; with ``block > 1`` a fiber is a
block of ``block`` consecutive symbols and fiber ``k`` starts at driver index
``k * block``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .certify import sample_points
from .ensemble import RandomEnsemble
from .interval_fn import PiecewiseFn, combine, pointwise_mul
from .random_map import AssumptionError, NumericalError


def fit_rate(ns, values) -> tuple[float, float, float]:
    """Log-linear fit ``|v_n| ~ C r^n``: returns ``(r, C, correlation of n with log|v_n|)``."""
    ns = np.asarray(ns, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    ok = v > 0
    if ok.sum() < 2:
        return math.nan, math.nan, math.nan
    x, y = ns[ok], np.log(v[ok])
    slope, icpt = np.polyfit(x, y, 1)
    corr = float(np.corrcoef(x, y)[0, 1]) if np.ptp(y) > 0 else math.nan
    return float(math.exp(slope)), float(math.exp(icpt)), corr


@dataclass(frozen=True)
class DensityResult:
    q: PiecewiseFn  # essinf-normalized
    lam_minus: tuple  # essinf(L q_m) for each depth m tried
    increments: tuple  # sup-norm change of q between consecutive depths
    n_used: int
    converged: bool


@dataclass(frozen=True)
class NuResult:
    value: float
    width: float  # change of the ratio between depths n-1 and n
    shift: float  # constant added to make the integrand a cone element


@dataclass
class RpfFiberData:
    base_index: int
    n: int
    q: PiecewiseFn
    lam_minus: tuple
    lam_plus: tuple
    increments: tuple
    cdf_grid: np.ndarray
    cdf: np.ndarray
    converged: bool
    extras: dict = field(default_factory=dict)

    def nu_interval(self, lo: float, hi: float) -> float:
        """``nu([lo, hi])`` by linear interpolation in the CDF table."""
        return float(np.interp(hi, self.cdf_grid, self.cdf) - np.interp(lo, self.cdf_grid, self.cdf))


class RpfSolver:
    """Finite-depth estimators of the random Ruelle-Perron-Frobenius objects."""

    def __init__(self, E: RandomEnsemble, block: int = 1, nu_depth: int = 30, tol: float = 1e-9):
        if block < 1:
            raise ValueError("block length must be positive")
        self.E = E
        self.block = int(block)
        self.nu_depth = int(nu_depth)
        self.tol = float(tol)

    # -- stepping -------------------------------------------------------------

    def step(self, k: int, f: PiecewiseFn) -> PiecewiseFn:
        """The (blocked) operator of fiber ``k`` applied to ``f``."""
        for s in self.E.word(k * self.block, self.block):
            f = self.E.operator(s).apply(f)
        return f

    def push(self, k: int, n: int, f: PiecewiseFn) -> tuple[PiecewiseFn, float]:
        """``L^{(n)}_k f`` rescaled to essinf 1, and the log of the discarded factor."""
        log_scale = 0.0
        for j in range(n):
            f = self.step(k + j, f)
            m = f.essinf()
            if not m > 0:
                raise AssumptionError(
                    f"essential infimum vanished after {j + 1} steps from fiber {k}: "
                    "the full-branch assumption fails or the hole swallows the survivor set"
                )
            log_scale += math.log(m)
            f = f.scale(1.0 / m)
        return f, log_scale

    def push_pair(self, k: int, n: int, f: PiecewiseFn, ref: PiecewiseFn | None = None):
        """Push ``f`` and ``ref`` (default 1) together, normalizing both by essinf of the pushed ``ref``.

        Returns ``(F, R, log_scale, ratios)`` with ``ratios[j] = essinf F_j / essinf R_j``.
        """
        R = ref if ref is not None else self.E.one()
        F = f
        log_scale = 0.0
        ratios = []
        for j in range(n):
            F = self.step(k + j, F)
            R = self.step(k + j, R)
            m = R.essinf()
            if not m > 0:
                raise AssumptionError(f"essential infimum vanished after {j + 1} steps from fiber {k}")
            log_scale += math.log(m)
            F = F.scale(1.0 / m)
            R = R.scale(1.0 / m)
            ratios.append(F.essinf())
        return F, R, log_scale, ratios

    # -- densities --------------------------------------------------------------

    def density_at_depth(self, k: int, n: int, f0: PiecewiseFn | None = None) -> PiecewiseFn:
        f = f0 if f0 is not None else self.E.one()
        q, _ = self.push(k - n, n, f)
        return q

    def density(self, k: int, n: int, f0: PiecewiseFn | None = None, tol: float | None = None,
                n_min: int = 2) -> DensityResult:
        """Backward limit ``q_k`` with depth ``<= n``, stopping once the sup-norm increment is below ``tol``."""
        tol = self.tol if tol is None else tol
        if n < 1:
            raise ValueError("depth must be positive")
        lam, incs = [], []
        prev = None
        q = None
        converged = False
        used = 0
        for m in range(1, n + 1):
            q = self.density_at_depth(k, m, f0)
            lam.append(self.step(k, q).essinf())
            used = m
            if prev is not None:
                incs.append(combine(1.0, q, -1.0, prev).sup_norm())
                if m >= n_min and incs[-1] < tol:
                    converged = True
                    break
            prev = q
        return DensityResult(q, tuple(lam), tuple(incs), used, converged)

    def density_orbit(self, k: int, count: int, n: int) -> tuple[list, list]:
        """``q`` at fibers ``k .. k+count`` (depth ``n`` at ``k``, pushed forward after) and ``lam^-`` at ``k .. k+count-1``.

        Pushing forward keeps ``L_j q_j = lam^-_j q_{j+1}`` exact to rounding.
        """
        q = self.density_at_depth(k, n)
        qs, lams = [q], []
        for j in range(count):
            Lq = self.step(k + j, q)
            lam = Lq.essinf()
            q = Lq.scale(1.0 / lam)
            qs.append(q)
            lams.append(lam)
        return qs, lams

    # -- conformal functionals ----------------------------------------------------

    @staticmethod
    def cone_shift(f: PiecewiseFn) -> float:
        """Smallest ``c >= 0`` with ``f + c`` in ``C_1`` (2 for an indicator)."""
        return max(0.0, f.variation() - f.essinf())

    def nu(self, k: int, f: PiecewiseFn, n: int | None = None) -> NuResult:
        """``nu_k(f)`` as ``Einf(L^{(n)}(f + c)) / Einf(L^{(n)} 1) - c``."""
        n = self.nu_depth if n is None else n
        c = self.cone_shift(f)
        if c == 0.0 and f.esssup() == 0.0 and f.essinf() == 0.0:
            return NuResult(0.0, 0.0, 0.0)
        g = f.shift(c) if c else f
        _, _, _, ratios = self.push_pair(k, n, g)
        width = abs(ratios[-1] - ratios[-2]) if len(ratios) > 1 else math.nan
        return NuResult(ratios[-1] - c, width, c)

    def nu_interval(self, k: int, lo: float, hi: float, n: int | None = None) -> NuResult:
        return self.nu(k, PiecewiseFn.indicator(lo, hi, self.E.base), n)

    def cdf_table(self, k: int, cells: int = 1024, n: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """``nu_k([A, x_i])`` on a uniform grid of ``cells + 1`` points.

        All indicators are pushed at once through the sparse matrix form of the
        operators on the all-sampled layouts; the jump of each indicator sits
        on a node with the midpoint value there.
        """
        n = self.nu_depth if n is None else n
        A, B = self.E.base
        grid = np.linspace(A, B, cells + 1)
        start = PiecewiseFn.from_callable(np.zeros_like, (A, B), self.E.resolution)
        x = start.nodes()
        V = np.empty((x.size, cells + 2))
        for i, xi in enumerate(grid):
            col = np.where(x < xi, 1.0, 0.0)
            col[np.isclose(x, xi, rtol=0, atol=1e-12 * (B - A))] = 0.5
            if i == cells:
                col[:] = 1.0  # the indicator of the whole base has no jump at B
            V[:, i] = col + 2.0
        V[:, -1] = 1.0
        lay = start
        for j in range(n):
            for s in self.E.word((k + j) * self.block, self.block):
                op = self.E.operator(s)
                M = op.matrix(lay)
                V = M @ V
                lay = op.sampled_layout()
            V /= V[:, -1].min()
        ratios = V[:, :-1].min(axis=0) / V[:, -1].min()
        cdf = ratios - 2.0
        cdf[0] = 0.0
        return grid, cdf

    # -- multipliers ----------------------------------------------------------

    def lambda_plus(self, k: int, n: int | None = None, steps: int = 1) -> float:
        """``Einf(L^{(n+steps)}_k 1) / Einf(L^{(n)}_{k+steps} 1)``."""
        n = self.nu_depth if n is None else n
        _, a = self.push(k, n + steps, self.E.one())
        _, b = self.push(k + steps, n, self.E.one())
        return math.exp(a - b)

    def lambda_minus(self, k: int, n: int) -> float:
        return self.step(k, self.density_at_depth(k, n)).essinf()

    def multipliers(self, k: int, n: int) -> tuple[float, float]:
        return self.lambda_minus(k, n), self.lambda_plus(k, n)

    # -- fiber bundle ---------------------------------------------------------------

    def fiber(self, k: int, n: int, cells: int = 1024, with_cdf: bool = True) -> RpfFiberData:
        d = self.density(k, n)
        lam_plus = tuple(self.lambda_plus(k, m) for m in range(1, min(n, 8) + 1)) + (self.lambda_plus(k, n),)
        if with_cdf:
            grid, cdf = self.cdf_table(k, cells, n)
        else:
            grid, cdf = np.zeros(0), np.zeros(0)
        return RpfFiberData(k, d.n_used, d.q, d.lam_minus, lam_plus, d.increments, grid, cdf, d.converged)

    # -- invariant measures ---------------------------------------------------------

    def mu(self, k: int, f: PiecewiseFn, q: PiecewiseFn, n: int | None = None) -> float:
        """``nu_k(f q) / nu_k(q)``."""
        fq = pointwise_mul(f, q, self.E.resolution)
        return self.nu(k, fq, n).value / self.nu(k, q, n).value

    def duality_residual(self, k: int, n: int, nu_n: int | None = None) -> float:
        """``|nu_k(q_k) lam^+_k / (nu_{k+1}(q_{k+1}) lam^-_k) - 1|``."""
        qs, lams = self.density_orbit(k, 1, n)
        lp = self.lambda_plus(k, nu_n)
        a = self.nu(k, qs[0], nu_n).value
        b = self.nu(k + 1, qs[1], nu_n).value
        return abs(a * lp / (b * lams[0]) - 1.0)

    def invariance_residual(self, k: int, f: PiecewiseFn, n: int, nu_n: int | None = None) -> float:
        """``|mu_{k+1}(f) - mu_k(f o T_k)|`` (unblocked ensembles only)."""
        if self.block != 1:
            raise ValueError("invariance check needs block length 1")
        qs, _ = self.density_orbit(k, 1, n)
        T = self.E.maps[self.E.word(k, 1)[0]]
        fT = T.compose(f, self.E.resolution)
        return abs(self.mu(k + 1, f, qs[1], nu_n) - self.mu(k, fT, qs[0], nu_n))

    # -- correlations and the residual operator -----------------------------------

    def correlations(self, k: int, f: PiecewiseFn, h: PiecewiseFn, ns, n_density: int,
                     nu_n: int | None = None) -> list[tuple[int, float]]:
        """``mu_{k-n}((f o T^n) h) - mu_k(f) mu_{k-n}(h)`` for each ``n`` in ``ns``.

        Uses ``L^{(n)}((f o T^n) u) = f L^{(n)} u`` and conformality, so only
        ``nu_k`` is needed; ``v = L^{(n)} q_{k-n}`` stands in for
        ``lam^{-(n)} q_k``. Both observables are centered first, which turns
        the difference of two O(1) numbers into one small integral:
        ``nu_k((f - mu_k f) L^{(n)}((h - mu_{k-n} h) q_{k-n})) / nu_k(v)``.
        """
        res = self.E.resolution
        out = []
        for n in ns:
            q0 = self.density_at_depth(k - n, n_density)
            h_bar = h.shift(-self.mu(k - n, h, q0, nu_n))
            u = pointwise_mul(h_bar, q0, res)
            v = q0
            for j in range(n):
                u = self.step(k - n + j, u)
                v = self.step(k - n + j, v)
                s = v.essinf()
                u = u.scale(1.0 / s)
                v = v.scale(1.0 / s)
            nv = self.nu(k, v, nu_n).value
            f_bar = f.shift(-self.nu(k, pointwise_mul(f, v, res), nu_n).value / nv)
            out.append((n, self.nu(k, pointwise_mul(f_bar, u, res), nu_n).value / nv))
        return out

    def residual(self, k: int, f: PiecewiseFn, n_max: int, n_density: int,
                 nu_n: int | None = None) -> list[tuple[int, float]]:
        """``||L^{(n)} f / lam^{+(n)} - nu_k(f) psi_{k+n}||_inf`` for ``n = 1..n_max``.

        ``psi = q / nu(q)`` along the forward orbit of ``q_k``; the n-step
        multiplier is the direct ratio ``Einf(L^{(N+n)}_k 1) / Einf(L^{(N)}_{k+n} 1)``.
        """
        qs, _ = self.density_orbit(k, n_max, n_density)
        nu_f = self.nu(k, f, nu_n).value
        N = self.nu_depth if nu_n is None else nu_n
        _, log_ones = self._one_scales(k, N + n_max)
        out = []
        g = f
        for n in range(1, n_max + 1):
            g = self.step(k + n - 1, g)
            _, log_tail = self.push(k + n, N, self.E.one())
            log_lp = log_ones[N + n - 1] - log_tail
            psi = qs[n].scale(1.0 / self.nu(k + n, qs[n], nu_n).value)
            r = combine(math.exp(-log_lp), g, -nu_f, psi)
            out.append((n, r.sup_norm()))
        return out

    def _one_scales(self, k: int, n: int):
        """Cumulative ``log Einf(L^{(j+1)}_k 1)`` for ``j < n``."""
        f = self.E.one()
        acc = 0.0
        logs = []
        for j in range(n):
            f = self.step(k + j, f)
            m = f.essinf()
            if not m > 0:
                raise AssumptionError(f"essential infimum vanished after {j + 1} steps from fiber {k}")
            acc += math.log(m)
            logs.append(acc)
            f = f.scale(1.0 / m)
        return f, logs

    # -- Lyapunov exponent --------------------------------------------------------

    def lyapunov(self, K: int, n: int, warmup: int = 0, offset: int = 0) -> dict:
        """``(1/n) log Einf(L^{(n)} 1)`` averaged over ``K`` base points.

        With ``warmup > 0`` the iteration starts from the normalized
        ``L^{(warmup)} 1`` of the preceding fibers, which removes the O(1/n)
        bias that otherwise separates different norms.
        """
        if n < 1 or K < 1:
            raise ValueError("n and K must be positive")
        pts = sample_points(self.E, K, offset)
        einf, bv = [], []
        for k in pts:
            f0 = self.density_at_depth(k, warmup) if warmup else self.E.one()
            f, log_scale = self.push(k, n, f0)
            einf.append(log_scale / n)
            bv.append((log_scale + math.log(f.bv_norm() / f0.bv_norm())) / n)
        einf = np.asarray(einf)
        bv = np.asarray(bv)
        se = float(einf.std(ddof=1) / math.sqrt(K)) if K > 1 else 0.0
        if not np.all(np.isfinite(einf)):
            raise NumericalError("non-finite Lyapunov estimate")
        return {
            "lyapunov": float(einf.mean()),
            "stderr": se,
            "lyapunov_bv": float(bv.mean()),
            "stderr_bv": float(bv.std(ddof=1) / math.sqrt(K)) if K > 1 else 0.0,
            "n": n,
            "K": K,
            "warmup": warmup,
            "per_point": einf.tolist(),
        }
