import math

import numpy as np
import pytest

from rpfkit import PiecewiseFn, builtin, survivor_partition
from rpfkit.cone import random_cone_function
from rpfkit.interval_fn import combine
from rpfkit.rpf import RpfSolver, fit_rate

from conftest import HALF, affine_full_map, doubling, ensemble

X = PiecewiseFn.affine(1.0, 0.0)
ONE = PiecewiseFn.constant(1.0)


@pytest.fixture(scope="module")
def fig(figure1):
    return RpfSolver(figure1, nu_depth=30)


def test_fit_rate():
    ns = np.arange(1, 11)
    r, C, corr = fit_rate(ns, 3.0 * 0.4**ns)
    assert math.isclose(r, 0.4) and math.isclose(C, 3.0) and math.isclose(corr, -1.0)
    assert math.isnan(fit_rate([1, 2], [0.0, 0.0])[0])


# --- densities and multipliers -----------------------------------------------


@pytest.mark.parametrize("potential, lam", [(None, 2.0), (HALF, 1.0)])
def test_doubling_trivial_values(potential, lam):
    S = RpfSolver(doubling(potential=potential), nu_depth=12)
    d = S.density(0, 5)
    assert d.q.essinf() == d.q.esssup() == 1.0
    assert all(v == lam for v in d.lam_minus) and d.converged
    assert S.multipliers(3, 10) == (lam, lam)
    assert S.duality_residual(0, 5) < 1e-14


def test_equal_slope_map_constant_weight():
    S = RpfSolver(ensemble([affine_full_map(3)], {"type": "constant", "value": -0.4}, [1.0]), nu_depth=8)
    d = S.density(0, 4)
    assert d.q.essinf() == d.q.esssup() == 1.0
    assert math.isclose(d.lam_minus[-1], 3 * math.exp(-0.4))


def test_figure1_density_converges(fig):
    d = fig.density(0, 40)
    assert d.converged and abs(d.q.essinf() - 1.0) < 1e-12
    inc = np.asarray(d.increments)
    # geometric decay: the late increments are orders of magnitude below the early ones
    assert inc[-1] < 1e-9 and inc[-1] < 1e-5 * inc[0]
    r, _, corr = fit_rate(np.arange(inc.size), inc)
    assert r < 1 and corr < -0.9


def test_start_function_independence(fig):
    q1 = fig.density_at_depth(0, 30)
    q2 = fig.density_at_depth(0, 30, PiecewiseFn.affine(0.5, 1.0))
    inc = fig.density(0, 30, tol=0.0).increments[-1]
    assert combine(1.0, q1, -1.0, q2).sup_norm() <= max(1e-8, 100 * inc)


def test_density_equivariance_improves_with_depth(fig):
    errs = []
    for n in (2, 4, 20):
        # same depth at both fibers, so q1 does not reuse the push that made q0
        q0, q1 = fig.density_at_depth(0, n), fig.density_at_depth(1, n)
        Lq = fig.step(0, q0)
        lam = Lq.essinf()
        errs.append(combine(1.0, Lq, -lam, q1).sup_norm())
    assert errs[0] > errs[1] > errs[2] and errs[2] < 1e-8


# --- conformal functionals ----------------------------------------------------


def test_nu_examples():
    S = RpfSolver(doubling(potential=HALF), nu_depth=30)
    assert S.nu(0, ONE).value == 1.0
    for a, b in ((0.0, 0.5), (0.1, 0.35), (0.3, 0.9)):
        assert abs(S.nu_interval(0, a, b).value - (b - a)) < 1e-8
    H = RpfSolver(doubling(hole=[(0.25, 0.375)]), nu_depth=30)
    assert abs(H.nu_interval(0, 0.25, 0.375).value) < 1e-12
    assert abs(H.nu(0, ONE).value - 1.0) < 1e-15


def test_nu_is_a_normalized_monotone_table(fig):
    grid, cdf = fig.cdf_table(0, cells=256)
    assert cdf[0] == 0.0 and abs(cdf[-1] - 1.0) < 1e-9
    assert np.all(np.diff(cdf) >= -1e-12)
    # the holes of the first map of the word carry no mass
    m = fig.E.maps[fig.E.word(0, 1)[0]]
    for lo, hi in m.hole:
        assert abs(fig.nu_interval(0, lo, hi).value) < 1e-9


def test_nu_equivariance(fig):
    rng = np.random.default_rng(5)
    f = random_cone_function(rng, 1.0)
    lp = fig.lambda_plus(0)
    lhs = fig.nu(1, fig.step(0, f)).value
    assert abs(lhs - lp * fig.nu(0, f).value) <= 1e-8 * lhs


def test_non_atomicity(fig):
    grid, cdf = fig.cdf_table(0, cells=4096)
    interp = lambda lo, hi: np.interp(hi, grid, cdf) - np.interp(lo, grid, cdf)
    heaviest = []
    for level in range(1, 5):
        p = survivor_partition(fig.E.maps, fig.E.word(0, level))
        heaviest.append(max(interp(lo, hi) for lo, hi in zip(p.lo, p.hi)))
    assert all(b < a for a, b in zip(heaviest, heaviest[1:]))
    assert heaviest[-1] < 0.1 * heaviest[0]


# --- invariant measures -----------------------------------------------------------


def test_mu_examples():
    S = RpfSolver(doubling(), nu_depth=30)
    q = S.density_at_depth(0, 4)
    assert abs(S.mu(0, ONE, q) - 1.0) < 1e-14
    third = S.mu(0, PiecewiseFn.indicator(0.0, 1 / 3), q)
    assert abs(third - 1 / 3) < 1e-6
    rest = S.mu(0, PiecewiseFn.indicator(1 / 3, 1.0), q)
    # each indicator carries the 2**-30 truncation of the depth-30 ratio
    assert abs(third + rest - 1.0) < 1e-8


def test_duality_identity_figure1(fig):
    for k in (0, 1, 5):
        assert fig.duality_residual(k, 30) < 1e-6


def test_invariance_panel(fig):
    panel = [X, PiecewiseFn.affine(1.0, 1.0), PiecewiseFn.step([0, 0.5, 1], [1.0, 0.0]),
             PiecewiseFn.from_callable(lambda x: x * x, (0.0, 1.0), 4096),
             PiecewiseFn.step([0, 0.2, 0.6, 1], [0.0, 2.0, 1.0])]
    for f in panel:
        assert fig.invariance_residual(0, f, 30) < 5e-5


# --- Lyapunov, correlations, residual ------------------------------------------------


def test_lyapunov_examples():
    out = RpfSolver(doubling()).lyapunov(K=4, n=20)
    assert out["lyapunov"] == math.log(2) and out["stderr"] == 0.0
    assert abs(RpfSolver(doubling(potential=HALF)).lyapunov(K=4, n=20)["lyapunov"]) < 1e-15


def test_lyapunov_bernoulli_mix():
    p = 0.3
    E = ensemble([affine_full_map(2), affine_full_map(3)], probabilities=[p, 1 - p], seed=17)
    n, K = 40, 64
    out = RpfSolver(E).lyapunov(K=K, n=n)
    from rpfkit.certify import sample_points

    exact = [sum(math.log(2 if s == 0 else 3) for s in E.word(k, n)) / n for k in sample_points(E, K)]
    assert np.allclose(out["per_point"], exact, rtol=0, atol=1e-12)
    expect = p * math.log(2) + (1 - p) * math.log(3)
    assert abs(out["lyapunov"] - expect) <= 3 * out["stderr"]


def test_correlation_examples():
    S = RpfSolver(doubling(potential=HALF), nu_depth=20)
    assert all(abs(v) < 1e-14 for _, v in S.correlations(0, ONE, ONE, [1, 2], n_density=2))
    corr = S.correlations(0, X, X, range(1, 6), n_density=2)
    for n, v in corr:
        # the x * x product is sampled, which costs O(h^2) at the default grid
        assert abs(v - 2.0**-n / 12) < 1e-7


def test_residual_examples():
    # nu(x) converges like 2**-depth, so the depth is set past double precision
    S = RpfSolver(doubling(), nu_depth=60)
    for n, r in S.residual(0, X, 8, n_density=2):
        assert abs(r - 2.0 ** (-n - 1)) < 1e-14
    psi = S.density_at_depth(0, 3)
    assert all(r < 1e-14 for _, r in S.residual(0, psi, 5, n_density=3))


def test_residual_decays_figure1(fig):
    f = random_cone_function(np.random.default_rng(8), 1.0)
    out = fig.residual(0, f, 12, n_density=30)
    r, _, corr = fit_rate(*zip(*out))
    assert r < 1 and corr < -0.9
    q = fig.density_at_depth(0, 30)
    assert all(v < 1e-7 for _, v in fig.residual(0, q, 5, n_density=30))


def test_blocked_solver_matches_unblocked(figure1):
    S1, S2 = RpfSolver(figure1), RpfSolver(figure1, block=2)
    q1 = S1.density_at_depth(0, 20)
    q2 = S2.density_at_depth(0, 10)
    assert combine(1.0, q1, -1.0, q2).sup_norm() < 1e-12
    with pytest.raises(ValueError):
        S2.invariance_residual(0, X, 5)
    with pytest.raises(ValueError):
        RpfSolver(figure1, block=0)
