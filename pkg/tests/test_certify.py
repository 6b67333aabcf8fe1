import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rpfkit import builtin
from rpfkit.certify import (
    ConeScale,
    a_series,
    certify,
    choose_gamma,
    kingman_profile,
    search_n_star,
    sufficient_conditions,
    xi_growth_check,
)
from rpfkit.random_map import NumericalError
from rpfkit.transfer import GeometricPotential

from conftest import affine_full_map, doubling, ensemble, mp_map

TIMES5 = ensemble([affine_full_map(5)], probabilities=[1.0])


def test_n_star_single_maps():
    res = search_n_star(TIMES5, 4, K=8)
    assert res.n_star == 1 and math.isclose(res.estimate, math.log(0.6)) and res.stderr == 0.0
    res = search_n_star(doubling(), 4, K=8)
    assert res.n_star == 2
    assert math.isclose(res.table[0].mean_log_c, math.log(1.5)) and math.isclose(res.estimate, math.log(0.75))
    assert math.exp(res.estimate) < res.gamma < 1


def test_n_star_figure1(figure1):
    res = search_n_star(figure1, 6, K=32)
    assert res.table[0].mean_log_c >= math.log(2.5)
    assert res.n_star is not None and res.n_star >= 2


def test_n_star_failure_reports_none():
    # the hole at (1/4, 3/10) needs eight doubling steps before c drops below one
    res = search_n_star(doubling(hole=[(0.25, 0.3)]), 3, K=4)
    assert res.n_star is None and res.gamma is None and len(res.table) == 3


def test_choose_gamma():
    assert math.isclose(choose_gamma(-2.0), math.exp(-1.0))
    assert math.exp(-1e-300) >= choose_gamma(-1e-300) > 0
    with pytest.raises(ValueError):
        choose_gamma(0.0)


def test_a_series_closed_forms():
    res = a_series(lambda j: 0.6, lambda j: 3.0, 0.9)
    assert abs(res.value - 10.0) < 1e-11
    res = a_series(lambda j: 0.0, lambda j: 2.5, 0.4)
    assert res.value == 2.5 / 0.4 and res.terms == 1
    with pytest.raises(NumericalError):
        a_series(lambda j: 0.95, lambda j: 1.0, 0.9)
    with pytest.raises(ValueError):
        a_series(lambda j: 0.5, lambda j: 1.0, 1.0)


@given(st.floats(0.05, 0.9), st.floats(0.1, 10.0), st.integers(0, 2**32 - 1))
def test_a_series_recursion_random_constants(gap, dscale, seed):
    # random (c, d) sequences with c < gamma: the series solves gamma a_{next} = c a + d
    rng = np.random.default_rng(seed)
    gamma = 0.95
    c = rng.uniform(0, gamma - gap * gamma, 4000)
    d = rng.uniform(0.5, 1.5, 4000) * dscale
    # index 0 is the present block, k > 0 the k-th block in the past
    a_now = a_series(lambda j: c[j], lambda j: d[j], gamma).value
    a_prev = a_series(lambda j: c[j + 1], lambda j: d[j + 1], gamma).value
    assert abs(gamma * a_now - (c[1] * a_prev + d[1])) <= 1e-10 * a_now


def test_cone_scale_along_figure1_fiber(figure1):
    res = search_n_star(figure1, 6, K=32)
    cs = ConeScale(figure1, res.n_star, res.gamma)
    for k in range(0, 40 * res.n_star, res.n_star):
        a = cs.a(k).value
        assert a >= 1.0
        assert cs.recursion_residual(k) <= 1e-10 * a
    # log a stays bounded, so log(a) / |j| decays like 1 / |j|
    prof = cs.temperedness(0, span=64)
    near = np.mean([v for j, v in prof if 8 <= abs(j) <= 16])
    far = np.mean([v for j, v in prof if abs(j) >= 48])
    assert far <= 0.5 * near


def test_sufficient_conditions_examples(figure1, log_5_over_4):
    sc = sufficient_conditions(figure1, K=32, n_max=4)
    assert sc.branch_count.value <= log_5_over_4 + 1e-12
    assert sc.branch_count.holds
    sc = sufficient_conditions(builtin("mp-ensemble"), K=8, n_max=4, xi_bound=(1, 1))
    assert abs(sc.xi_bounded.value - (0.5 * math.log(3) - math.log(2))) < 1e-9
    assert sc.xi_bounded.holds
    sc = sufficient_conditions(doubling(), K=8, n_max=4)
    assert math.isclose(sc.one_step.value, math.log(3) - math.log(2))
    assert not sc.one_step.holds


def test_mp_condition_threshold():
    # the item (3) margin t log 3 - log 2 changes sign at t = log 2 / log 3
    E = builtin("mp-ensemble")
    for t, sign in ((0.62, -1), (0.64, 1)):
        sc = sufficient_conditions(E.with_potential(GeometricPotential(t)), K=4, n_max=3, xi_bound=(1, 1))
        assert math.copysign(1, sc.xi_bounded.value) == sign


def test_mp_random_gamma_stays_below_the_bound():
    # with gamma < 1 the derivative stays below 3, so the margin is strictly inside the bound
    E = ensemble([mp_map(0.25), mp_map(0.75)], {"type": "geometric", "t": 0.5}, [0.5, 0.5], seed=3)
    sc = sufficient_conditions(E, K=64, n_max=3, xi_bound=(1, 1))
    bound = 0.5 * math.log(3) - math.log(2)
    assert 0.5 * math.log(2.25) - math.log(2) - 1e-12 <= sc.xi_bounded.value < bound


def test_conditions_imply_search_succeeds(figure1):
    for E in (figure1, TIMES5, builtin("intermittent-holes")):
        sc = sufficient_conditions(E, K=16, n_max=4)
        if sc.one_step.holds or sc.branch_count.holds or sc.xi_bounded.holds:
            assert search_n_star(E, 8, K=16).n_star is not None


def test_kingman_examples():
    prof = kingman_profile(ensemble([affine_full_map(3)], probabilities=[1.0]), 5, K=4)
    assert all(math.isclose(r.beta_f, math.log(3)) for r in prof.rows)
    # by hand: at level two only [3/4, 1] maps fully, at level three [3/8, 1/2] joins it
    prof = kingman_profile(doubling(hole=[(0.25, 0.375)]), 3, K=4)
    assert prof.rows[0].beta_f == 0.0 and prof.rows[1].beta_f == 0.0
    assert math.isclose(prof.rows[2].beta_f, math.log(2) / 3)
    prof = kingman_profile(ensemble([affine_full_map(2)], {"type": "constant", "value": -0.7}, [1.0]), 4, K=4)
    assert all(math.isclose(r.minus_phi_minus, 0.7) for r in prof.rows)
    assert math.isclose(prof.phi_plus, -0.7)


def test_kingman_monotone_figure1(figure1):
    prof = kingman_profile(figure1, 6, K=64)
    rows = prof.rows
    for r0, r1 in zip(rows, rows[1:]):
        assert r1.beta_f >= r0.beta_f - 2 * (r0.beta_f_se + r1.beta_f_se)
        assert r1.minus_phi_minus <= r0.minus_phi_minus + 2 * (r0.minus_phi_minus_se + r1.minus_phi_minus_se)


def test_xi_growth(figure1):
    rep = xi_growth_check(doubling(), n_max=6, K=4)
    assert rep.violations == 0 and rep.worst_ratio == 0.0
    rep = xi_growth_check(figure1, n_max=8, K=16)
    assert rep.violations == 0 and rep.worst_ratio <= 1.0
    from rpfkit import partition_stats

    st_ = partition_stats(doubling(hole=[(0.25, 0.375)]).maps, (0,))
    assert st_.xi == 2 <= 4


def test_certificate(figure1):
    cert = certify(figure1, n_max=6, K=16, a_points=4)
    assert cert.strongly_contracting
    assert len(cert.a_values) == 4 and all(a >= 1 for _, a, _, _ in cert.a_values)


def test_contraction_profile_figure1(figure1):
    from rpfkit.certify import contraction_profile

    res = search_n_star(figure1, 6, K=32)
    prof = contraction_profile(ConeScale(figure1, res.n_star, res.gamma), 0, 6, np.random.default_rng(4))
    assert len(prof.ratios) >= 3
    assert all(r <= b + 1e-9 for r, b in zip(prof.ratios, prof.bounds))
    assert 0 < prof.geometric_mean < 1
