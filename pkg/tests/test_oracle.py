import math

import numpy as np
import pytest

from rpfkit import PiecewiseFn
from rpfkit.oracle import UlamCocycle, grid_apply, oracle_lyapunov, ulam_matrix

from conftest import HALF, affine_full_map, doubling, ensemble, mp_map


def test_ulam_two_cells():
    E = doubling(potential=HALF)
    M = ulam_matrix(E.maps[0], E.potential, 0, 2).dense()
    assert np.allclose(M, [[0.5, 0.5], [0.5, 0.5]], rtol=0, atol=1e-15)
    E = doubling()
    M = ulam_matrix(E.maps[0], E.potential, 0, 2).dense()
    assert np.allclose(M, [[1, 1], [1, 1]], rtol=0, atol=1e-15)
    with pytest.raises(ValueError):
        ulam_matrix(E.maps[0], E.potential, 0, 1)


def test_ulam_hole_kills_input_cells():
    E = doubling(hole=[(0.25, 0.5)])
    M = ulam_matrix(E.maps[0], E.potential, 0, 4).dense()
    assert np.all(M[:, 1] == 0.0)
    assert np.all(M[:, [0, 2, 3]].sum(axis=0) > 0)


@pytest.mark.parametrize("maps", [[affine_full_map(3)], [mp_map(0.5)], [mp_map(1.5)]])
def test_ulam_column_masses_with_lebesgue_weight(maps):
    E = ensemble(maps, HALF, [1.0])
    M = ulam_matrix(E.maps[0], E.potential, 0, 256)
    col = np.asarray(M.matrix.sum(axis=0)).ravel()
    assert np.all(M.matrix.data >= 0)
    assert np.max(np.abs(col - 1.0)) < 1e-6


def test_oracle_lyapunov_examples():
    assert abs(oracle_lyapunov(doubling(), 64, 20, 4)["lyapunov"] - math.log(2)) < 1e-12
    E = ensemble([affine_full_map(2), affine_full_map(3)], probabilities=[0.5, 0.5], seed=4)
    out = oracle_lyapunov(E, 72, 200, 64)
    expect = 0.5 * (math.log(2) + math.log(3))
    assert abs(out["lyapunov"] - expect) <= 3 * out["stderr"]


def test_leading_vector_doubling_is_uniform():
    U = UlamCocycle(doubling(potential=HALF), 64)
    v = U.leading_vector(0, 5)
    assert np.allclose(v, 1.0, rtol=0, atol=1e-12)


def test_grid_apply_examples():
    E = doubling()
    x = np.linspace(0, 1, 257)
    assert np.all(grid_apply(E.maps[0], E.potential, 0, x, np.ones_like(x)) == 2.0)


@pytest.mark.parametrize("hole", [(), [(0.25, 0.375)]])
def test_grid_apply_matches_transfer_on_affine(hole):
    E = ensemble([affine_full_map(3, hole)], {"type": "constant", "value": 0.2}, [1.0])
    x = np.linspace(0, 1, 4097)
    # an affine f is reproduced exactly by the oracle's linear interpolation
    f = PiecewiseFn.affine(-0.7, 1.3)
    direct = grid_apply(E.maps[0], E.potential, 0, x, f.evaluate(x))
    main = E.operator(0).apply(f).evaluate(x)
    # away from image edges of the hole the two limits coincide
    keep = np.ones(x.size, bool)
    for lo, hi in hole:
        for b in E.maps[0].branches:
            for y in b.image_of(lo, hi):
                keep &= np.abs(x - y) > 1e-9
    assert np.max(np.abs(direct - main)[keep]) < 1e-9


def test_grid_apply_refines_on_mp():
    E = ensemble([mp_map(0.7)], HALF, [1.0])
    f = PiecewiseFn.from_callable(lambda t: 1 + t * t, (0.0, 1.0), 4096)
    y = np.linspace(0.01, 0.99, 50)
    ref = E.operator(0).apply(f).evaluate(y)
    errs = []
    for m in (65, 257, 1025):
        x = np.linspace(0, 1, m)
        errs.append(np.max(np.abs(np.interp(y, x, grid_apply(E.maps[0], E.potential, 0, x, f.evaluate(x))) - ref)))
    assert errs[0] > errs[1] > errs[2]


def test_leading_vector_approaches_density_mp():
    from rpfkit import builtin
    from rpfkit.rpf import RpfSolver

    E = builtin("mp-ensemble")
    q = RpfSolver(E).density_at_depth(0, 30)
    dist = []
    for N in (128, 512, 2048):
        U = UlamCocycle(E, N)
        v = U.leading_vector(0, 30)
        edges = np.linspace(*E.base, N + 1)
        cells = np.array([q.integral([(a, b)]) for a, b in zip(edges[:-1], edges[1:])]) / U.h
        cells /= cells.sum() * U.h
        dist.append(np.abs(cells - v).sum() * U.h)
    assert dist[0] > dist[1] > dist[2]
