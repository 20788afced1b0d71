import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import linprog

from conftest import make_scenario
from nomaload.lp_solver import (
    INFEASIBLE,
    NUMERICAL_FAILURE,
    OPTIMAL,
    CellLp,
    build_cell_lp,
    oracle_solve,
    solve_lp,
)
from nomaload.noma_core import Cluster, enumerate_clusters, split_power


def lp(coeff, rhs):
    coeff = np.asarray(coeff, dtype=float)
    cols = tuple(Cluster(0, (k,)) for k in range(coeff.shape[1]))
    return CellLp(0, tuple(range(coeff.shape[0])), cols, coeff, np.asarray(rhs, dtype=float))


EXAMPLE = lp([[4.0, 0.0, 3.0], [0.0, 2.0, 1.5]], [4.0, 3.0])


def test_one_by_one():
    s = solve_lp(lp([[4.0]], [4.0]))
    assert s.status == OPTIMAL and s.objective == 1.0 and s.x.tolist() == [1.0]
    assert oracle_solve(lp([[3.0]], [7.0])).objective == pytest.approx(7 / 3, rel=1e-15)


def test_two_by_three_example():
    s = solve_lp(EXAMPLE)
    assert s.objective == pytest.approx(11 / 6, rel=1e-12)
    assert s.x == pytest.approx([0.0, 0.5, 4 / 3], abs=1e-12)
    o = oracle_solve(EXAMPLE)
    assert o.objective == pytest.approx(s.objective, rel=1e-9)
    ref = linprog(np.ones(3), A_ub=-EXAMPLE.coeff, b_ub=-EXAMPLE.rhs, method="highs")
    assert ref.fun == pytest.approx(11 / 6, rel=1e-9)


def test_rhs_scaling_doubles_objective():
    s1 = solve_lp(EXAMPLE)
    s2 = solve_lp(lp(EXAMPLE.coeff, 2 * EXAMPLE.rhs))
    assert s2.basis == s1.basis
    assert s2.objective == 2 * s1.objective


def test_deterministic():
    a, b = solve_lp(EXAMPLE), solve_lp(EXAMPLE)
    assert a.objective == b.objective and np.array_equal(a.x, b.x) and a.basis == b.basis


def test_zero_rows_and_nonpositive_rhs():
    assert solve_lp(lp(np.zeros((0, 2)), [])).objective == 0.0
    assert solve_lp(lp([[1.0, 2.0]], [0.0])).objective == 0.0


def test_infeasible_and_non_finite():
    assert solve_lp(lp([[0.0, 0.0], [1.0, 1.0]], [1.0, 1.0])).status == INFEASIBLE
    assert oracle_solve(lp([[0.0]], [1.0])).status == INFEASIBLE
    assert solve_lp(lp([[np.nan]], [1.0])).status == NUMERICAL_FAILURE


def test_oracle_size_limit():
    with pytest.raises(ValueError):
        oracle_solve(lp(np.ones((9, 2)), np.ones(9)))


def _cover_instance(rng, m, n):
    # each row has a nonzero somewhere, as in a cell LP (singleton columns)
    mask = rng.random((m, n)) < 0.6
    mask[np.arange(m), rng.integers(0, n, m)] = True
    coeff = np.where(mask, rng.uniform(0.1, 10, (m, n)), 0.0)
    return lp(coeff, rng.uniform(0.1, 10, m))


def test_random_against_oracle_and_highs():
    rng = np.random.default_rng(7)
    for _ in range(300):
        m, n = rng.integers(1, 5), rng.integers(1, 7)
        inst = _cover_instance(rng, m, n)
        s, o = solve_lp(inst), oracle_solve(inst)
        ref = linprog(np.ones(n), A_ub=-inst.coeff, b_ub=-inst.rhs, method="highs")
        assert s.status == OPTIMAL
        assert s.objective == pytest.approx(o.objective, rel=1e-9)
        assert s.objective == pytest.approx(ref.fun, rel=1e-7)
        assert np.all(inst.coeff @ s.x >= inst.rhs * (1 - 1e-9)) and np.all(s.x >= 0)


@settings(max_examples=150, deadline=None)
@given(
    arrays(float, (3, 5), elements=st.floats(0.1, 10)),
    arrays(float, 3, elements=st.floats(0.1, 10)),
    st.floats(1.01, 5),
)
def test_lp_monotone_in_capacity_and_homogeneous(coeff, rhs, t):
    base = solve_lp(lp(coeff, rhs)).objective
    # shrinking capacities can only raise the minimum
    assert solve_lp(lp(coeff / t, rhs)).objective >= base * (1 - 1e-12)
    assert solve_lp(lp(coeff, rhs * t)).objective == pytest.approx(base * t, rel=1e-9)


def test_adding_pair_columns_never_hurts():
    rng = np.random.default_rng(1)
    for _ in range(200):
        inst = _cover_instance(rng, 4, 4)
        sub = lp(np.diag(rng.uniform(0.1, 10, 4)), inst.rhs)
        full = lp(np.hstack([sub.coeff, inst.coeff]), inst.rhs)
        assert solve_lp(full).objective <= solve_lp(sub).objective * (1 + 1e-12)


# -- assembling the LP from a scenario ----------------------------------------------


def _two_ue_cell():
    g = [[4e-7, 1e-8], [1e-9, 5e-9]]
    return make_scenario(g, [0, 0], [1e6, 2e6], [0.8, 0.4], rb_count=100, rb_bandwidth=180e3, noise=1e-15)


def test_build_shape_and_coefficients():
    s = _two_ue_cell()
    cs = enumerate_clusters(s)
    # the second cell has no UE here, so only cell 0 is assembled
    splits = [split_power(u, "ntt", 0.2, 0.8, s.gains) for u in cs[0]]
    out = build_cell_lp(0, cs, splits, [0.0, 0.5], s)
    assert out.shape == (2, 3)
    assert out.rows == (0, 1)
    g, M, B, n = s.gains, 100, 180e3, 1e-15
    i0 = 0.4 * 0.5 * g[1, 0]
    i1 = 0.4 * 0.5 * g[1, 1]
    c = lambda sinr: M * B * np.log2(1 + sinr)
    expect = np.array([
        [c(0.8 * g[0, 0] / (i0 + n)), 0.0, c(0.16 * g[0, 0] / (i0 + n))],
        [0.0, c(0.8 * g[0, 1] / (i1 + n)), c(0.64 * g[0, 1] / (0.16 * g[0, 1] + i1 + n))],
    ])
    assert out.coeff == pytest.approx(expect, rel=1e-12)
    assert out.rhs.tolist() == [1e6, 2e6]
    assert "cell 0" in out.to_text()


def test_raising_interferer_load_lowers_coefficients():
    s = _two_ue_cell()
    cs = enumerate_clusters(s)
    splits = [split_power(u, "uniform", None, 0.8, s.gains) for u in cs[0]]
    lo = build_cell_lp(0, cs, splits, [0.0, 0.2], s).coeff
    hi = build_cell_lp(0, cs, splits, [0.0, 0.7], s).coeff
    nz = lo > 0
    assert np.all(hi[nz] < lo[nz]) and np.all(hi[~nz] == 0)


def test_own_load_is_ignored_and_bad_splits_rejected():
    s = _two_ue_cell()
    cs = enumerate_clusters(s)
    splits = [split_power(u, "uniform", None, 0.8, s.gains) for u in cs[0]]
    a = build_cell_lp(0, cs, splits, [0.0, 0.3], s).coeff
    b = build_cell_lp(0, cs, splits, [0.9, 0.3], s).coeff
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        build_cell_lp(0, cs, splits[:-1], [0.0, 0.3], s)
    bad = splits[:-1] + [split_power(cs[0][-1], "uniform", None, 0.5, s.gains)]
    with pytest.raises(ValueError):
        build_cell_lp(0, cs, bad, [0.0, 0.3], s)
