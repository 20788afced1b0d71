import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_scenario
from nomaload.noma_core import (
    Cluster,
    PowerPolicy,
    PowerSplit,
    capacity,
    check_decoding_condition,
    decoding_margin,
    enumerate_clusters,
    interference,
    oma_clusters,
    sinr,
    split_fractions,
    split_power,
)
from nomaload.scenario_gen import GenConfig, generate

gain = st.floats(1e-12, 1e-4)


# -- power splits ---------------------------------------------------------------


def test_ftpc_zero_exponent_is_even():
    s = split_power(Cluster(0, (0, 1)), "ftpc", 0.0, 0.8, np.array([[1e-6, 1e-9]]))
    assert s.powers == (0.4, 0.4)


def test_ftpc_unit_exponent():
    s = split_power(Cluster(0, (0, 1)), "ftpc", 1.0, 1.0, np.array([[4.0, 1.0]]))
    assert s.powers == pytest.approx((0.2, 0.8), abs=1e-15)


def test_ntt_fixed_ratio():
    s = split_power(Cluster(0, (0, 1)), "ntt", 0.2, 0.1, np.array([[4.0, 1.0]]))
    assert s.powers == pytest.approx((0.02, 0.08), abs=1e-15)


def test_singleton_gets_full_power():
    assert split_power(Cluster(0, (3,)), "ntt", 0.3, 0.1, np.ones((1, 4))).powers == (0.1,)


@given(st.sampled_from(["uniform", "ftpc", "ntt"]), st.floats(0.01, 0.49), gain, gain, st.floats(1e-3, 10))
def test_split_sums_to_cell_power_and_favours_weak(family, alpha, g1, g2, p):
    gs, gw = max(g1, g2), min(g1, g2)
    a = None if family == "uniform" else alpha
    s = split_power(Cluster(0, (0, 1)), family, a, p, np.array([[gs, gw]]))
    assert s.powers[0] + s.powers[1] == pytest.approx(p, rel=1e-15)
    assert s.powers[0] <= s.powers[1] + 1e-15 * p


def test_ftpc_fraction_matches_weight_formula():
    gs, gw, a = 3e-7, 2e-9, 0.6
    direct = gs**-a / (gs**-a + gw**-a)
    assert float(split_fractions("ftpc", a, gs, gw)) == pytest.approx(direct, rel=1e-13)


@pytest.mark.parametrize("family,grid", [("ntt", (0.5,)), ("ntt", (0.0,)), ("ftpc", (1.2,)), ("ftpc", ()),
                                         ("bogus", (0.2,)), ("uniform", (0.2,))])
def test_policy_rejects_bad_parameters(family, grid):
    with pytest.raises(ValueError):
        PowerPolicy(family, grid)


def test_policy_candidates():
    assert PowerPolicy.uniform().candidates() == [None]
    assert PowerPolicy.ftpc().candidates() == [0.2, 0.4, 0.6, 0.8]
    assert PowerPolicy.ntt().size == 4


# -- interference, SINR, capacity ---------------------------------------------


def test_interference_examples():
    assert interference(0.1, 1e-8, 0.0) == 0.0
    assert interference(0.1, 1e-8, 1.0) == 0.1 * 1e-8
    assert interference(0.1, 1e-8, 0.5) == pytest.approx(5e-10, rel=1e-15)


def test_sinr_singleton_no_interference():
    s = make_scenario([[4.0, 1.0], [1.0, 1.0]], [0, 1], [1, 1], [1.0, 1.0], noise=2.0)
    assert sinr(Cluster(0, (0,)), 0, PowerSplit((1.0,)), [0.0, 0.0], s) == 2.0


def test_sinr_pair_members():
    s = make_scenario([[1.0, 1.0]], [0, 0], [1, 1], [8.0], noise=1.0)
    u = Cluster(0, (0, 1))
    split = PowerSplit((2.0, 6.0))
    assert sinr(u, 1, split, [0.0], s) == 2.0  # 6 / (2 + 1)
    assert sinr(u, 0, split, [0.0], s) == 2.0  # intra-cell term cancelled


def test_sinr_inter_cell_term():
    s = make_scenario([[2.0, 1.0], [0.5, 1.0]], [0, 1], [1, 1], [1.0, 4.0], noise=1.0)
    # 1*2 / (4*0.5*0.25 + 1)
    assert sinr(Cluster(0, (0,)), 0, PowerSplit((1.0,)), [0.9, 0.25], s) == pytest.approx(2 / 1.5)


def test_capacity_examples():
    assert capacity(0.0, 100, 180e3) == 0.0
    assert capacity(1.0, 100, 180e3) == 1.8e7
    assert capacity(3.0, 1, 1.0) == 2.0


# -- cluster filter and decoding condition --------------------------------------


def _pair_scenario(g0, g1, noise=1e-9):
    """Cell 0 serves UEs 0 (strong) and 1; cell 1 serves UE 2."""
    gains = [[g0[0], g0[1], 1e-9], [g1[0], g1[1], 1e-6]]
    return make_scenario(gains, [0, 0, 1], [1, 1, 1], [1.0, 1.0], noise=noise)


def test_filter_keeps_pair_when_ratio_dominates():
    s = _pair_scenario((1e-5, 1e-7), (2e-6, 1e-6))
    assert Cluster(0, (0, 1)) in enumerate_clusters(s).pairs(0)


def test_filter_drops_pair_when_other_cell_ratio_larger():
    s = _pair_scenario((1e-5, 1e-7), (1e-6, 1e-9))
    assert enumerate_clusters(s).pairs(0) == []


def test_single_cell_keeps_every_unequal_pair():
    g = np.array([[3e-7, 1e-7, 2e-7, 1e-7]])
    s = make_scenario(g, [0] * 4, [1] * 4, [1.0])
    pairs = enumerate_clusters(s).pairs(0)
    # the tie between UEs 1 and 3 has no defined SIC order
    assert len(pairs) == 5
    for u in pairs:
        j, h = u.members
        assert g[0, j] > g[0, h]


def test_cluster_ordering_and_oma():
    s = generate(GenConfig(seed=2, num_ues=30))
    cs = enumerate_clusters(s)
    oma = oma_clusters(s)
    for i in range(s.n_cells):
        single = [u for u in cs[i] if not u.is_pair]
        assert [u.members[0] for u in single] == s.ues_of(i)
        assert cs[i][: len(single)] == tuple(single)
        assert oma[i] == tuple(single)
    assert not oma.has_pairs and cs.has_pairs


def test_filter_prunes_large_cell():
    s = generate(GenConfig(seed=3, num_ues=210))
    counts = np.bincount(s.serving)
    i = int(np.flatnonzero(counts == 30)[0])
    n_pairs = len(enumerate_clusters(s).pairs(i))
    assert 0 < n_pairs < 435
    assert n_pairs == 132  # frozen for this seed


def test_constructed_violation():
    # ratio 100 at the serving cell, 1000 at the interferer
    s = _pair_scenario((1e-5, 1e-7), (1e-6, 1e-9))
    u = Cluster(0, (0, 1))
    assert check_decoding_condition(u, None, [0.0, 0.0], s)
    # lhs = 1e-7*1e-6 - 1e-5*1e-9 = 9e-14 ; rhs = (1e-5 - 1e-7)*1e-9 = 9.9e-15
    assert not check_decoding_condition(u, None, [0.0, 1.0], s)
    assert decoding_margin(u, [0.0, 1.0], s) == pytest.approx(9.9e-15 - 9e-14, rel=1e-12)


def test_isolated_cell_pairs_always_decodable():
    s = make_scenario([[3e-7, 1e-7, 2e-7]], [0] * 3, [1] * 3, [1.0])
    for u in enumerate_clusters(s).pairs(0):
        assert check_decoding_condition(u, None, [1.0], s)


def _decodes_directly(s, u, loads, split):
    """Strong member's SINR for the weak member's signal vs the weak member's own SINR."""
    i, (j, h) = u.cell, u.members
    g = s.gains
    ij = sum(s.powers[k] * loads[k] * g[k, j] for k in range(s.n_cells) if k != i)
    ih = sum(s.powers[k] * loads[k] * g[k, h] for k in range(s.n_cells) if k != i)
    p_s, p_w = split.powers
    at_strong = p_w * g[i, j] / (p_s * g[i, j] + ij + s.noise_power)
    at_weak = p_w * g[i, h] / (p_s * g[i, h] + ih + s.noise_power)
    return at_strong, at_weak


@settings(max_examples=200, deadline=None)
@given(st.lists(gain, min_size=4, max_size=4), st.floats(0, 1), st.floats(0.01, 0.49))
def test_condition_matches_sinr_comparison(g, rho1, alpha):
    s = _pair_scenario((max(g[0], g[1]) * 1.01, min(g[0], g[1])), (g[2], g[3]), noise=1e-13)
    u = Cluster(0, (0, 1))
    split = split_power(u, "ntt", alpha, 1.0, s.gains)
    at_strong, at_weak = _decodes_directly(s, u, [0.0, rho1], split)
    if not math.isclose(at_strong, at_weak, rel_tol=1e-9):
        assert check_decoding_condition(u, split, [0.0, rho1], s) == (at_strong >= at_weak)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.floats(0, 1), min_size=3, max_size=3))
def test_filtered_pairs_decodable_at_any_load(seed, loads):
    s = generate(GenConfig(seed=seed, num_small_cells=2, num_ues=12))
    for u in enumerate_clusters(s).all():
        if u.is_pair:
            assert check_decoding_condition(u, None, loads, s)


def test_pair_filter_is_full_ratio_test():
    # brute force over all same-cell pairs against the ratio definition
    s = generate(GenConfig(seed=9, num_ues=40))
    g = s.gains
    cs = enumerate_clusters(s)
    for i in range(s.n_cells):
        expect = set()
        for j, h in itertools.permutations(s.ues_of(i), 2):
            if g[i, j] > g[i, h] and all(
                g[i, j] * g[k, h] >= g[k, j] * g[i, h] * (1 - 1e-15) for k in range(s.n_cells) if k != i
            ):
                expect.add((j, h))
        assert {u.members for u in cs.pairs(i)} == expect
