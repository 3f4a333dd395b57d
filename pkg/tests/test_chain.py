import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from logitmeta import CapError, GameSpec, InputError, SubsetMask
from logitmeta.chain import (
    boltzmann_update, bottleneck, bottleneck_star, build_chain, check_reversibility,
    connected_subsets, edge_flow, gibbs, restrict_kill, restrict_loop,
    stationarity_residual, stationary_restricted, structural_sets, subset_table,
)
from logitmeta import zoo

import oracles

LN2 = math.log(2)


def ladder(beta):
    g = zoo.make_ladder2()
    return g, build_chain(g, beta)


def matching_pennies():
    # player 0 wants to match, player 1 wants to mismatch: a best-response cycle
    u0 = [1.0, -1.0, -1.0, 1.0]
    return GameSpec((2, 2), [u0, [-v for v in u0]])


def test_uniform_update_at_zero_beta():
    g = GameSpec((4,), [[0.0, 3.0, -1.0, 2.0]])
    np.testing.assert_allclose(boltzmann_update(g, 0.0, 0, 0), [0.25] * 4)


def test_ladder_update_ln2():
    g = zoo.make_ladder2()
    np.testing.assert_allclose(boltzmann_update(g, LN2, 0, 0), [2 / 3, 1 / 3], rtol=1e-14)


def test_large_beta_best_response():
    g = zoo.make_ladder2()
    sig = boltzmann_update(g, 1e4, 0, 0)
    assert np.all(np.isfinite(sig))
    assert sig[0] >= 1 - 1e-12


def test_negative_beta_rejected():
    with pytest.raises(InputError):
        build_chain(zoo.make_ladder2(), -1.0)
    with pytest.raises(InputError):
        build_chain(zoo.make_ladder2(), float("inf"))


def test_ladder_zero_beta_is_lazy_walk():
    _, c = ladder(0.0)
    P = c.dense()
    assert np.allclose(np.diag(P), 0.5)
    assert P[0, 1] == P[0, 2] == 0.25 and P[0, 3] == 0.0


def test_ladder_ln2_entries():
    _, c = ladder(LN2)
    assert c.P[0, 1] == pytest.approx(1 / 6, abs=1e-15)
    assert c.P[0, 0] == pytest.approx(2 / 3, abs=1e-15)


def test_gibbs_values():
    g = zoo.make_ladder2()
    np.testing.assert_allclose(gibbs(g, LN2), [4 / 9, 2 / 9, 2 / 9, 1 / 9], rtol=1e-14)
    np.testing.assert_allclose(gibbs(g, 0.0), [0.25] * 4)
    pi = gibbs(g, 500.0)
    assert np.all(np.isfinite(pi)) and pi[0] >= 1 - 1e-12


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("beta", [0.0, 0.7, 3.0])
def test_matrix_matches_definition(seed, beta):
    counts = [(2, 3), (3,), (2, 2, 2), (2, 3, 2)][seed % 4]
    g = zoo.make_random_potential(len(counts), counts, seed=seed)
    c = build_chain(g, beta)
    np.testing.assert_allclose(c.dense(), oracles.logit_matrix(g, beta), atol=1e-15)
    np.testing.assert_allclose(c.pi, oracles.gibbs(g.potential, beta), rtol=1e-12)
    assert np.abs(c.row_sums() - 1).max() <= 1e-12


@pytest.mark.parametrize("seed", range(6))
def test_gibbs_reversible(seed):
    g = zoo.make_random_potential(3, (2, 3, 2), seed=seed)
    c = build_chain(g, 2.0)
    assert check_reversibility(c).passed
    assert stationarity_residual(c) <= 1e-12


def test_non_potential_game_is_not_reversible():
    g = matching_pennies()
    c = build_chain(g, 1.0)
    assert stationarity_residual(c) <= 1e-12
    res = check_reversibility(c)
    assert not res.passed and res.worst > 1e-3


def test_restrict_loop_ladder():
    _, c = ladder(LN2)
    L = SubsetMask.from_indices(4, [0, 2])
    R = restrict_loop(c, L)
    assert R.P[0, 0] == pytest.approx(5 / 6)
    assert R.P[0, 2] == pytest.approx(1 / 6)
    assert R.P[0, 1] == 0.0
    np.testing.assert_allclose(R.pi[[0, 2]], [2 / 3, 1 / 3])


def test_restrict_loop_full_is_identity():
    _, c = ladder(1.3)
    R = restrict_loop(c, SubsetMask.full(4))
    np.testing.assert_allclose(R.dense(), c.dense())


@pytest.mark.parametrize("seed", range(5))
def test_restricted_stationary_for_connected_sets(seed):
    g = zoo.make_random_potential(3, (2, 2, 3), seed=seed)
    c = build_chain(g, 1.5)
    for L in itertools.islice(connected_subsets(g.index, SubsetMask.full(g.size)), 0, 200, 7):
        R = restrict_loop(c, L)
        assert np.abs(R.P.T @ R.pi - R.pi).max() <= 1e-10
        np.testing.assert_allclose(R.row_sums()[list(L)], 1.0)


def test_restrict_kill():
    _, c = ladder(LN2)
    K = restrict_kill(c, [0])
    assert K.P[0, 0] == pytest.approx(2 / 3)
    assert K.P.nnz == 1
    full = restrict_kill(c, SubsetMask.full(4))
    np.testing.assert_allclose(full.row_sums(), 1.0)
    with pytest.raises(InputError):
        restrict_kill(c, [])


def test_bottleneck_values():
    _, c = ladder(0.0)
    assert bottleneck(c, [0]) == pytest.approx(0.5)
    assert bottleneck(c, SubsetMask.full(4)) == 0.0
    _, c = ladder(LN2)
    for x in range(4):
        assert bottleneck(c, [x]) == pytest.approx(1 - c.P[x, x])


@pytest.mark.parametrize("seed", range(4))
def test_bottleneck_matches_brute(seed):
    g = zoo.make_random_potential(3, (2, 2, 2), seed=seed)
    c = build_chain(g, 2.5)
    P = c.dense()
    for L in oracles.all_subsets(8):
        if len(L) < 8:
            assert bottleneck(c, list(L)) == pytest.approx(oracles.bottleneck(P, c.pi, L), rel=1e-12)
            assert edge_flow(c, list(L)) == pytest.approx(
                oracles.bottleneck(P, c.pi, L) * c.pi[list(L)].sum(), rel=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_subset_table_matches_brute(seed):
    g = zoo.make_random_potential(2, (3, 3), seed=seed)
    c = build_chain(g, 1.0)
    idx, mass, cut = subset_table(c, SubsetMask.full(9))
    P = c.dense()
    for bits in range(1, 512):
        L = [v for v in range(9) if bits >> v & 1]
        assert mass[bits] == pytest.approx(c.pi[L].sum(), rel=1e-12)
        if len(L) < 9:
            assert cut[bits] == pytest.approx(
                oracles.bottleneck(P, c.pi, L) * mass[bits], rel=1e-10, abs=1e-17)


def test_bstar_one_player():
    g = GameSpec((2,), [[0.0, 0.0]], [0.0, 0.0])
    res = bottleneck_star(build_chain(g, 0.0))
    assert res.value == pytest.approx(0.5)
    assert res.subset.members().tolist() == [0]   # smaller bitmask wins the tie


def test_bstar_modes_agree_on_ladder():
    g, c = ladder(0.0)
    a = bottleneck_star(c, mode="exhaustive")
    b = bottleneck_star(c, mode="connected")
    assert a.value == pytest.approx(b.value)
    assert a.subset == b.subset


@pytest.mark.parametrize("seed", range(6))
def test_bstar_exhaustive_matches_brute(seed):
    g = zoo.make_random_potential(3, (2, 2, 2), seed=seed)
    c = build_chain(g, 3.0)
    P = c.dense()
    best = min(oracles.bottleneck(P, c.pi, L) for L in oracles.all_subsets(8)
               if c.pi[list(L)].sum() <= 0.5)
    assert bottleneck_star(c).value == pytest.approx(best, rel=1e-12)


def test_bstar_cap():
    g = zoo.make_random_potential(5, (2, 2, 2, 5, 1), seed=0)
    with pytest.raises(CapError) as exc:
        bottleneck_star(build_chain(g, 1.0), mode="exhaustive")
    assert "connected" in str(exc.value)


def test_heuristic_constant_potential_falls_back_to_singletons():
    g = GameSpec((2, 2), np.zeros((2, 4)), np.zeros(4))
    c = build_chain(g, 1.0)
    sets = structural_sets(g, np.ones(4, dtype=bool))
    assert (0,) in sets
    res = bottleneck_star(c, mode="heuristic")
    assert res.subset.card == 1


def test_connected_subsets_square():
    idx = zoo.make_ladder2().index
    sets = list(connected_subsets(idx, SubsetMask.full(4), max_size=2))
    assert len(sets) == 8
    assert (0, 3) not in sets and (1, 2) not in sets
    assert list(connected_subsets(idx, SubsetMask.from_indices(4, [2]))) == [(2,)]


@pytest.mark.parametrize("radices", [(2, 2, 2), (2, 3), (3, 2, 2)])
def test_connected_subsets_match_brute(radices):
    idx = zoo.make_random_potential(len(radices), radices).index
    got = list(connected_subsets(idx, SubsetMask.full(idx.size)))
    assert len(got) == len(set(got))
    want = {L for L in oracles.all_subsets(idx.size) if oracles.is_connected(L, radices)}
    assert set(got) == want


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.0, 8.0))
def test_rows_stochastic_property(seed, beta):
    g = zoo.make_random_potential(3, (2, 3, 2), seed=seed, range=2.0)
    c = build_chain(g, beta)
    assert np.abs(c.row_sums() - 1).max() <= 1e-12
    assert np.all(c.P.data >= 0)
    assert abs(c.pi.sum() - 1) <= 1e-12
    L = SubsetMask.from_indices(12, [0, 1, 3])
    assert 0 <= bottleneck(c, L) <= 1
