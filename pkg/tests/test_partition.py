import math

import numpy as np
import pytest

from logitmeta import InputError, SubsetMask
from logitmeta.chain import bottleneck, build_chain, restrict_loop
from logitmeta.convergence import escape_probability, mixing_time
from logitmeta.partition import (
    PQConfig, class_changes, classification_sweep, classify, pipeline_check, run_A_pq,
    structural_subsets, verify_partition,
)
from logitmeta.sim import solve_cw_zeta
from logitmeta import zoo


def test_config_defaults_and_check():
    cfg = PQConfig("n**3", "exp(0.5*n)")
    assert cfg.family == "connected" and cfg.eps == 0.1
    assert cfg.check()
    assert cfg.to_dict()["q"] == "exp(0.5*n)"


@pytest.mark.parametrize("p,q", [("0.5", "exp(n)"), ("n**2", "n"), ("200 - n", "exp(n)")])
def test_config_check_rejects(p, q):
    with pytest.raises(InputError):
        PQConfig(p, q).check()


def test_config_rejects_family_and_eps():
    with pytest.raises(InputError):
        PQConfig("n", "exp(n)", family="greedy")
    with pytest.raises(InputError):
        PQConfig("n", "exp(n)", eps=1.5)


def test_zero_beta_is_stationary_regime():
    g = zoo.make_pure_coordination(6)
    res = run_A_pq(g, 0.0, PQConfig("n**3", "exp(0.5*n)", family="heuristic"))
    assert res.k == 0 and res.stop_reason == "stationary regime"
    assert res.residual.card == g.size


@pytest.mark.parametrize("family", ["exhaustive", "connected", "heuristic"])
def test_deep_minimum_is_never_a_block(family):
    # at large β the minimizer carries more than half of π, so no admissible
    # L contains it, and the sets that avoid it leak into it quickly
    g = zoo.make_ladder2()
    c = build_chain(g, 10.0)
    assert c.pi[0] > 0.5
    res = run_A_pq(g, 10.0, PQConfig("n**3", "exp(0.5*n)", family=family), chain=c)
    assert res.stop_reason == "stationary regime"


def test_pure_coordination_small_connected_blocks():
    g = zoo.make_pure_coordination(4)
    res = run_A_pq(g, 3 * math.log(4), PQConfig("n**3", "exp(0.5*n)", family="connected"))
    assert [b.R.members().tolist() for b in res.blocks] == [[0], [15]]
    assert [b.T.members().tolist() for b in res.blocks] == [[0], [15]]
    assert res.residual.card == 14
    assert res.stop_reason == "no qualifying subset"


def test_ring_heuristic_finds_consensus_blocks():
    n = 8
    cfg = PQConfig("n**3", "exp(0.5*n)", family="heuristic")
    g = zoo.make_ring_coordination(n, 1, 1, 0, 0)
    res = run_A_pq(g, 4 * math.log(n), cfg)
    assert sorted(b.T.members().tolist() for b in res.blocks) == [[0], [g.size - 1]]
    # with a > b the all-plus profile holds more than half of π and is never admissible
    g = zoo.make_ring_coordination(n, 2, 1, 0, 0)
    c = build_chain(g, 4 * math.log(n))
    assert c.pi[0] > 0.5
    res = run_A_pq(g, c.beta, cfg, chain=c)
    assert [b.T.members().tolist() for b in res.blocks] == [[g.size - 1]]
    assert res.residual_eps_times is None


def test_block_fields_are_exact():
    g = zoo.make_pure_coordination(4)
    c = build_chain(g, 3 * math.log(4))
    res = run_A_pq(g, c.beta, PQConfig("n**3", "exp(0.5*n)", family="heuristic"), chain=c)
    for b in res.blocks:
        assert b.B == pytest.approx(bottleneck(c, b.R))
        assert b.t_mix == mixing_time(restrict_loop(c, b.R), 0.1)
        np.testing.assert_allclose(b.escape, escape_probability(c, b.R, b.t_mix))
    assert "blocks" in res.to_dict()


def cw_candidate(n, beta):
    M = zoo.magnetization(n)
    z = solve_cw_zeta(beta * n)
    Rs = [SubsetMask(M > 0), SubsetMask(M < 0)]
    Ts = [SubsetMask(M >= z * n), SubsetMask(M <= -z * n)]
    return Rs, Ts, SubsetMask(np.abs(M) < z * n)


@pytest.mark.parametrize("n", [6, 8])
def test_curie_weiss_candidate_passes(n):
    g = zoo.make_curie_weiss(n)
    Rs, Ts, N = cw_candidate(n, 0.4)
    c = build_chain(g, 0.4)
    rep = verify_partition(g, 0.4, Rs, Ts, N, "50*n**2", "exp(0.3*n)", 0.1, chain=c)
    assert rep.passed, rep.to_dict()
    assert [x.name for x in rep.conditions] == [
        "bottleneck", "restricted_mixing", "core_stickiness", "residual_escape"]
    assert pipeline_check(c, rep.blocks, rep.q, 0.1).passed


def test_structural_errors_name_the_rule():
    g = zoo.make_curie_weiss(4)
    Rs, Ts, N = cw_candidate(4, 0.4)
    bad_T = [Ts[0].union(SubsetMask.from_indices(16, [15])), Ts[1]]
    with pytest.raises(InputError, match="T_1 is not contained in R_1"):
        verify_partition(g, 0.4, Rs, bad_T, N, "n", "exp(n)", 0.1)
    with pytest.raises(InputError, match="cover"):
        verify_partition(g, 0.4, Rs, Ts, SubsetMask.from_indices(16, []), "n", "exp(n)", 0.1)
    with pytest.raises(InputError, match="overlap"):
        verify_partition(g, 0.4, Rs, Ts, N.union(Ts[0]), "n", "exp(n)", 0.1)
    with pytest.raises(InputError, match="not connected"):
        R = SubsetMask.from_indices(16, [0, 15])
        verify_partition(g, 0.4, [R], [R], R.complement(), "n", "exp(n)", 0.1)


def test_ring_two_block_candidate():
    n = 8
    g = zoo.make_ring_coordination(n, 2, 1, 0, 0)
    beta = 4 * math.log(n)
    p, m = [0], [g.size - 1]
    rest = list(range(1, g.size - 1))
    assert verify_partition(g, beta, [p, m], [p, m], rest, "n**3", "exp(0.5*n)", 0.1).passed


def test_pure_coordination_rest_block_is_not_sticky():
    # the whole rest set cannot be its own core: a one-flip profile falls into
    # consensus within one restricted mixing time with probability > ε
    n = 6
    g = zoo.make_pure_coordination(n)
    beta = 3 * math.log(n)
    rest = list(range(1, g.size - 1))
    rep = verify_partition(g, beta, [[0], [63], rest], [[0], [63], rest], [],
                           "n**3", "exp(0.5*n)", 0.1)
    names = {c.name: c.passed for c in rep.conditions}
    assert names == {"bottleneck": True, "restricted_mixing": True,
                     "core_stickiness": False, "residual_escape": True}


def test_classify_labels():
    assert classify(0.5, 10, 100) == "poly-side"
    assert classify(0.001, 10, 100) == "super-side"
    assert classify(0.05, 10, 100) == "unclassified"
    assert classify(0.05, 100, 10) == "both"


def test_structural_subsets_names():
    names = set(structural_subsets(zoo.make_curie_weiss(4)))
    assert {"consensus_first", "consensus_last", "magnetization_pos", "magnetization_neg",
            "sublevel_0"} <= names


def test_counterexample_sweep_column():
    eps = 0.1
    rows = classification_sweep("counterexample", range(4, 9), "5",
                                {"j1": ("n", "exp(log(n)*log(n))")},
                                subsets=["consensus_last"], params={"eps": eps})
    assert [r.n for r in rows] == list(range(4, 9))
    for r in rows:
        T = zoo.schedule_T(r.n, eps)
        assert r.B == pytest.approx(eps / T, rel=1e-10)
    assert class_changes(rows, "consensus_last", "j1") == [(7, "super-side", "unclassified")]


def test_curie_weiss_sweep_decays():
    rows = classification_sweep("curie_weiss", range(6, 13), "2/n", {"a": ("n**2", "exp(0.3*n)")},
                                subsets=["magnetization_pos"])
    B = [r.B for r in rows]
    assert all(a > b for a, b in zip(B, B[1:]))


@pytest.mark.parametrize("family,params", [
    ("pure_coordination", {}), ("curie_weiss", {}), ("ring_coordination", {"a": 2, "b": 1}),
])
def test_zero_beta_sweep_is_poly_side(family, params):
    rows = classification_sweep(family, range(4, 9), "0", {"lin": ("4*n", "exp(n)")}, params=params)
    assert rows
    assert {r.classes["lin"] for r in rows} == {"poly-side"}
