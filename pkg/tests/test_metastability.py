import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from logitmeta import InputError, SubsetMask
from logitmeta.chain import bottleneck, build_chain, connected_subsets, stationary_restricted
from logitmeta.convergence import mixing_time
from logitmeta.metastability import (
    combination_report, convex_combination, drift_curve, is_metastable,
    drift_vs_bottleneck, nu_check, nu_distribution, one_step_drift,
    pseudo_mixing_time, restriction_coupling_check, window_check,
)
from logitmeta import zoo

import oracles

LN2 = math.log(2)


def ladder(beta=LN2):
    return build_chain(zoo.make_ladder2(), beta)


def test_pi_is_metastable_forever():
    c = ladder()
    cert = is_metastable(c, c.pi, 0.0, 500)
    assert cert.passed and cert.observed <= 1e-15
    assert is_metastable(c, c.pi, 0.0, 10**9).mode == "bound"


def test_restricted_measure_drift_below_bottleneck():
    c = ladder()
    L = SubsetMask.from_indices(4, [0, 2])
    mu = stationary_restricted(c.pi, L)
    drift, B = drift_vs_bottleneck(c, L)
    assert drift <= B + 1e-12
    assert is_metastable(c, mu, B, 1).passed


def test_point_mass_at_maximizer_fails_at_once():
    g = zoo.make_ladder2()
    c = build_chain(g, 20.0)
    mu = np.eye(4)[3]
    cert = is_metastable(c, mu, 0.01, 100)
    assert not cert.passed and cert.first_violation == 1


def test_metastable_rejects_bad_input():
    c = ladder()
    with pytest.raises(InputError):
        is_metastable(c, [0.5, 0.5], 0.1, 3)
    with pytest.raises(InputError):
        is_metastable(c, c.pi, 0.1, -1)
    with pytest.raises(InputError):
        is_metastable(c, c.pi, 0.1, 3, mode="fast")


def test_drift_curve_matches_powers():
    c = ladder(1.0)
    mu = np.array([0.7, 0.1, 0.1, 0.1])
    curve = drift_curve(c, mu, 6)
    P = c.dense()
    for t in range(7):
        assert curve[t] == pytest.approx(oracles.tv(mu @ np.linalg.matrix_power(P, t), mu), abs=1e-15)
    assert one_step_drift(c, mu) == pytest.approx(curve[1])


def test_bound_mode_is_conservative():
    c = ladder(1.0)
    mu = np.array([0.7, 0.1, 0.1, 0.1])
    step = is_metastable(c, mu, 1.0, 30, mode="step")
    bound = is_metastable(c, mu, 1.0, 30, mode="bound")
    assert bound.observed >= step.observed - 1e-15


@pytest.mark.parametrize("seed", range(6))
def test_drift_scales_linearly(seed):
    # ‖μP^t − μ‖ <= t ‖μP − μ‖ for every μ and t
    g = zoo.make_random_potential(3, (2, 2, 3), seed=seed)
    c = build_chain(g, 3.0)
    rng = np.random.default_rng(seed)
    for _ in range(5):
        mu = rng.dirichlet(np.ones(c.size))
        delta = one_step_drift(c, mu)
        curve = drift_curve(c, mu, 20)
        assert np.all(curve <= np.arange(21) * delta + 1e-14)


def test_restricted_measures():
    c = ladder()
    np.testing.assert_allclose(stationary_restricted(c.pi, SubsetMask.full(4)), c.pi)
    piL = stationary_restricted(c.pi, SubsetMask.from_indices(4, [0, 2]))
    np.testing.assert_allclose(piL, [2 / 3, 0, 1 / 3, 0])
    np.testing.assert_allclose(stationary_restricted(c.pi, SubsetMask.from_indices(4, [1])), [0, 1, 0, 0])


@pytest.mark.parametrize("beta", [0.0, LN2, 3.0])
@pytest.mark.parametrize("eps", [0.1, 0.25])
def test_pseudo_mixing_from_everywhere_is_mixing(beta, eps):
    c = ladder(beta)
    res = pseudo_mixing_time(c, c.pi, SubsetMask.full(4), eps)
    assert res.finite and res.value == mixing_time(c, eps)


def test_pseudo_mixing_zero_for_sticky_point_mass():
    g = zoo.make_ladder2()
    c = build_chain(g, 30.0)
    assert c.P[0, 0] >= 1 - 0.01
    res = pseudo_mixing_time(c, np.eye(4)[0], [0], 0.01)
    assert res.value == 0


def test_pseudo_mixing_budget():
    c = build_chain(zoo.make_pure_coordination(4), 10.0)
    res = pseudo_mixing_time(c, c.pi, [0], 0.01, budget=3)
    assert not res.finite and res.lower_bound == 4


@pytest.mark.parametrize("n,beta", [(4, 0.5), (4, 1.0), (5, 0.6), (6, 0.5)])
def test_window_stays_within_twice_eps(n, beta):
    # the positive-magnetization half of Curie-Weiss is a sticky basin
    g = zoo.make_curie_weiss(n)
    c = build_chain(g, beta)
    L = SubsetMask(zoo.magnetization(n) > 0)
    mu = stationary_restricted(c.pi, L)
    eps = 0.1
    T = min(int(eps / bottleneck(c, L)), 400)
    assert T >= 1
    assert is_metastable(c, mu, eps, T).passed
    core = SubsetMask(zoo.magnetization(n) == n)
    res = pseudo_mixing_time(c, mu, core, eps, budget=5000)
    assert res.finite
    t0, worst = window_check(c, mu, core, eps, T, t0=res.value)
    assert t0 == res.value
    assert worst <= 2 * eps + 1e-12


def test_convex_combination_trivia():
    a = np.array([0.25, 0.75])
    b = np.array([1.0, 0.0])
    np.testing.assert_array_equal(convex_combination([(1.0, a)]), a)
    out = convex_combination([(0.0, a), (1.0, b)])
    assert out is not b and np.array_equal(out, b)
    with pytest.raises(InputError):
        convex_combination([(0.5, a), (0.6, b)])
    with pytest.raises(InputError):
        convex_combination([])


@pytest.mark.parametrize("seed", range(4))
def test_mixture_inherits_worst_parts(seed):
    g = zoo.make_random_potential(3, (2, 2, 2), seed=seed)
    c = build_chain(g, 3.0)
    L = SubsetMask.from_indices(8, [0, 1, 2, 3])
    parts = [stationary_restricted(c.pi, L), stationary_restricted(c.pi, L.complement())]
    eps_list = [bottleneck(c, L) * 5, bottleneck(c, L.complement()) * 5]
    rep = combination_report(c, [(0.5, parts[0]), (0.5, parts[1])], eps_list, [5, 5])
    assert rep.passed
    assert rep.certificate.observed <= max(rep.part_observed) + 1e-12


def test_nu_single_core_is_mu():
    c = ladder(2.0)
    mu = stationary_restricted(c.pi, SubsetMask.from_indices(4, [0]))
    res = nu_distribution(c, 3, [[0]], [mu], [1, 2, 3], 0.1)
    np.testing.assert_allclose(res.nu, mu)
    assert res.weights.tolist() == [1.0]


def test_nu_symmetric_split():
    g = zoo.make_pure_coordination(2)
    c = build_chain(g, 1.0)
    mus = [np.eye(4)[0], np.eye(4)[3]]
    res = nu_distribution(c, 1, [[0], [3]], mus, [1, 2], 0.1)
    assert abs(res.weights[0] - 0.5) <= 1e-12 and abs(res.weights[1] - 0.5) <= 1e-12


def test_nu_input_errors():
    c = ladder()
    mu = np.eye(4)[0]
    with pytest.raises(InputError):
        nu_distribution(c, 0, [[0]], [mu], [1, 2, 3], 0.1)       # start not in N
    with pytest.raises(InputError):
        nu_distribution(c, 1, [[0]], [mu], [1, 2], 0.1)          # 3 uncovered
    with pytest.raises(InputError):
        nu_distribution(c, 1, [[0, 1]], [mu], [1, 2, 3], 0.1)    # overlap


def test_nu_check_ladder():
    c = ladder(2.0)
    mu = stationary_restricted(c.pi, SubsetMask.from_indices(4, [0]))
    t_star, tv, res = nu_check(c, 3, [[0]], [mu], [1, 2, 3], 0.1)
    assert t_star >= res.T_eps
    assert tv <= 3 * 0.1


def test_coupling_full_space():
    c = ladder()
    rep = restriction_coupling_check(c, SubsetMask.full(4), [0, 1, 2, 4])
    assert rep.passed and rep.coupling_slack == pytest.approx(0.0, abs=1e-15)


def test_coupling_ladder():
    c = ladder()
    rep = restriction_coupling_check(c, [0, 2], [0, 1, 2, 4])
    assert rep.passed
    assert rep.coupling_slack >= -1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([0.5, 2.0, 5.0]))
def test_coupling_property(seed, beta):
    g = zoo.make_random_potential(3, (2, 3, 2), seed=seed)
    c = build_chain(g, beta)
    sets = list(connected_subsets(g.index, SubsetMask.full(g.size), max_size=4))
    L = sets[seed % len(sets)]
    assert restriction_coupling_check(c, L, [0, 1, 3, 8, 20]).passed
    drift, B = drift_vs_bottleneck(c, L)
    assert drift <= B + 1e-12
