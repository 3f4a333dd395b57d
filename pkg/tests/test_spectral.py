import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from logitmeta import GameSpec, InputError, SubsetMask
from logitmeta.chain import bottleneck, bottleneck_star, build_chain, connected_subsets, restrict_kill, restrict_loop
from logitmeta.spectral import (
    cheeger_sandwich, dirichlet_form, killed_sandwich, killed_top, lambda_max_killed,
    null_covector, rayleigh_check, rayleigh_quotient, spectrum, trace_and_det_report,
    trace_formula,
)
from logitmeta import zoo

import oracles

LN2 = math.log(2)


def test_single_player_uniform_spectrum():
    g = GameSpec((4,), np.zeros((1, 4)), np.zeros(4))
    ev = spectrum(build_chain(g, 0.0)).eigenvalues
    np.testing.assert_allclose(ev, [1, 0, 0, 0], atol=1e-14)


def test_ladder_zero_beta_spectrum():
    s = spectrum(build_chain(zoo.make_ladder2(), 0.0))
    np.testing.assert_allclose(s.eigenvalues, [1, 0.5, 0.5, 0], atol=1e-14)
    assert s.t_rel == pytest.approx(2.0)
    assert s.symmetric


@pytest.mark.parametrize("seed", range(6))
def test_spectrum_matches_dense_eig(seed):
    g = zoo.make_random_potential(3, (2, 3, 2), seed=seed)
    c = build_chain(g, 2.0)
    want = np.sort(np.linalg.eigvals(c.dense()).real)[::-1]
    np.testing.assert_allclose(spectrum(c).eigenvalues, want, atol=1e-10)


@pytest.mark.parametrize("n", [4, 5, 6])
def test_counterexample_spectrum_in_unit_interval(n):
    c = build_chain(zoo.make_counterexample(n, 5.0, 0.1), 5.0)
    ev = spectrum(c).eigenvalues
    assert ev.min() >= -1e-9 and ev.max() <= 1 + 1e-12


def test_non_reversible_spectrum_reports_kind():
    u0 = [1.0, -1.0, -1.0, 1.0]
    g = GameSpec((2, 2), [u0, [-v for v in u0]])
    s = spectrum(build_chain(g, 1.0))
    assert not s.symmetric
    assert s.eigenvalues[0] == pytest.approx(1.0)


def test_killed_full_space_is_one():
    c = build_chain(zoo.make_ladder2(), 1.0)
    assert lambda_max_killed(restrict_kill(c, SubsetMask.full(4))) == pytest.approx(1.0)


def test_killed_singleton_is_diagonal():
    c = build_chain(zoo.make_ladder2(), LN2)
    assert lambda_max_killed(restrict_kill(c, [0])) == pytest.approx(2 / 3)


def test_killed_top_requires_substochastic():
    c = build_chain(zoo.make_ladder2(), LN2)
    with pytest.raises(InputError):
        killed_top(restrict_loop(c, [0, 1]))


@pytest.mark.parametrize("seed", range(5))
def test_killed_gap_below_bottleneck(seed):
    g = zoo.make_random_potential(3, (2, 2, 3), seed=seed)
    c = build_chain(g, 3.0)
    P = c.dense()
    for L in connected_subsets(g.index, SubsetMask.full(g.size), max_size=4):
        lam = lambda_max_killed(restrict_kill(c, L))
        want = np.linalg.eigvals(P[np.ix_(L, L)]).real.max()
        assert lam == pytest.approx(want, abs=1e-10)
        assert 1 - lam <= bottleneck(c, L) + 1e-10


def test_killed_eigenvector_is_right_eigenvector():
    g = zoo.make_random_potential(3, (2, 2, 2), seed=3)
    c = build_chain(g, 2.0)
    K = restrict_kill(c, [0, 1, 3, 7])
    top = killed_top(K)
    np.testing.assert_allclose(K.P @ top.vector, top.value * top.vector, atol=1e-10)
    assert np.abs(top.vector).max() == pytest.approx(1.0)


def test_dirichlet_form_constant_and_indicator():
    c = build_chain(zoo.make_ladder2(), 0.0)
    assert dirichlet_form(c, c.pi, np.ones(4)) == 0.0
    phi = np.array([0.25, 0, 0, 0])
    # π(L)² Q(L, L̄) with Q = (1/4)(1/2)
    assert dirichlet_form(c, c.pi, phi) == pytest.approx((1 / 16) * (1 / 8))


@pytest.mark.parametrize("x", range(4))
def test_rayleigh_singleton(x):
    c = build_chain(zoo.make_ladder2(), LN2)
    phi = np.zeros(4)
    phi[x] = 1.0
    assert rayleigh_quotient(c, phi) == pytest.approx(1 - c.P[x, x], rel=1e-12)


def test_rayleigh_quotient_above_spectral_gap():
    g = zoo.make_random_potential(3, (2, 3, 2), seed=4)
    c = build_chain(g, 1.0)
    gap = 1 - spectrum(c).lambda2
    rng = np.random.default_rng(0)
    for _ in range(50):
        phi = rng.standard_normal(c.size)
        phi -= np.dot(c.pi, phi)
        assert rayleigh_quotient(c, phi) >= gap - 1e-10


@pytest.mark.parametrize("seed", range(4))
def test_rayleigh_check_random(seed):
    g = zoo.make_random_potential(3, seed=seed)
    c = build_chain(g, 2.0)
    for L in [[0], [0, 1], [0, 1, 3], [1, 3, 5, 7]]:
        assert rayleigh_check(c, L, draws=50, seed=seed).passed


def test_trace_formula_binary():
    for n in range(1, 7):
        assert trace_formula((2,) * n) == 2 ** (n - 1)


def test_trace_single_player():
    g = GameSpec((3,), [[0.0, 1.0, 2.0]], [0.0, -1.0, -2.0])
    rep = trace_and_det_report(g, 0.0)
    assert rep.trace_formula == 1.0
    assert rep.passed
    assert abs(rep.det) <= 1e-12


@pytest.mark.parametrize("counts", [(2, 2), (2, 3), (3, 2, 2), (2, 2, 2, 2)])
def test_trace_det_report(counts):
    g = zoo.make_random_potential(len(counts), counts, seed=len(counts))
    rep = trace_and_det_report(g, 2.0)
    assert rep.passed, rep.checks()
    P = build_chain(g, 5.0).dense()
    assert np.trace(P) == pytest.approx(trace_formula(counts), abs=1e-10)


def test_null_covector_annihilates_brute_matrix():
    g = zoo.make_random_potential(3, (2, 3, 2), seed=1)
    f = null_covector(g.index, anchor=5)
    P = oracles.logit_matrix(g, 1.7)
    assert np.abs(f @ P).max() <= 1e-12


def test_null_covector_needs_two_strategies():
    with pytest.raises(InputError):
        null_covector(GameSpec((1, 2), np.zeros((2, 2))).index)


@pytest.mark.parametrize("seed", range(6))
def test_cheeger_sandwich(seed):
    g = zoo.make_random_potential(3, (2, 2, 3), seed=seed)
    c = build_chain(g, [0.5, 2.0, 5.0][seed % 3])
    rep = cheeger_sandwich(spectrum(c), bottleneck_star(c).value)
    assert rep.passed and rep.slack >= -1e-8


def test_killed_sandwich_ladder():
    c = build_chain(zoo.make_ladder2(), LN2)
    L = SubsetMask.from_indices(4, [0, 2])
    bs = bottleneck_star(c, scope=L).value
    assert killed_sandwich(c, L, bs).passed


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([0.0, 0.5, 2.0, 10.0]))
def test_spectrum_nonnegative_property(seed, beta):
    g = zoo.make_random_potential(3, (2, 3, 3), seed=seed)
    c = build_chain(g, beta)
    assert spectrum(c).eigenvalues.min() >= -1e-9
    L = list(range(0, 18, 3))
    for R in (restrict_loop(c, L), restrict_kill(c, L)):
        assert spectrum(R).eigenvalues.min() >= -1e-9
