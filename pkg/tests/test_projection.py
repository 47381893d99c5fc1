import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from invariants import rng_for
from mdk.chain import classify, random_chain, random_reversible_chain
from mdk.divergence import renyi_div
from mdk.errors import DomainError, InfeasibleError
from mdk.projection import alpha_project, multistart_projection, pythagorean_margin

HALF = np.array([0.5, 0.5])


@pytest.mark.parametrize("alpha", [0.5, 2.0])
def test_reversible_input_is_fixed(alpha):
    rng = rng_for(1)
    L, pi = random_reversible_chain(4, rng)
    res = alpha_project(L, pi, alpha)
    assert np.abs(res.M_star - L).max() <= 1e-8
    assert res.objective <= 1e-12


def test_two_state_example_against_brute_force():
    L = np.array([[0.5, 0.5], [0.7, 0.3]])
    res = alpha_project(L, HALF, 2.0)
    ref, p = oracles.project_two_state_uniform(L, 2.0)
    assert res.objective == pytest.approx(ref, abs=1e-9)
    assert res.M_star[0, 1] == pytest.approx(res.M_star[1, 0], abs=1e-12)
    assert res.M_star[0, 1] == pytest.approx(p, abs=2e-6)
    assert res.converged


@settings(max_examples=30)
@given(st.integers(0, 10**6), st.sampled_from([0.3, 0.5, 2.0, 3.0]))
def test_two_state_general_pi_against_brute_force(seed, alpha):
    rng = rng_for(seed)
    L, pi = random_chain(2, rng), rng.dirichlet(np.ones(2))
    res = alpha_project(L, pi, alpha)
    ref, _ = oracles.project_two_state(L, pi, alpha)
    assert res.objective == pytest.approx(ref, abs=1e-8)
    assert classify(res.M_star, pi, 1e-9).reversible


def test_history_and_result_fields():
    rng = rng_for(2)
    L, pi = random_chain(4, rng), rng.dirichlet(np.ones(4))
    res = alpha_project(L, pi, 2.0, probes=4, seed=1)
    h = np.asarray(res.history)
    assert np.all(np.diff(h) <= 0)
    assert res.objective <= res.initial_objective + 1e-15
    assert res.objective == pytest.approx(renyi_div(res.M_star, L, pi, 2.0), rel=1e-10)
    assert res.pythagorean_margin is not None


def test_infeasible_support():
    # row 0 may only move to state 1, which never moves back
    L = np.array([[0.0, 1.0], [0.0, 1.0]])
    with pytest.raises(InfeasibleError):
        alpha_project(L, HALF, 2.0)
    res = alpha_project(L, HALF, 0.5)
    assert np.isfinite(res.objective)


def test_argument_errors():
    L = np.array([[0.5, 0.5], [0.7, 0.3]])
    with pytest.raises(DomainError):
        alpha_project(L, HALF, 1.0)
    with pytest.raises(DomainError):
        alpha_project(L, [1.0, 0.0], 2.0)
    with pytest.raises(DomainError):
        multistart_projection(L, HALF, 2.0, starts=-1)


def test_multistart_thread_independent():
    rng = rng_for(3)
    L, pi = random_chain(3, rng), rng.dirichlet(np.ones(3))
    b1, s1, _ = multistart_projection(L, pi, 0.5, 3, seed=5, threads=1)
    b4, s4, _ = multistart_projection(L, pi, 0.5, 3, seed=5, threads=4)
    assert np.array_equal(b1.M_star, b4.M_star) and s1 == s4
    assert s1 <= 1e-6


def test_pythagorean_margin_two_state_uniform():
    rng = rng_for(4)
    for alpha in (0.5, 2.0):
        L = random_chain(2, rng)
        res = alpha_project(L, HALF, alpha)
        assert pythagorean_margin(L, HALF, alpha, res.M_star, 16) >= -1e-7


def test_pythagorean_inequality_can_fail_for_three_states():
    # a documented counterexample: the margin is clearly negative
    L = np.array([[0.1, 0.6, 0.3], [0.3, 0.3, 0.4], [0.5, 0.25, 0.25]])
    pi = np.full(3, 1 / 3)
    res = alpha_project(L, pi, 2.0)
    assert res.converged
    assert pythagorean_margin(L, pi, 2.0, res.M_star, 64) < -1e-3
