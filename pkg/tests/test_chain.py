import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from invariants import rng_for
from mdk.chain import (
    as_distribution,
    as_transition_matrix,
    cesaro_average,
    classify,
    edge_measure,
    gibbs_distribution,
    hypercube_walk,
    matrix_power,
    metropolis_chain,
    random_chain,
    random_reversible_chain,
    stationary_distribution,
)
from mdk.errors import CapacityError, DimensionError, DomainError, ReversibilityError

FLIP = np.array([[0.0, 1.0], [1.0, 0.0]])
HALF = np.full((2, 2), 0.5)


def test_edge_measure_examples():
    assert np.array_equal(edge_measure(np.eye(2), [0.5, 0.5]), [[0.5, 0], [0, 0.5]])
    M = [[0.75, 0.25], [0.25, 0.75]]
    assert np.allclose(edge_measure(M, [0.5, 0.5]), [[0.375, 0.125], [0.125, 0.375]], atol=0)


def test_edge_measure_dimension_mismatch():
    with pytest.raises(DimensionError):
        edge_measure(np.eye(2), [1 / 3, 1 / 3, 1 / 3])


@given(st.integers(0, 10**6))
def test_edge_measure_has_unit_mass(seed):
    rng = rng_for(seed)
    n = int(rng.integers(1, 9))
    J = edge_measure(random_chain(n, rng), rng.dirichlet(np.ones(n)))
    assert np.all(J >= 0)
    assert abs(J.sum() - 1) <= 1e-12


def test_validation_errors():
    with pytest.raises(DomainError):
        as_transition_matrix([[0.5, 0.6], [0.5, 0.5]])
    with pytest.raises(DomainError):
        as_transition_matrix([[1.5, -0.5], [0.5, 0.5]])
    with pytest.raises(DimensionError):
        as_transition_matrix([[1.0, 0.0]])
    with pytest.raises(DomainError):
        as_distribution([0.5, 0.6])
    with pytest.raises(DomainError):
        as_distribution([1.0, 0.0], strict=True)


def test_hypercube_small_cases():
    P, pi = hypercube_walk(1)
    assert np.allclose(P, HALF) and np.allclose(pi, [0.5, 0.5])
    P, pi = hypercube_walk(2)
    assert np.allclose(np.diag(P), 0.5)
    assert np.allclose(np.sort(P, axis=1), [[0, 0.25, 0.25, 0.5]] * 4)
    assert pi.min() == 0.25
    pred = classify(P, pi)
    assert pred.stationary and pred.reversible and pred.irreducible and pred.aperiodic


def test_hypercube_cap():
    with pytest.raises(CapacityError):
        hypercube_walk(21)
    with pytest.raises(DomainError):
        hypercube_walk(0)


def test_metropolis_examples():
    Q, mu = HALF, np.array([0.5, 0.5])
    assert np.allclose(metropolis_chain(Q, mu, [0.0, 1.0], 0.0), Q)
    P = metropolis_chain(Q, mu, [0.0, 1.0], np.log(2))
    assert np.allclose(P, [[0.75, 0.25], [0.5, 0.5]], atol=1e-15)
    with pytest.raises(DomainError):
        metropolis_chain(Q, mu, [0.0, 1.0], -1.0)
    with pytest.raises(ReversibilityError):
        metropolis_chain([[0.5, 0.5], [0.1, 0.9]], mu, [0.0, 1.0], 1.0)


@given(st.integers(0, 10**6), st.floats(0, 5))
def test_metropolis_is_reversible(seed, beta):
    rng = rng_for(seed)
    n = int(rng.integers(2, 7))
    Q, mu = random_reversible_chain(n, rng)
    U = rng.normal(size=n)
    P = metropolis_chain(Q, mu, U, beta)
    flux = gibbs_distribution(mu, U, beta)[:, None] * P
    assert np.abs(flux - flux.T).max() < 1e-10


def test_matrix_power_examples():
    P = np.array([[0.9, 0.1], [0.3, 0.7]])
    assert np.array_equal(matrix_power(P, 0), np.eye(2))
    assert np.array_equal(matrix_power(P, 1), P)
    assert np.allclose(matrix_power(HALF, 7), HALF, atol=1e-15)
    assert np.allclose(matrix_power(P, 13), np.linalg.matrix_power(P, 13), atol=1e-14)
    with pytest.raises(DomainError):
        matrix_power(P, -1)


def test_cesaro_examples():
    assert np.allclose(cesaro_average(FLIP, 2), HALF)
    assert np.array_equal(cesaro_average(FLIP, 1), FLIP)
    with pytest.raises(DomainError):
        cesaro_average(FLIP, 0)


@given(st.integers(0, 10**6), st.integers(1, 40))
def test_cesaro_is_stochastic(seed, t):
    rng = rng_for(seed)
    A = cesaro_average(random_chain(int(rng.integers(1, 7)), rng), t)
    assert np.abs(A.sum(axis=1) - 1).max() <= 1e-12


def test_classify_examples():
    pred = classify(np.eye(2), [0.5, 0.5])
    assert pred.stationary and pred.reversible
    assert not pred.irreducible and not pred.scrambling
    assert classify(HALF, [0.5, 0.5]).scrambling
    assert classify(FLIP, [0.5, 0.5]).period == 2


def test_stationary_distribution_of_reversible_chain():
    rng = rng_for(5)
    P, pi = random_reversible_chain(5, rng)
    assert np.allclose(stationary_distribution(P), pi, atol=1e-12)
