import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from invariants import check_ergodicity, ergodicity_instance, failures, rng_for
from mdk.chain import random_chain
from mdk.errors import DomainError
from mdk.ergodicity import (
    dobrushin_time,
    dobrushin_tv,
    double_well,
    estimate_eta_f,
    estimate_eta_renyi,
    project_simplex,
)

SYM = np.array([[0.75, 0.25], [0.25, 0.75]])
HALF = np.array([0.5, 0.5])


def test_dobrushin_closed_forms():
    pi = np.array([0.2, 0.3, 0.5])
    assert dobrushin_tv(np.tile(pi, (3, 1))) == 0
    assert dobrushin_tv(np.eye(2)) == 1
    assert dobrushin_tv(SYM) == 0.5


@given(st.integers(0, 10**6))
def test_dobrushin_matches_pairwise_oracle(seed):
    rng = rng_for(seed)
    P = random_chain(int(rng.integers(1, 9)), rng, concentration=0.3)
    assert dobrushin_tv(P) == pytest.approx(oracles.dobrushin_pairwise(P), abs=1e-14)


def test_estimator_examples():
    pi = np.array([0.2, 0.3, 0.5])
    est = estimate_eta_f(np.tile(pi, (3, 1)), pi, "kl", 2, 50)
    assert est.lower == 0 and est.upper == 0
    est = estimate_eta_f(np.eye(3), pi, "kl", 2, 50)
    assert est.lower >= 1 - 1e-6
    est = estimate_eta_f(SYM, HALF, "tv", 4, 200)
    assert abs(est.lower - 0.5) <= 1e-4
    assert est.upper == 0.5
    est = estimate_eta_renyi(np.tile(pi, (3, 1)), pi, 0.5, 2, 50)
    assert est.lower == 0
    est = estimate_eta_renyi(SYM, HALF, 0.5, 4, 200)
    assert 0 <= est.lower <= est.upper <= 0.5


def test_estimator_argument_errors():
    with pytest.raises(DomainError):
        estimate_eta_f(SYM, HALF, "kl", starts=0)
    with pytest.raises(DomainError):
        estimate_eta_renyi(SYM, HALF, 1.0)


def test_estimator_is_thread_independent():
    rng = rng_for(11)
    P, pi = random_chain(4, rng), rng.dirichlet(np.ones(4))
    a = estimate_eta_f(P, pi, "hellinger", 4, 80, seed=3, threads=1)
    b = estimate_eta_f(P, pi, "hellinger", 4, 80, seed=3, threads=4)
    assert a == b


def test_project_simplex():
    v = project_simplex(np.array([[2.0, 0.0, -1.0], [0.2, 0.3, 0.5]]))
    assert np.allclose(v, [[1, 0, 0], [0.2, 0.3, 0.5]])


def test_dobrushin_time_examples():
    pi = np.array([0.2, 0.3, 0.5])
    assert dobrushin_time(np.tile(pi, (3, 1)), 0.5) == 1
    assert dobrushin_time(np.eye(2), 0.5, t_cap=50) == "exceeded_cap"
    with pytest.raises(DomainError):
        dobrushin_time(SYM, 1.5)


@given(st.integers(0, 10**6), st.sampled_from([0.5, 0.1, 1e-3]))
def test_dobrushin_time_matches_scan_and_cap(seed, eps):
    rng = rng_for(seed)
    P = random_chain(int(rng.integers(2, 6)), rng)
    t = dobrushin_time(P, eps)
    assert t == oracles.dobrushin_time_scan(P, eps)
    theta = dobrushin_tv(P)
    if 0 < theta < 1:
        assert t <= math.ceil(math.log(eps) / math.log(theta))


def test_double_well_growth():
    times = [dobrushin_time(double_well(b)[0], 0.5) for b in (1, 2, 4, 8)]
    assert times == sorted(times)
    assert times == [oracles.dobrushin_time_scan(double_well(b)[0], 0.5) for b in (1, 2, 4, 8)]


@settings(max_examples=20)
@given(st.integers(0, 10**6))
def test_ergodicity_invariants(seed):
    bad = failures(check_ergodicity(ergodicity_instance(seed)))
    assert not bad, bad
