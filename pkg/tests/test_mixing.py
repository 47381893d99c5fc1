import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from invariants import rng_for
from mdk.chain import hypercube_walk, random_reversible_chain
from mdk.errors import DomainError
from mdk.mixing import (
    EXCEEDED,
    MixingQuery,
    cesaro_bound_check,
    comparison_check,
    comparison_epsilon_limit,
    mixing_time,
    renyi_to_alpha_epsilon,
    spectral_bounds_d_alpha,
    spectral_bounds_r_alpha,
)

FLIP = np.array([[0.0, 1.0], [1.0, 0.0]])
HALF = np.array([0.5, 0.5])


@pytest.mark.parametrize("div,alpha", [("tv", None), ("d_alpha", 2.0), ("r_alpha", 0.5)])
def test_projector_mixes_at_once(div, alpha):
    pi = np.array([0.2, 0.3, 0.5])
    for eps in (1e-9, 0.1):
        r = mixing_time(np.tile(pi, (3, 1)), pi, MixingQuery(div, eps, alpha=alpha))
        assert r.t_exact == 1


def test_flip_chain_never_mixes_but_cesaro_does():
    q = MixingQuery("tv", 0.3, "average", t_cap=1000)
    r = mixing_time(FLIP, HALF, q, bounds=False)
    assert r.t_exact == EXCEEDED and not r.finite
    q = MixingQuery("tv", 0.3, "cesaro", t_cap=1000)
    r = mixing_time(FLIP, HALF, q, bounds=False)
    # Cesaro distance is 0.5 at odd t and 0 at even t
    assert r.t_exact == 2


def test_query_validation():
    with pytest.raises(DomainError):
        MixingQuery("tv", 0.0)
    with pytest.raises(DomainError):
        MixingQuery("d_alpha", 0.1)
    with pytest.raises(DomainError):
        MixingQuery("kl", 0.1)
    with pytest.raises(DomainError):
        MixingQuery("tv", 0.1, mode="median")


def test_hypercube_upper_bound_formula():
    P, pi = hypercube_walk(2)
    sb = spectral_bounds_d_alpha(P, pi, 2.0, 1e-3)
    expected = 2 * (2 * math.log(2) + math.log(4) + math.log(1000))
    assert sb.applicable
    assert sb.upper == pytest.approx(expected, rel=1e-12)
    assert round(sb.upper, 4) == 19.3607


def test_projector_lower_bound_is_zero():
    pi = np.array([0.25, 0.75])
    sb = spectral_bounds_d_alpha(np.tile(pi, (2, 1)), pi, 2.0, 1e-3)
    assert sb.lower == 0.0


def test_epsilon_hypothesis():
    P, pi = hypercube_walk(2)
    assert not spectral_bounds_d_alpha(P, pi, 2.0, 0.5).applicable
    assert not spectral_bounds_d_alpha(P, pi, 0.5, 1.0).applicable
    assert spectral_bounds_d_alpha(P, pi, 0.5, 0.6).applicable
    assert renyi_to_alpha_epsilon(2.0, 0.1) == pytest.approx(math.e**0.1 - 1, rel=1e-14)
    assert round(renyi_to_alpha_epsilon(2.0, 0.1), 7) == 0.1051709
    assert not spectral_bounds_r_alpha(P, pi, 2.0, 0.45).applicable


def test_comparison_examples():
    pi = np.array([0.2, 0.3, 0.5])
    rec = comparison_check(np.tile(pi, (3, 1)), pi, "tv", 1e-4)
    assert rec.holds is True and rec.mid == 1 and rec.rhs == 1
    P, pi = hypercube_walk(3)
    rec = comparison_check(P, pi, "tv", pi.min() ** 3 / 8)
    assert rec.holds is True
    assert rec.mid == oracles.mixing_scan(P, pi, pi.min() ** 3 / 8, "tv", mode="average")
    assert rec.rhs == oracles.mixing_scan(P, pi, pi.min() ** 3 / 8, "tv", mode="worst_case")
    assert comparison_check(P, pi, "tv", 0.4).holds == "not_applicable"
    assert comparison_epsilon_limit("tv", 0.5) == 0.5**3 / 4


def test_cesaro_prefactor():
    P, pi = hypercube_walk(2)
    chk = cesaro_bound_check(P, pi, 0.25)
    b = chk.by_name("tv_worst")
    worst = oracles.mixing_scan(P, pi, 0.25, "tv", mode="worst_case")
    assert b.bound == pytest.approx(8 * worst)
    assert b.holds is True


@settings(max_examples=25)
@given(st.integers(0, 10**6), st.sampled_from([("tv", None), ("d_alpha", 2.0), ("r_alpha", 0.5),
                                               ("d_alpha", 0.5)]),
       st.sampled_from(["average", "worst_case"]), st.sampled_from([0.1, 0.01, 1e-3]))
def test_scan_matches_matrix_power_oracle(seed, div_alpha, mode, eps):
    div, alpha = div_alpha
    rng = rng_for(seed)
    P, pi = random_reversible_chain(int(rng.integers(2, 6)), rng)
    r = mixing_time(P, pi, MixingQuery(div, eps, mode, alpha, 5000), bounds=False)
    ref = oracles.mixing_scan(P, pi, eps, div, alpha, mode, 5000)
    assert r.t_exact == (ref if ref is not None else EXCEEDED)
