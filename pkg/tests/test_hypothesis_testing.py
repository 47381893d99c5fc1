import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

import oracles
from invariants import rng_for
from mdk.chain import random_chain
from mdk.divergence import named_div
from mdk.errors import DomainError, UnsupportedError
from mdk.hypothesis import (
    ChernoffCurve,
    LRTConfig,
    aep_check,
    bayes_error_exact,
    bayes_error_mc,
    chernoff_information,
    kl_tradeoff_check,
    llr,
    sample_edges,
    saddle_check,
)

P0 = np.array([[0.75, 0.25], [0.25, 0.75]])
P1 = P0[::-1].copy()
HALF = np.array([0.5, 0.5])
C_SYM = -math.log(2 * math.sqrt(0.75 * 0.25))


def test_sampling_independence_goodness_of_fit():
    pi = np.array([0.2, 0.3, 0.5])
    Pi = np.tile(pi, (3, 1))
    batch = sample_edges(Pi, pi, 200_000, seed=4)
    counts = np.zeros((3, 3))
    np.add.at(counts, (batch.pairs[:, 0], batch.pairs[:, 1]), 1)
    expected = batch.n * np.outer(pi, pi)
    assert stats.chisquare(counts.ravel(), expected.ravel()).pvalue > 0.001


def test_sampling_determinism_and_support():
    P = np.array([[0.0, 1.0, 0.0], [0.5, 0.0, 0.5], [0.0, 1.0, 0.0]])
    pi = np.array([0.25, 0.5, 0.25])
    a = sample_edges(P, pi, 150_000, seed=9, threads=1)
    b = sample_edges(P, pi, 150_000, seed=9, threads=4)
    assert np.array_equal(a.pairs, b.pairs) and a.source == b.source
    assert np.all(P[a.pairs[:, 0], a.pairs[:, 1]] > 0)
    assert not np.array_equal(a.pairs, sample_edges(P, pi, 150_000, seed=10).pairs)
    with pytest.raises(DomainError):
        sample_edges(P, pi, 0)


def test_llr_examples():
    batch = sample_edges(P0, HALF, 1000, seed=1)
    assert llr(batch, P0, P0, HALF) == 0
    one = sample_edges(P0, HALF, 1, seed=2)
    x, y = one.pairs[0]
    assert llr(one, P0, P1, HALF) == pytest.approx(math.log(P0[x, y] / P1[x, y]), abs=1e-15)
    Z = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert llr(sample_edges(P0, HALF, 500, seed=3), P0, Z, HALF) == math.inf


def test_lrt_config():
    assert LRTConfig.bayes((0.25, 0.75)).threshold == pytest.approx(1 / 3)
    with pytest.raises(DomainError):
        LRTConfig(0.0)
    with pytest.raises(DomainError):
        LRTConfig(1.0, (0.5, 0.6))


def test_aep_symmetric_pair():
    rec = aep_check(P0, P1, HALF, 100_000, seed=0)
    assert rec.kl == pytest.approx(named_div(P0, P1, HALF, "kl"), abs=0)
    assert rec.kl == pytest.approx(0.5 * math.log(3), abs=1e-15)
    assert rec.within


def test_aep_coverage_over_seeds():
    hits = sum(aep_check(P0, P1, HALF, 100_000, s).within for s in range(99))
    assert hits >= 97


def test_chernoff_examples():
    r = chernoff_information(P0, P1, HALF)
    assert round(C_SYM, 10) == 0.1438410362
    assert r.value == pytest.approx(C_SYM, abs=1e-12)
    assert r.alpha_star == pytest.approx(0.5, abs=1e-6)
    assert chernoff_information(P0, P0, HALF).value == 0
    with pytest.raises(DomainError):
        chernoff_information(P0, P1, HALF, tol=0)


def test_chernoff_disjoint_support():
    r = chernoff_information(np.eye(2), np.eye(2)[::-1], HALF)
    assert r.infinite and r.value == math.inf


@given(st.integers(0, 10**6))
def test_chernoff_properties(seed):
    rng = rng_for(seed)
    n = int(rng.integers(2, 6))
    A, B, pi = random_chain(n, rng, concentration=0.5), random_chain(n, rng), rng.dirichlet(np.ones(n))
    r = chernoff_information(A, B, pi)
    curve = ChernoffCurve(A, B, pi)
    grid = curve.grid(np.linspace(0, 1, 101))
    assert r.value >= max(curve.g0, curve.g1) - 1e-12
    assert r.value >= grid.max() - 1e-12
    assert r.value == pytest.approx(curve(r.alpha_star), abs=1e-12)
    assert chernoff_information(B, A, pi).value == pytest.approx(r.value, abs=1e-10)
    assert np.all(np.diff(grid[1:-1], 2) <= 1e-9)
    ref, _ = oracles.chernoff_grid(A, B, pi, points=1001, rounds=8)
    assert r.value == pytest.approx(ref, abs=1e-8)


def test_tradeoff_examples():
    rec = kl_tradeoff_check(P0, P1, HALF, 0.5)
    assert rec.gap < 1e-5
    rec = kl_tradeoff_check(P0, P0, HALF, 0.3)
    assert rec.lhs == 0 and rec.rhs == pytest.approx(0, abs=1e-12)
    rec = kl_tradeoff_check(P0, P1, HALF, 1.0)
    assert rec.lhs == 0 and rec.rhs == pytest.approx(0, abs=1e-12)
    with pytest.raises(UnsupportedError):
        kl_tradeoff_check(np.eye(3), np.eye(3), np.full(3, 1 / 3), 0.5)


def test_saddle_consistency():
    rng = rng_for(8)
    for _ in range(3):
        A, B, pi = random_chain(2, rng), random_chain(2, rng), rng.dirichlet(np.ones(2))
        rec = saddle_check(A, B, pi)
        assert rec.gap <= 1e-4
        assert isinstance(rec.alpha_star, float)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_exact_bayes_error_against_enumeration(n):
    rng = rng_for(n)
    A, B, pi = random_chain(2, rng), random_chain(2, rng), rng.dirichlet(np.ones(2))
    for prior in ((0.5, 0.5), (0.3, 0.7)):
        exact = bayes_error_exact(A, B, pi, prior, n)
        assert exact == pytest.approx(oracles.bayes_error_bruteforce(A, B, pi, prior, n),
                                      abs=1e-14)


@pytest.mark.parametrize("n", [1, 2, 5, 9])
def test_exact_bayes_error_symmetric_binomial(n):
    assert bayes_error_exact(P0, P1, HALF, (0.5, 0.5), n) == pytest.approx(
        oracles.binomial_tail_pe_symmetric(n), abs=1e-14)


def test_mc_identical_hypotheses():
    fit = bayes_error_mc(P0, P0, HALF, (0.3, 0.7), (2, 4, 8), 20_000, seed=2)
    for pt in fit.points:
        assert pt.pe == pytest.approx(0.3, abs=4 * math.sqrt(0.21 / 20_000))
    assert abs(fit.slope) < 0.01


def test_mc_thread_independent_and_exact_at_one():
    a = bayes_error_mc(P0, P1, HALF, (0.5, 0.5), (1, 3), 300_000, seed=5, threads=1)
    b = bayes_error_mc(P0, P1, HALF, (0.5, 0.5), (1, 3), 300_000, seed=5, threads=4)
    assert a == b
    exact = bayes_error_exact(P0, P1, HALF, (0.5, 0.5), 1)
    assert exact == 0.25
    assert abs(a.points[0].pe - exact) <= 3 * a.points[0].stderr


@settings(max_examples=10)
@given(st.integers(0, 10**6))
def test_mc_matches_exact(seed):
    rng = rng_for(seed)
    A, B, pi = random_chain(2, rng), random_chain(2, rng), rng.dirichlet(np.ones(2))
    fit = bayes_error_mc(A, B, pi, (0.4, 0.6), (2,), 100_000, seed=seed)
    exact = bayes_error_exact(A, B, pi, (0.4, 0.6), 2)
    pt = fit.points[0]
    assert abs(pt.pe - exact) <= 4.5 * max(pt.stderr, 1e-6)


@settings(max_examples=10)
@given(st.integers(0, 10**6), st.floats(0.05, 0.95))
def test_tradeoff_sides_match_closed_forms(seed, alpha):
    # the infimum splits over rows: rhs = sum_x pi(x) (-ln Z_x), while
    # lhs = -ln sum_x pi(x) Z_x, with Z_x = sum_y P0^a P1^(1-a)
    rng = rng_for(seed)
    A, B, pi = random_chain(2, rng), random_chain(2, rng), rng.dirichlet(np.ones(2))
    Z = np.sum(A**alpha * B ** (1 - alpha), axis=1)
    rec = kl_tradeoff_check(A, B, pi, alpha)
    assert rec.lhs == pytest.approx(-math.log(pi @ Z), abs=1e-12)
    assert rec.rhs == pytest.approx(float(pi @ -np.log(Z)), abs=1e-9)
    assert rec.rhs >= rec.lhs - 1e-9
