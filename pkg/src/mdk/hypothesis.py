"""Binary hypothesis testing between two transition matrices.

Observations are i.i.d. edge pairs ``(X, Y)`` with ``X ~ pi`` and
``Y | X ~ P(X, .)``; hypothesis ``H_i`` says ``P = P_i``.  Each pair has law
``Q_i(x, y) = pi(x) P_i(x, y)`` under ``H_i``.
"""

from __future__ import annotations

import hashlib
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import lgamma, log

import numpy as np

from .chain import as_distribution, as_transition_matrix, chain_and_pi
from .divergence import kl_div, renyi_div
from .errors import CapacityError, DimensionError, DomainError, UnsupportedError

SAMPLE_CHUNK = 1 << 16
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
ENUMERATION_LOG_CAP = 18.0


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class EdgeSampleBatch:
    """i.i.d. edge pairs drawn from one chain.

    Attributes
    ----------
    pairs : ndarray of int, shape (n, 2)
        Rows are ``(x, y)`` state indices.
    n : int
    seed : int
    source : str
        Hex digest of the ``(pi, P)`` pair that produced the batch.
    """

    pairs: np.ndarray
    n: int
    seed: int
    source: str


def chain_digest(P, pi) -> str:
    h = hashlib.blake2b(digest_size=16)
    h.update(np.ascontiguousarray(pi, dtype=float).tobytes())
    h.update(np.ascontiguousarray(P, dtype=float).tobytes())
    return h.hexdigest()


def _chunk_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *key])))


def _cdf(p):
    c = np.cumsum(p, axis=-1)
    c = c / c[..., -1:]
    c[..., -1] = 1.0
    return c


def _draw_pairs(pi_cdf, row_cdf, u):
    # side="right" never lands on a zero-probability index
    x = np.searchsorted(pi_cdf, u[:, 0], side="right")
    y = np.empty_like(x)
    for s in np.unique(x):
        sel = x == s
        y[sel] = np.searchsorted(row_cdf[s], u[sel, 1], side="right")
    return np.stack([x, y], axis=1)


def _map_chunks(fn, count, threads):
    if threads and threads > 1 and count > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(count)))
    return [fn(i) for i in range(count)]


def sample_edges(P, pi, n: int, seed: int = 0, *, threads: int = 1) -> EdgeSampleBatch:
    """Draw ``n`` i.i.d. pairs by inverse-CDF sampling on ``pi`` then on the row.

    Draws are generated in fixed chunks of ``2**16`` pairs, each with its own
    Philox stream keyed by ``(seed, chunk)``, so the batch does not depend on
    ``threads``.
    """
    A, p = chain_and_pi(P, pi, strict=True)
    if int(n) != n or n < 1:
        raise DomainError("sample size must be a positive integer")
    n = int(n)
    pi_cdf, row_cdf = _cdf(p), _cdf(A)
    chunks = -(-n // SAMPLE_CHUNK)

    def draw(c):
        m = min(SAMPLE_CHUNK, n - c * SAMPLE_CHUNK)
        u = _chunk_rng(seed, c).random((m, 2))
        return _draw_pairs(pi_cdf, row_cdf, u)

    pairs = np.concatenate(_map_chunks(draw, chunks, threads))
    return EdgeSampleBatch(pairs, n, int(seed), chain_digest(A, p))


# ---------------------------------------------------------------------------
# likelihood ratios


@dataclass(frozen=True)
class LRTConfig:
    """Likelihood-ratio test deciding ``H1`` when ``Q1^n / Q0^n > threshold``.

    Ties go to ``H0``.  :meth:`bayes` gives the threshold ``pi0 / pi1`` that
    minimises the prior-weighted error.
    """

    threshold: float
    prior: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        if not (self.threshold > 0 and np.isfinite(self.threshold)):
            raise DomainError("threshold must be a positive finite number")
        _check_prior(self.prior)

    @classmethod
    def bayes(cls, prior=(0.5, 0.5)) -> "LRTConfig":
        p0, p1 = _check_prior(prior)
        return cls(p0 / p1, (p0, p1))


def _check_prior(prior):
    p0, p1 = (float(v) for v in prior)
    if not (0 < p0 < 1 and 0 < p1 < 1) or abs(p0 + p1 - 1.0) > 1e-12:
        raise DomainError("prior must be two weights in (0,1) summing to 1")
    return p0, p1


def _pair_chains(P0, P1, pi):
    A = as_transition_matrix(P0)
    B = as_transition_matrix(P1, A.shape[0])
    p = as_distribution(pi, A.shape[0])
    return A, B, p


def pair_llr_terms(batch: EdgeSampleBatch, P0, P1) -> np.ndarray:
    """``ln(P0(x,y) / P1(x,y))`` per sampled pair; ``pi`` cancels."""
    A = as_transition_matrix(P0)
    B = as_transition_matrix(P1, A.shape[0])
    z = np.asarray(batch.pairs)
    if z.size and (z.min() < 0 or z.max() >= A.shape[0]):
        raise DimensionError("batch refers to states outside the chain")
    a, b = A[z[:, 0], z[:, 1]], B[z[:, 0], z[:, 1]]
    if np.any((a == 0) & (b == 0)):
        raise DomainError("a sampled pair has zero probability under both hypotheses")
    with np.errstate(divide="ignore"):
        return np.log(a) - np.log(b)


def llr(batch: EdgeSampleBatch, P0, P1, pi) -> float:
    """Normalised log-likelihood ratio ``(1/n) sum ln(Q0(z_i) / Q1(z_i))``.

    Returns ``+inf`` when some pair is impossible under ``P1``.

    Raises
    ------
    DomainError
        If the batch contains pairs impossible under each hypothesis, so the
        ratio is ``inf - inf``.
    """
    as_distribution(pi, as_transition_matrix(P0).shape[0])
    terms = pair_llr_terms(batch, P0, P1)
    if np.isposinf(terms).any() and np.isneginf(terms).any():
        raise DomainError("batch contradicts both hypotheses; ratio undefined")
    return float(terms.sum() / batch.n)


@dataclass(frozen=True)
class AEPRecord:
    llr: float
    kl: float
    sample_std: float
    n: int
    seed: int
    z: float
    within: bool


def aep_check(P0, P1, pi, n: int, seed: int = 0, *, sigmas: float = 3.0,
              threads: int = 1) -> AEPRecord:
    """Compare the LLR of ``n`` pairs drawn under ``H0`` with ``KL(P0 || P1)``.

    ``within`` is ``|llr - KL| <= sigmas * s / sqrt(n)`` with ``s`` the
    sample standard deviation of the per-pair terms.
    """
    batch = sample_edges(P0, pi, n, seed, threads=threads)
    terms = pair_llr_terms(batch, P0, P1)
    kl = kl_div(P0, P1, pi)
    mean = float(terms.mean())
    if not np.isfinite(mean):
        return AEPRecord(mean, kl, np.nan, batch.n, batch.seed, np.nan, mean == kl)
    s = float(terms.std(ddof=1)) if batch.n > 1 else 0.0
    dev = abs(mean - kl)
    z = dev / (s / np.sqrt(batch.n)) if s > 0 else (0.0 if dev == 0 else np.inf)
    return AEPRecord(mean, kl, s, batch.n, batch.seed, float(z), bool(z <= sigmas))


# ---------------------------------------------------------------------------
# Chernoff information


@dataclass(frozen=True)
class ChernoffResult:
    """Maximum of ``g(a) = -ln sum pi P0**a P1**(1-a)`` over ``a`` in [0, 1].

    ``infinite`` is set when the supports of the edge measures are disjoint.
    """

    value: float
    alpha_star: float
    evaluations: int
    infinite: bool = False


class ChernoffCurve:
    """Evaluator of ``g`` with the limit values at the endpoints."""

    def __init__(self, P0, P1, pi):
        A, B, p = _pair_chains(P0, P1, pi)
        Q0, Q1 = p[:, None] * A, p[:, None] * B
        both = (Q0 > 0) & (Q1 > 0)
        self.log_q0 = np.log(Q0[both])
        self.log_q1 = np.log(Q1[both])
        self.g0 = _neg_log(Q1[Q0 > 0].sum())
        self.g1 = _neg_log(Q0[Q1 > 0].sum())
        self.disjoint = not both.any()
        self.evaluations = 0

    def __call__(self, a: float) -> float:
        self.evaluations += 1
        if a <= 0.0:
            return self.g0
        if a >= 1.0:
            return self.g1
        if self.disjoint:
            return np.inf
        e = a * self.log_q0 + (1.0 - a) * self.log_q1
        m = e.max()
        return max(-(m + log(np.exp(e - m).sum())), 0.0)

    def grid(self, alphas) -> np.ndarray:
        return np.array([self(a) for a in alphas])


def _neg_log(s: float) -> float:
    return np.inf if s <= 0 else max(-log(s), 0.0)


def chernoff_information(P0, P1, pi, tol: float = 1e-10) -> ChernoffResult:
    """Chernoff information ``max_a (1-a) R_a(P0 || P1)`` by golden section.

    ``g`` is concave on [0, 1], so golden-section search on the open interval
    finds its maximum; the endpoint limits are compared afterwards.

    >>> P0 = [[0.75, 0.25], [0.25, 0.75]]; P1 = [[0.25, 0.75], [0.75, 0.25]]
    >>> r = chernoff_information(P0, P1, [0.5, 0.5])
    >>> round(r.value, 10), round(r.alpha_star, 6)
    (0.1438410362, 0.5)
    """
    if not tol > 0:
        raise DomainError("tolerance must be positive")
    g = ChernoffCurve(P0, P1, pi)
    if g.disjoint:
        return ChernoffResult(np.inf, 0.5, 0, True)
    lo, hi = 0.0, 1.0
    c, d = hi - GOLDEN * (hi - lo), lo + GOLDEN * (hi - lo)
    gc, gd = g(c), g(d)
    while hi - lo >= tol:
        if gc >= gd:
            hi, d, gd = d, c, gc
            c = hi - GOLDEN * (hi - lo)
            gc = g(c)
        else:
            lo, c, gc = c, d, gd
            d = lo + GOLDEN * (hi - lo)
            gd = g(d)
    a = 0.5 * (lo + hi)
    candidates = [(g(a), a), (g.g0, 0.0), (g.g1, 1.0)]
    value, a = max(candidates, key=lambda va: va[0])
    return ChernoffResult(float(value), float(a), g.evaluations, bool(np.isinf(value)))


# ---------------------------------------------------------------------------
# two-state brute-force harness for the KL tradeoff and saddle identities


def _two_state(P0, P1, pi, *, positive=True):
    A, B, p = _pair_chains(P0, P1, pi)
    if A.shape[0] != 2:
        raise UnsupportedError("brute-force harness supports two-state chains only")
    if positive and (np.any(A <= 0) or np.any(B <= 0)):
        raise DomainError("brute-force harness needs strictly positive chains")
    return A, B, p


def _row_kl(a, ref):
    """KL of rows ``(a, 1-a)`` against ``ref``, broadcasting over ``a``."""
    a = np.asarray(a, dtype=float)
    out = np.zeros_like(a)
    for col, q in ((a, ref[0]), (1.0 - a, ref[1])):
        pos = col > 0
        out[pos] += col[pos] * (np.log(col[pos]) - np.log(q))
    return out


def _chain_kl(p, a0, a1, R):
    """``KL(P || R)`` for ``P = [[a0, 1-a0], [a1, 1-a1]]`` on a broadcast grid."""
    return p[0] * _row_kl(a0, R[0]) + p[1] * _row_kl(a1, R[1])


def _zoom_min(fn, resolution: int, width_tol: float = 1e-12, max_rounds: int = 200):
    """Minimise ``fn(a0, a1)`` over the unit square by repeated grid refinement.

    Each round evaluates a ``resolution x resolution`` grid on the current box
    and shrinks the box to two cells around the best point.
    """
    box = np.array([[0.0, 1.0], [0.0, 1.0]])
    best_val, best = np.inf, (0.5, 0.5)
    for _ in range(max_rounds):
        g0 = np.linspace(box[0, 0], box[0, 1], resolution)
        g1 = np.linspace(box[1, 0], box[1, 1], resolution)
        vals = fn(g0[:, None], g1[None, :])
        i, j = np.unravel_index(int(np.argmin(vals)), vals.shape)
        if vals[i, j] <= best_val:
            best_val, best = float(vals[i, j]), (float(g0[i]), float(g1[j]))
        h = np.array([g0[1] - g0[0], g1[1] - g1[0]])
        if h.max() < width_tol:
            break
        centre = np.array(best)
        box = np.stack([np.clip(centre - 2 * h, 0, 1), np.clip(centre + 2 * h, 0, 1)], axis=1)
    return best_val, best


def _golden_min(fn, tol: float = 1e-12):
    """Minimiser of a convex ``fn`` on [0, 1] by golden section; returns ``(value, x)``."""
    lo, hi = 0.0, 1.0
    c, d = hi - GOLDEN * (hi - lo), lo + GOLDEN * (hi - lo)
    fc, fd = fn(c), fn(d)
    while hi - lo >= tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = fn(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + GOLDEN * (hi - lo)
            fd = fn(d)
    x = 0.5 * (lo + hi)
    return min((fn(x), x), (fn(0.0), 0.0), (fn(1.0), 1.0))


def _convex_min_2d(fn, tol: float = 1e-10):
    """Minimise a jointly convex ``fn(a0, a1)`` on the unit square.

    Minimising out ``a1`` keeps the outer function convex, so nested golden
    sections work even where ``fn`` has kinks (a grid zoom can lock onto the
    wrong part of a narrow kinked valley).
    """
    def outer(a0):
        return _golden_min(lambda a1: float(fn(a0, a1)), tol)[0]

    val, a0 = _golden_min(outer, tol)
    _, a1 = _golden_min(lambda a1: float(fn(a0, a1)), tol)
    return val, (a0, a1)


def _as_matrix(a):
    return np.array([[a[0], 1.0 - a[0]], [a[1], 1.0 - a[1]]])


@dataclass(frozen=True)
class TradeoffRecord:
    """Both sides of ``(1-a) R_a(P0||P1) = inf_P {a KL(P||P0) + (1-a) KL(P||P1)}``."""

    alpha: float
    lhs: float
    rhs: float
    gap: float
    minimizer: np.ndarray
    grid_resolution: int


def _check_unit_alpha(alpha):
    a = float(alpha)
    if not 0.0 <= a <= 1.0:
        raise DomainError("alpha must lie in [0, 1]")
    return a


def kl_tradeoff_check(P0, P1, pi, alpha: float, grid_resolution: int = 201) -> TradeoffRecord:
    """Brute-force both sides of the KL tradeoff identity on two states.

    The right side is minimised over all two-state chains, parameterised by
    the first entry of each row, with a refining grid.

    Raises
    ------
    UnsupportedError
        For more than two states.
    """
    A, B, p = _two_state(P0, P1, pi)
    a = _check_unit_alpha(alpha)
    if int(grid_resolution) != grid_resolution or grid_resolution < 5:
        raise DomainError("grid_resolution must be an integer >= 5")
    lhs = 0.0 if a == 1.0 else (1.0 - a) * renyi_div(A, B, p, a)

    def fn(a0, a1):
        return a * _chain_kl(p, a0, a1, A) + (1.0 - a) * _chain_kl(p, a0, a1, B)

    rhs, arg = _zoom_min(fn, int(grid_resolution))
    return TradeoffRecord(a, float(lhs), rhs, abs(lhs - rhs), _as_matrix(arg), int(grid_resolution))


@dataclass(frozen=True)
class SaddleRecord:
    sup_inf: float
    inf_sup: float
    gap: float
    alpha_star: float
    minimizer: np.ndarray


def saddle_check(P0, P1, pi, grid_resolution: int = 201, tol: float = 1e-9) -> SaddleRecord:
    """Compare ``sup_a inf_P F`` with ``inf_P sup_a F`` on two states.

    ``F(a, P) = a KL(P||P0) + (1-a) KL(P||P1)`` is linear in ``a``, so the
    inner supremum is ``max(KL(P||P0), KL(P||P1))``.  The outer supremum of
    the concave map ``a -> inf_P F`` uses golden section, and the convex
    but kinked ``P -> max(KL(P||P0), KL(P||P1))`` nested golden sections.
    """
    A, B, p = _two_state(P0, P1, pi)
    res = int(grid_resolution)

    def inner(a):
        return _zoom_min(lambda u, v: a * _chain_kl(p, u, v, A)
                         + (1.0 - a) * _chain_kl(p, u, v, B), res)[0]

    lo, hi = 0.0, 1.0
    c, d = hi - GOLDEN * (hi - lo), lo + GOLDEN * (hi - lo)
    fc, fd = inner(c), inner(d)
    while hi - lo >= tol:
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = inner(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + GOLDEN * (hi - lo)
            fd = inner(d)
    a_star = 0.5 * (lo + hi)
    sup_inf = max(inner(a_star), inner(0.0), inner(1.0))
    inf_sup, arg = _convex_min_2d(
        lambda u, v: np.maximum(_chain_kl(p, u, v, A), _chain_kl(p, u, v, B)))
    return SaddleRecord(float(sup_inf), float(inf_sup), float(abs(sup_inf - inf_sup)), float(a_star),
                        _as_matrix(arg))


# ---------------------------------------------------------------------------
# Bayes error


@dataclass(frozen=True)
class BayesErrorPoint:
    n: int
    pe: float
    stderr: float
    errors_h0: int
    errors_h1: int
    infinite_h0: int
    infinite_h1: int
    trials: int
    dropped: bool


@dataclass(frozen=True)
class BayesErrorFit:
    """Monte-Carlo Bayes errors of the optimal test and the fitted exponent.

    ``slope`` is the least-squares slope of ``-ln pe`` against ``n`` over the
    points with at least one observed error; ``dropped`` lists the others.
    """

    points: list[BayesErrorPoint]
    slope: float
    slope_stderr: float
    intercept: float
    chernoff: float
    prior: tuple[float, float]
    trials: int
    seed: int
    dropped: list[int] = field(default_factory=list)


def _cell_llr(A, B, p):
    Q0, Q1 = (p[:, None] * A).ravel(), (p[:, None] * B).ravel()
    with np.errstate(divide="ignore"):
        term = np.where((Q0 > 0) & (Q1 > 0), np.log(np.where(Q0 > 0, Q0, 1.0))
                        - np.log(np.where(Q1 > 0, Q1, 1.0)), 0.0)
    return Q0, Q1, term, (Q0 > 0) & (Q1 == 0), (Q0 == 0) & (Q1 > 0)


def _decide_h1(counts, term, only0, only1, log_t):
    """Bayes decisions for a block of count vectors; also flags infinite LLRs."""
    s = counts @ term
    # sums of the same terms in a different order differ by rounding only
    slack = 1e-12 * (1.0 + np.abs(counts) @ np.abs(term))
    h1 = -s > log_t + slack
    pos = counts[:, only0].sum(axis=1) > 0
    neg = counts[:, only1].sum(axis=1) > 0
    h1 = np.where(pos, False, np.where(neg, True, h1))
    return h1, pos | neg


def bayes_error_mc(P0, P1, pi, prior=(0.5, 0.5), n_grid=(4, 8, 16, 32),
                   trials: int = 10**6, seed: int = 0, *, threads: int = 1,
                   chunk: int = 1 << 17) -> BayesErrorFit:
    """Estimate the Bayes error of the optimal likelihood-ratio test.

    For each ``n`` the cell counts of ``n`` pairs are drawn as one multinomial
    vector per trial, under each hypothesis, and the test of
    :meth:`LRTConfig.bayes` is applied.  Trials are split in chunks of
    ``chunk`` with one Philox stream per ``(seed, n index, hypothesis, chunk)``,
    so the result does not depend on ``threads``.
    """
    A, B, p = _pair_chains(P0, P1, pi)
    cfg = LRTConfig.bayes(prior)
    p0, p1 = cfg.prior
    if int(trials) != trials or trials < 1:
        raise DomainError("trials must be a positive integer")
    trials = int(trials)
    ns = [int(n) for n in n_grid]
    if not ns or any(n < 1 for n in ns):
        raise DomainError("n_grid must hold positive integers")
    Q0, Q1, term, only0, only1 = _cell_llr(A, B, p)
    log_t = log(cfg.threshold)
    chunks = -(-trials // chunk)

    def run(job):
        k, h, c = job
        m = min(chunk, trials - c * chunk)
        rng = _chunk_rng(seed, k, h, c)
        counts = rng.multinomial(ns[k], Q1 if h else Q0, size=m).astype(float)
        h1, inf = _decide_h1(counts, term, only0, only1, log_t)
        wrong = ~h1 if h else h1
        return int(wrong.sum()), int(inf.sum())

    jobs = [(k, h, c) for k in range(len(ns)) for h in (0, 1) for c in range(chunks)]
    out = _map_chunks(lambda i: run(jobs[i]), len(jobs), threads)
    tally = {}
    for job, (err, inf) in zip(jobs, out):
        e, i = tally.get(job[:2], (0, 0))
        tally[job[:2]] = (e + err, i + inf)

    points, xs, ys = [], [], []
    for k, n in enumerate(ns):
        e0, i0 = tally[(k, 0)]
        e1, i1 = tally[(k, 1)]
        a_hat, b_hat = e0 / trials, e1 / trials
        pe = p0 * a_hat + p1 * b_hat
        se = np.sqrt((p0**2 * a_hat * (1 - a_hat) + p1**2 * b_hat * (1 - b_hat)) / trials)
        dropped = e0 + e1 == 0
        points.append(BayesErrorPoint(n, pe, float(se), e0, e1, i0, i1, trials, dropped))
        if not dropped:
            xs.append(n)
            ys.append(-log(pe))
    slope, slope_se, icpt = _fit_line(xs, ys)
    c = chernoff_information(A, B, p).value
    return BayesErrorFit(points, slope, slope_se, icpt, c, (p0, p1), trials, int(seed),
                         [pt.n for pt in points if pt.dropped])


def _fit_line(xs, ys):
    """Least-squares slope, its standard error and the intercept."""
    x, y = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if x.size < 2 or np.ptp(x) == 0:
        return np.nan, np.nan, np.nan
    xc = x - x.mean()
    slope = float(xc @ (y - y.mean()) / (xc @ xc))
    icpt = float(y.mean() - slope * x.mean())
    if x.size < 3:
        return slope, np.nan, icpt
    resid = y - (icpt + slope * x)
    s2 = float(resid @ resid) / (x.size - 2)
    return slope, float(np.sqrt(s2 / (xc @ xc))), icpt


def bayes_error_exact(P0, P1, pi, prior=(0.5, 0.5), n: int = 1) -> float:
    """Exact minimum Bayes error ``sum_z min(pi0 Q0^n(z), pi1 Q1^n(z))``.

    Sequences are grouped by type (cell counts), so the cost is the number
    of types; the enumeration is refused when ``n ln(k) > 18`` with ``k``
    the number of cells.
    """
    A, B, p = _pair_chains(P0, P1, pi)
    p0, p1 = _check_prior(prior)
    if int(n) != n or n < 1:
        raise DomainError("n must be a positive integer")
    n = int(n)
    Q0, Q1 = (p[:, None] * A).ravel(), (p[:, None] * B).ravel()
    k = Q0.size
    if n * log(k) > ENUMERATION_LOG_CAP:
        raise CapacityError(f"enumeration of {k}**{n} outcomes exceeds the cap")
    with np.errstate(divide="ignore"):
        l0, l1 = np.log(Q0), np.log(Q1)
    total = 0.0
    for combo in itertools.combinations_with_replacement(range(k), n):
        c = np.bincount(combo, minlength=k)
        used = c > 0
        logm = lgamma(n + 1) - sum(lgamma(v + 1) for v in c[used])
        a = log(p0) + logm + float(c[used] @ l0[used])
        b = log(p1) + logm + float(c[used] @ l1[used])
        total += np.exp(min(a, b))
    return float(total)
