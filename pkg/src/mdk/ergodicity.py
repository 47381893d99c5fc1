"""Ergodicity (contraction) coefficients of transition matrices.

The Dobrushin coefficient has a closed form.  Coefficients for other
divergences are suprema of non-concave ratios, so they are reported as an
interval ``[lower, upper]``: ``lower`` is the best ratio found by multi-start
projected-gradient ascent and ``upper`` is a bound that is valid for every
``P``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import isfinite, log1p

import numpy as np

from .chain import (
    as_distribution,
    as_transition_matrix,
    gibbs_distribution,
    matrix_power,
    metropolis_chain,
    row_overlap,
)
from .divergence import Generator, generator
from .errors import DomainError

DEN_FLOOR = 1e-10          # ascent never enters pairs closer than this
SIMPLEX_FLOOR = 1e-12      # lower bound on every coordinate during ascent
GRAD_TOL = 1e-8
EXCEEDED = "exceeded_cap"


def dobrushin_tv(P) -> float:
    """``(1/2) max_{x,y} sum_z |P(x,z) - P(y,z)|``.

    Evaluated as ``1 - min_{x,y} sum_z min(P(x,z), P(y,z))``, which is the
    same number for stochastic rows and is exactly 1 for orthogonal rows.

    >>> dobrushin_tv([[0.75, 0.25], [0.25, 0.75]])
    0.5
    """
    A = np.asarray(P, dtype=float)
    return float(min(max(1.0 - row_overlap(A).min(), 0.0), 1.0))


@dataclass(frozen=True)
class CoefficientEstimate:
    """Certified interval for a contraction coefficient.

    Attributes
    ----------
    lower : float
        Best ratio found; a valid lower bound.
    upper : float
        Bound valid for every input.
    method : str
    starts, iterations : int
    converged : bool
        Projected-gradient norm below 1e-8 at the best point.
    seed : int
    details : dict
        Method-specific extras (see the estimators).
    """

    lower: float
    upper: float
    method: str
    starts: int
    iterations: int
    converged: bool
    seed: int
    details: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# simplex geometry


def project_simplex(V, lo: float = 0.0) -> np.ndarray:
    """Euclidean projection of each row of ``V`` onto ``{x >= lo, sum x = 1}``."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    n = V.shape[1]
    mass = 1.0 - n * lo
    W = V - lo
    U = -np.sort(-W, axis=1)
    css = np.cumsum(U, axis=1) - mass
    k = np.arange(1, n + 1)
    cond = U - css / k > 0
    rho = n - 1 - np.argmax(cond[:, ::-1], axis=1)
    tau = css[np.arange(V.shape[0]), rho] / (rho + 1)
    X = np.maximum(W - tau[:, None], 0.0) + lo
    return X / X.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# ratio objectives on row-stacked pairs


def _df(gen: Generator):
    if gen.df is not None:
        return gen.df

    def numeric(t):  # central difference with a scale-aware step
        h = 1e-6 * np.maximum(1.0, t)
        lo = np.maximum(t - h, 0.0)
        return (gen.f(t + h) - gen.f(lo)) / (t + h - lo)

    return numeric


class _FRatio:
    """``sum_k w_k D_f(U_k P || V_k P) / sum_k w_k D_f(U_k || V_k)``."""

    def __init__(self, P, gen: Generator, w):
        self.P, self.gen, self.w, self.df = P, gen, w, _df(gen)

    def _parts(self, A, B):
        # cells where both measures vanish (a zero column of P) carry no mass
        live = (A > 0) | (B > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(live, A / np.where(live, B, 1.0), 1.0)
        ft, dfa = self.gen.f(t), self.df(t)
        val = (self.w[:, None] * np.where(live, B * ft, 0.0)).sum()
        ga = self.w[:, None] * np.where(live, dfa, 0.0)
        gb = self.w[:, None] * np.where(live, ft - t * dfa, 0.0)
        return float(val), ga, gb

    def value_grad(self, U, V):
        num, na, nb = self._parts(U @ self.P, V @ self.P)
        den, da, db = self._parts(U, V)
        if den < DEN_FLOOR:
            return -np.inf, None, None
        gU = (na @ self.P.T) / den - num * da / den**2
        gV = (nb @ self.P.T) / den - num * db / den**2
        return num / den, gU, gV


class _RenyiRatio:
    """Ratio of Renyi divergences of the row-stacked pairs under weights ``w``.

    For a single row with weight 1 this is the measure-pair ratio; for ``n``
    rows weighted by ``pi`` it is the chain ratio.
    """

    def __init__(self, P, alpha: float, w):
        self.P, self.a, self.w = P, float(alpha), w

    def _parts(self, A, B):
        a = self.a
        Aa, Ba = A**a, B ** (1.0 - a)
        S = float((self.w[:, None] * Aa * Ba).sum())
        R = np.log(S) / (a - 1.0)
        ga = self.w[:, None] * a * A ** (a - 1.0) * Ba / (S * (a - 1.0))
        gb = self.w[:, None] * Aa * B ** (-a) * ((1.0 - a) / (S * (a - 1.0)))
        return float(R), ga, gb

    def d_alpha(self, U, V):
        S = float((self.w[:, None] * U**self.a * V ** (1.0 - self.a)).sum())
        return (S - 1.0) / (self.a - 1.0)

    def value_grad(self, U, V):
        num, na, nb = self._parts(U @ self.P, V @ self.P)
        den, da, db = self._parts(U, V)
        if not den >= DEN_FLOOR:
            return -np.inf, None, None
        num = max(num, 0.0)
        gU = (na @ self.P.T) / den - num * da / den**2
        gV = (nb @ self.P.T) / den - num * db / den**2
        return num / den, gU, gV


def _pg_norm(U, V, gU, gV):
    """Norm of the projected-gradient map at unit step."""
    dU = project_simplex(U + gU, SIMPLEX_FLOOR) - U
    dV = project_simplex(V + gV, SIMPLEX_FLOOR) - V
    return float(np.sqrt((dU**2).sum() + (dV**2).sum()))


@dataclass
class _Ascent:
    value: float
    U: np.ndarray
    V: np.ndarray
    iterations: int
    pg_norm: float


def _ascend(obj, U, V, iters: int) -> _Ascent:
    """Projected-gradient ascent with backtracking from ``(U, V)``."""
    val, gU, gV = obj.value_grad(U, V)
    step = 1.0
    it = stalled = 0
    for it in range(1, iters + 1):
        if gU is None:
            break
        # moves longer than the simplex diameter are pointless and cost precision
        gmax = max(np.abs(gU).max(), np.abs(gV).max())
        if gmax > 0:
            step = min(step, 2.0 / gmax)
        accepted = False
        while step > 1e-14:
            U2 = project_simplex(U + step * gU, SIMPLEX_FLOOR)
            V2 = project_simplex(V + step * gV, SIMPLEX_FLOOR)
            v2, g2U, g2V = obj.value_grad(U2, V2)
            move = ((U2 - U) * gU).sum() + ((V2 - V) * gV).sum()
            if np.isfinite(v2) and v2 >= val + 1e-4 * move and move > 0:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        gain = v2 - val
        U, V, val, gU, gV = U2, V2, v2, g2U, g2V
        step *= 2.0
        if gain <= 1e-13 * max(1.0, abs(val)):
            stalled += 1
            if stalled >= 5:
                break
        else:
            stalled = 0
    pg = _pg_norm(U, V, gU, gV) if gU is not None else np.inf
    return _Ascent(float(val), U, V, it, pg)


def _random_pair(rng, rows, n):
    """Dirichlet(1) starting rows kept at least ``DEN_FLOOR`` apart in practice."""
    U = rng.dirichlet(np.ones(n), size=rows)
    V = rng.dirichlet(np.ones(n), size=rows)
    return project_simplex(U, SIMPLEX_FLOOR), project_simplex(V, SIMPLEX_FLOOR)


def _multistart(make_obj, rows, n, starts, iters, seed, threads, extra=()):
    """Run seeded starts (plus explicit ``extra`` pairs) and return all results in order."""
    children = np.random.SeedSequence(seed).spawn(starts)

    def run(i):
        obj = make_obj()
        if i < starts:
            rng = np.random.Generator(np.random.Philox(children[i]))
            U, V = _random_pair(rng, rows, n)
        else:
            U, V = extra[i - starts]
        return _ascend(obj, U, V, iters)

    idx = range(starts + len(extra))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, idx))
    return [run(i) for i in idx]


def _best(results):
    # first maximum wins, so the reduction does not depend on scheduling
    k = int(np.argmax([r.value for r in results]))
    return results[k]


def _check_starts(starts, iters):
    if int(starts) != starts or starts < 1:
        raise DomainError("starts must be a positive integer")
    if int(iters) != iters or iters < 0:
        raise DomainError("iters must be a non-negative integer")
    return int(starts), int(iters)


def _best_row_pair(obj_rows, res: _Ascent):
    """Row pair of a matrix optimum with the largest measure ratio."""
    best, pair = -np.inf, None
    for k in range(res.U.shape[0]):
        u, v = res.U[k:k + 1], res.V[k:k + 1]
        val = obj_rows.value_grad(u, v)[0]
        if val > best:
            best, pair = val, (u.copy(), v.copy())
    return best, pair


# ---------------------------------------------------------------------------
# estimators


def estimate_eta_f(P, pi, f="kl", starts: int = 8, iters: int = 500, seed: int = 0,
                   *, threads: int = 1) -> CoefficientEstimate:
    """Lower/upper bounds on the f-divergence contraction coefficient.

    The supremum over chain pairs equals the supremum over measure pairs, and
    both are searched: measure-pair ascent from ``starts`` seeded points, and
    matrix-pair ascent under ``pi``.  Each optimum seeds the other search
    (a measure pair repeated on every row is a matrix pair; the best row of a
    matrix pair is a measure pair whose ratio is at least the matrix ratio).
    ``upper`` is the Dobrushin coefficient.

    ``details`` holds ``measure_lower``, ``matrix_lower`` and ``gap``
    (``matrix_lower - measure_lower`` after cross-seeding).
    """
    A = as_transition_matrix(P)
    n = A.shape[0]
    p = as_distribution(pi, n, strict=True)
    starts, iters = _check_starts(starts, iters)
    gen = generator(f)
    upper = dobrushin_tv(A)
    one = np.ones(1)
    if upper <= 0.0 or n == 1:
        return CoefficientEstimate(0.0, max(upper, 0.0), "closed-form:unit-rank", starts, 0,
                                   True, seed, {"measure_lower": 0.0, "matrix_lower": 0.0,
                                                "gap": 0.0})

    measure = _multistart(lambda: _FRatio(A, gen, one), 1, n, starts, iters, seed, threads)
    m_best = _best(measure)
    chain = _multistart(lambda: _FRatio(A, gen, p), n, n, starts, iters, seed + 1, threads,
                        extra=[(np.repeat(m_best.U, n, 0), np.repeat(m_best.V, n, 0))])
    c_best = _best(chain)
    row_val, pair = _best_row_pair(_FRatio(A, gen, one), c_best)
    if row_val > m_best.value and pair is not None:
        refined = _ascend(_FRatio(A, gen, one), *pair, iters)
        if refined.value > m_best.value:
            m_best = refined
    lower = min(max(m_best.value, c_best.value, 0.0), upper)
    return CoefficientEstimate(
        lower=lower,
        upper=upper,
        method=f"projected-gradient ascent over measure and matrix pairs ({gen.name})",
        starts=starts,
        iterations=m_best.iterations + c_best.iterations,
        converged=bool(m_best.pg_norm < GRAD_TOL),
        seed=seed,
        details={"measure_lower": max(m_best.value, 0.0),
                 "matrix_lower": max(c_best.value, 0.0),
                 "gap": c_best.value - m_best.value},
    )


def estimate_eta_renyi(P, pi, alpha: float, starts: int = 8, iters: int = 500, seed: int = 0,
                       *, threads: int = 1) -> CoefficientEstimate:
    """Lower/upper bounds on the Renyi contraction coefficient over chain pairs.

    ``lower`` comes from matrix-pair ascent under ``pi`` (the Renyi
    divergence of chains is not a row average, so measure pairs only give
    a weaker coefficient).  The measure-pair estimate is kept in
    ``details["measure_lower"]`` and ``details["strict_gap"]`` flags a
    matrix value above it by more than 1e-6.

    ``upper`` is 1 for ``alpha > 1`` and the Dobrushin coefficient for
    ``alpha < 1``.  For ``alpha > 1``, ``details["heuristic_upper"]`` is the
    log-ratio bound evaluated at the best pair found, with the Dobrushin
    coefficient in place of the alpha-divergence coefficient; it is only
    meaningful if that pair is the limit of a maximising sequence.
    """
    A = as_transition_matrix(P)
    n = A.shape[0]
    p = as_distribution(pi, n, strict=True)
    starts, iters = _check_starts(starts, iters)
    a = float(alpha)
    if not isfinite(a) or a <= 0 or a == 1:
        raise DomainError("alpha must lie in (0,1) or (1,inf)")
    eta_tv = dobrushin_tv(A)
    upper = 1.0 if a > 1 else eta_tv
    one = np.ones(1)
    if eta_tv <= 0.0 or n == 1:
        return CoefficientEstimate(0.0, 0.0 if a < 1 else upper, "closed-form:unit-rank", starts,
                                   0, True, seed, {"measure_lower": 0.0, "strict_gap": False})

    measure = _multistart(lambda: _RenyiRatio(A, a, one), 1, n, starts, iters, seed, threads)
    m_best = _best(measure)
    chain = _multistart(lambda: _RenyiRatio(A, a, p), n, n, starts, iters, seed + 1, threads,
                        extra=[(np.repeat(m_best.U, n, 0), np.repeat(m_best.V, n, 0))])
    c_best = _best(chain)
    # a strict gap is only reported after the measure search has also tried
    # the rows of the matrix optimum
    _, pair = _best_row_pair(_RenyiRatio(A, a, one), c_best)
    if pair is not None:
        refined = _ascend(_RenyiRatio(A, a, one), *pair, iters)
        if refined.value > m_best.value:
            m_best = refined
    lower = min(max(c_best.value, m_best.value, 0.0), upper)
    details = {
        "measure_lower": max(m_best.value, 0.0),
        "matrix_lower": max(c_best.value, 0.0),
        "strict_gap": bool(c_best.value > m_best.value + 1e-6),
    }
    if a > 1:
        d = _RenyiRatio(A, a, p).d_alpha(c_best.U, c_best.V)
        if d > 0:
            details["heuristic_upper"] = (log1p((a - 1) * eta_tv * d) / log1p((a - 1) * d))
    return CoefficientEstimate(
        lower=lower,
        upper=upper,
        method=f"projected-gradient ascent over matrix pairs (renyi {a!r})",
        starts=starts,
        iterations=c_best.iterations,
        converged=bool(c_best.pg_norm < GRAD_TOL),
        seed=seed,
        details=details,
    )


# ---------------------------------------------------------------------------
# Dobrushin time


def dobrushin_time(P, epsilon: float, t_cap: int = 10**6) -> int | str:
    """Smallest ``t >= 0`` with ``dobrushin_tv(P**t) < epsilon``.

    The coefficient of ``P**t`` is non-increasing in ``t`` (it is
    submultiplicative and at most 1), so the crossing is located by doubling
    ``t`` and then bisecting.

    Returns
    -------
    int or "exceeded_cap"
    """
    A = as_transition_matrix(P)
    if not 0 < epsilon < 1:
        raise DomainError("epsilon must lie in (0, 1)")
    if int(t_cap) != t_cap or t_cap < 0:
        raise DomainError("t_cap must be a non-negative integer")
    if dobrushin_tv(np.eye(A.shape[0])) < epsilon:
        return 0
    lo, hi = 0, 1          # eta(P^lo) >= eps; hi is the candidate
    power = A.copy()       # P^hi
    while dobrushin_tv(power) >= epsilon:
        if hi >= t_cap:
            return EXCEEDED
        lo, hi = hi, min(2 * hi, int(t_cap))
        power = matrix_power(A, hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if dobrushin_tv(matrix_power(A, mid)) < epsilon:
            hi = mid
        else:
            lo = mid
    return hi


# three-state double well: two minima separated by a unit barrier
DOUBLE_WELL_U = np.array([0.0, 1.0, 0.0])
DOUBLE_WELL_Q = np.array([[0.5, 0.5, 0.0], [0.25, 0.5, 0.25], [0.0, 0.5, 0.5]])
DOUBLE_WELL_MU = np.array([0.25, 0.5, 0.25])


def double_well(beta: float):
    """Metropolis chain on the three-state double well at inverse temperature ``beta``.

    Returns
    -------
    P : ndarray, shape (3, 3)
    pi : ndarray, shape (3,)
        Gibbs law ``mu * exp(-beta U)`` normalised.
    """
    P = metropolis_chain(DOUBLE_WELL_Q, DOUBLE_WELL_MU, DOUBLE_WELL_U, beta)
    return P, gibbs_distribution(DOUBLE_WELL_MU, DOUBLE_WELL_U, beta)
