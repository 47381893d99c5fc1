"""Exact mixing times and their spectral bounds.

Mixing times are found by an exhaustive scan over ``t = 1, 2, ...`` with a
running matrix product, so no monotonicity of the divergence along ``t`` is
assumed.  Three distances to the stationary projector ``Pi`` are supported:

``tv``
    total variation ``(1/2) sum_x pi(x) sum_y |P^t(x, y) - pi(y)|``;
``d_alpha``
    alpha-divergence ``D_alpha(P^t || Pi)``;
``r_alpha``
    Renyi divergence ``R_alpha(P^t || Pi)``.

``average`` weights start states by ``pi``, ``worst_case`` maximises over
them and ``cesaro`` replaces ``P^t`` by ``(1/t) sum_{s<=t} P^s``.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import expm1, isfinite, log, log1p

import numpy as np

from .chain import STRUCTURE_TOL, as_distribution, as_transition_matrix, classify
from .divergence import ENTRY_FLOOR, renyi_from_alpha_div
from .errors import DomainError
from .spectral import spectrum_reversible

DIVERGENCES = ("tv", "d_alpha", "r_alpha")
MODES = ("average", "worst_case", "cesaro")
DEFAULT_T_CAP = 10**6
EXCEEDED = "exceeded_cap"
# exact repeats of P^t are looked for only in this prefix of the scan
_CYCLE_WINDOW = 4096


@dataclass(frozen=True)
class MixingQuery:
    """What to measure and when to stop.

    Parameters
    ----------
    divergence : {"tv", "d_alpha", "r_alpha"}
    epsilon : float
        Threshold; the mixing time is the first ``t`` with divergence ``< epsilon``.
    mode : {"average", "worst_case", "cesaro"}
    alpha : float, optional
        Order, required for ``d_alpha`` and ``r_alpha``.
    t_cap : int
        Largest ``t`` scanned.
    """

    divergence: str
    epsilon: float
    mode: str = "average"
    alpha: float | None = None
    t_cap: int = DEFAULT_T_CAP

    def __post_init__(self):
        if self.divergence not in DIVERGENCES:
            raise DomainError(f"divergence must be one of {DIVERGENCES}, got {self.divergence!r}")
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (self.epsilon > 0) or not isfinite(self.epsilon):
            raise DomainError("epsilon must be a positive finite number")
        if int(self.t_cap) != self.t_cap or self.t_cap < 1:
            raise DomainError("t_cap must be a positive integer")
        if self.divergence != "tv":
            a = self.alpha
            if a is None or not isfinite(a) or a <= 0 or a == 1:
                raise DomainError("alpha must lie in (0,1) or (1,inf)")


@dataclass(frozen=True)
class SpectralBounds:
    lower: float | None
    upper: float | None
    applicable: bool
    reason: str = ""
    gamma_star: float | None = None
    pi_min: float | None = None
    epsilon_ok: bool = False

    @property
    def inverted(self) -> bool:
        """True when the lower bound exceeds the upper bound."""
        return (self.lower is not None and self.upper is not None
                and self.lower > self.upper)


@dataclass(frozen=True)
class MixingReport:
    """Outcome of one scan plus the spectral sandwich when it applies.

    ``sandwich_holds`` is ``None`` unless the bounds apply and the scan
    terminated; otherwise it is the checked ``lower <= t_exact <= upper``.
    """

    query: MixingQuery
    t_exact: int | str
    divergence_at_t: float
    bound_lower: float | None = None
    bound_upper: float | None = None
    bounds_applicable: bool = False
    bounds_reason: str = ""
    epsilon_condition_met: bool = False
    bounds_inverted: bool = False
    sandwich_holds: bool | None = None
    note: str = ""

    @property
    def finite(self) -> bool:
        return self.t_exact != EXCEEDED


# ---------------------------------------------------------------------------
# distances to the stationary projector


def _alpha_terms(Q, pi, alpha):
    """Row-wise ``sum_y pi(y) f(h)`` with ``h = Q(x, y)/pi(y)``.

    ``f(h) = (h^alpha - 1 - alpha (h - 1)) / (alpha - 1)`` has the same sum as
    the alpha generator because ``sum_y pi(y) (h - 1) = 0``, but every term is
    non-negative, which keeps small divergences accurate.
    """
    Q = np.where(Q < ENTRY_FLOOR, 0.0, Q)
    d = Q / pi[None, :] - 1.0
    with np.errstate(divide="ignore"):
        f = (np.expm1(alpha * np.log1p(d)) - alpha * d) / (alpha - 1.0)
    return (pi[None, :] * np.maximum(f, 0.0)).sum(axis=1)


def row_distances(Q, pi, divergence: str, alpha: float | None = None) -> np.ndarray:
    """Distance from each row of ``Q`` to ``pi``.

    For ``r_alpha`` this is the Renyi divergence of the row; for the other
    two it is the TV distance or the alpha-divergence.
    """
    Q = np.asarray(Q, dtype=float)
    if divergence == "tv":
        return 0.5 * np.abs(Q - pi[None, :]).sum(axis=1)
    rows = _alpha_terms(Q, pi, alpha)
    if divergence == "d_alpha":
        return rows
    return np.array([renyi_from_alpha_div(float(v), alpha) for v in rows])


def distance_to_stationary(Q, pi, divergence: str, alpha: float | None = None,
                           mode: str = "average") -> float:
    """Distance of ``Q`` from ``Pi`` under the given weighting.

    ``average`` (also used for Cesaro averages) is the chain divergence
    ``D(Q || Pi)`` under ``pi``; ``worst_case`` is the largest row distance.
    """
    Q = np.asarray(Q, dtype=float)
    if mode == "worst_case":
        return float(np.max(row_distances(Q, pi, divergence, alpha)))
    if divergence == "tv":
        return float(pi @ row_distances(Q, pi, "tv"))
    d = float(pi @ _alpha_terms(Q, pi, alpha))
    if divergence == "d_alpha":
        return d
    return renyi_from_alpha_div(d, alpha)


# ---------------------------------------------------------------------------
# exact scan


def _renormalize_rows(A):
    drift = np.abs(A.sum(axis=1) - 1.0).max()
    if drift > 1e-12:
        A = A / A.sum(axis=1, keepdims=True)
    return A


def scan_mixing_time(P, pi, q: MixingQuery):
    """First ``t`` in ``1..t_cap`` whose distance is below ``q.epsilon``.

    Returns
    -------
    t : int or "exceeded_cap"
    value : float
        Distance at ``t`` (at ``t_cap`` when the cap is hit).
    note : str
        Non-empty when the scan stopped early on an exact cycle of powers.
    """
    A = np.asarray(P, dtype=float)
    power = A.copy()
    total = A.copy() if q.mode == "cesaro" else None
    seen: dict[bytes, int] = {}  # digest of P^t -> t
    value = np.nan
    for t in range(1, int(q.t_cap) + 1):
        target = total / t if total is not None else power
        value = distance_to_stationary(target, pi, q.divergence, q.alpha, q.mode)
        if value < q.epsilon:
            return t, value, ""
        if total is None and t <= _CYCLE_WINDOW:
            # powers that repeat exactly repeat forever, so no later t can cross
            key = hashlib.blake2b(power.tobytes(), digest_size=16).digest()
            if key in seen:
                note = f"P^{t} equals P^{seen[key]} exactly; the distance sequence is periodic"
                return EXCEEDED, value, note
            seen[key] = t
        power = _renormalize_rows(power @ A)
        if total is not None:
            total += power
    return EXCEEDED, value, ""


# ---------------------------------------------------------------------------
# spectral bounds


def _structure(P, pi):
    """Return (gamma_star, pi_min, reason); reason is empty when bounds apply."""
    pred = classify(P, pi, STRUCTURE_TOL)
    pi_min = float(np.min(pi))
    if not pred.reversible:
        return None, pi_min, "chain is not pi-reversible"
    if not pred.irreducible:
        return None, pi_min, "chain is not irreducible"
    if not pred.aperiodic:
        return None, pi_min, "chain is periodic"
    gamma = spectrum_reversible(P, pi).gamma_star
    if gamma <= 0:
        return gamma, pi_min, "absolute spectral gap is zero"
    return gamma, pi_min, ""


def _alpha_epsilon_limit(alpha: float) -> float:
    return min(1.0 / (2.0 * abs(alpha - 1.0)), 4.0 * alpha / abs(alpha - 1.0))


def _lower_scale(gamma: float) -> float:
    """``1 / (2 ln(1/(1-gamma)))``, zero when ``gamma = 1``."""
    if gamma >= 1.0:
        return 0.0
    return 1.0 / (-2.0 * log1p(-gamma))


def _check_alpha(alpha):
    if alpha is None or not isfinite(alpha) or alpha <= 0 or alpha == 1:
        raise DomainError("alpha must lie in (0,1) or (1,inf)")
    return float(alpha)


def _check_epsilon(epsilon):
    if not (epsilon > 0) or not isfinite(epsilon):
        raise DomainError("epsilon must be a positive finite number")
    return float(epsilon)


def d_alpha_bound_formulas(gamma: float, pi_min: float, alpha: float,
                           epsilon: float) -> tuple[float, float]:
    """Spectral (lower, upper) bounds on the average alpha-divergence mixing time.

    The lower bound is clamped at 0.
    """
    if alpha > 1:
        upper = (log(2 * alpha / ((alpha - 1) * pi_min)) + log(1 / epsilon)) / gamma
        lower = _lower_scale(gamma) * (log(pi_min**2 / 8) + log(1 / epsilon))
    else:
        upper = (log(8 * alpha / ((1 - alpha) * pi_min)) + log(1 / epsilon)) / gamma
        lower = _lower_scale(gamma) * (log(pi_min**2 * alpha / 16) + log(1 / epsilon))
    return (lower if lower > 0 else 0.0), upper


def spectral_bounds_d_alpha(P, pi, alpha: float, epsilon: float) -> SpectralBounds:
    """Spectral sandwich for the ``pi``-weighted alpha-divergence mixing time.

    Valid for irreducible, aperiodic, ``pi``-reversible ``P`` when
    ``epsilon < min(1/(2|alpha-1|), 4 alpha/|alpha-1|)``.  Values are still
    returned when only the epsilon condition fails, with ``applicable=False``.

    Examples
    --------
    >>> from mdk.chain import hypercube_walk
    >>> P, pi = hypercube_walk(2)
    >>> round(spectral_bounds_d_alpha(P, pi, 2.0, 1e-3).upper, 4)
    19.3607
    """
    A = as_transition_matrix(P)
    p = as_distribution(pi, A.shape[0], strict=True)
    a, eps = _check_alpha(alpha), _check_epsilon(epsilon)
    eps_ok = eps < _alpha_epsilon_limit(a)
    gamma, pi_min, reason = _structure(A, p)
    if reason:
        return SpectralBounds(None, None, False, reason, gamma, pi_min, eps_ok)
    lower, upper = d_alpha_bound_formulas(gamma, pi_min, a, eps)
    why = "" if eps_ok else "epsilon violates the alpha-dependent limit"
    return SpectralBounds(lower, upper, eps_ok, why, gamma, pi_min, eps_ok)


def renyi_to_alpha_epsilon(alpha: float, epsilon: float) -> float:
    """Threshold ``(exp((alpha-1) eps) - 1)/(alpha-1)`` on ``D_alpha`` matching ``R_alpha < eps``.

    >>> round(renyi_to_alpha_epsilon(2.0, 0.1), 7)
    0.1051709
    """
    a, eps = _check_alpha(alpha), _check_epsilon(epsilon)
    return expm1((a - 1.0) * eps) / (a - 1.0)


def r_alpha_bound_formulas(gamma: float, pi_min: float, alpha: float,
                           epsilon: float) -> tuple[float, float]:
    """Spectral (lower, upper) bounds on the average Renyi mixing time."""
    growth = expm1((alpha - 1) * epsilon)
    if alpha > 1:
        upper = (log(2 * alpha / pi_min) + log(1 / growth)) / gamma
        lower = _lower_scale(gamma) * (log((alpha - 1) * pi_min**2 / 8) + log(1 / growth))
    else:
        upper = (log(8 * alpha / pi_min) + log(1 / -growth)) / gamma
        lower = _lower_scale(gamma) * (
            log(pi_min**2 * alpha * (1 - alpha) / 16) + log(1 / -growth))
    return (lower if lower > 0 else 0.0), upper


def spectral_bounds_r_alpha(P, pi, alpha: float, epsilon: float) -> SpectralBounds:
    """Spectral sandwich for the ``pi``-weighted Renyi mixing time.

    The bounds come from transporting ``epsilon`` to the alpha-divergence
    threshold :func:`renyi_to_alpha_epsilon`, so both ``epsilon`` and the
    transported threshold must satisfy the alpha-divergence condition.
    """
    A = as_transition_matrix(P)
    p = as_distribution(pi, A.shape[0], strict=True)
    a, eps = _check_alpha(alpha), _check_epsilon(epsilon)
    limit = _alpha_epsilon_limit(a)
    moved = renyi_to_alpha_epsilon(a, eps)
    if eps >= limit:
        why = "epsilon violates the alpha-dependent limit"
    elif moved >= limit:
        why = "transported epsilon violates the alpha-dependent limit"
    else:
        why = ""
    gamma, pi_min, reason = _structure(A, p)
    if reason:
        return SpectralBounds(None, None, False, reason, gamma, pi_min, not why)
    lower, upper = r_alpha_bound_formulas(gamma, pi_min, a, eps)
    return SpectralBounds(lower, upper, not why, why, gamma, pi_min, not why)


# ---------------------------------------------------------------------------
# public entry points


def mixing_time(P, pi, q: MixingQuery, *, bounds: bool = True) -> MixingReport:
    """Exact mixing time for ``q`` plus spectral bounds where they apply.

    Bounds are attached for ``mode="average"`` with ``d_alpha`` or
    ``r_alpha`` on irreducible, aperiodic, reversible chains.

    Raises
    ------
    DomainError
        If ``bounds`` is requested and ``P`` is not ``pi``-stationary.

    Examples
    --------
    >>> q = MixingQuery("tv", 0.3, mode="cesaro", t_cap=100)
    >>> mixing_time([[0, 1], [1, 0]], [0.5, 0.5], q).t_exact
    2
    """
    A = as_transition_matrix(P)
    p = as_distribution(pi, A.shape[0], strict=True)
    if bounds and not classify(A, p, STRUCTURE_TOL).stationary:
        raise DomainError("P is not pi-stationary; spectral bounds need stationarity")
    t, value, note = scan_mixing_time(A, p, q)
    report = dict(query=q, t_exact=t, divergence_at_t=value, note=note)
    if not bounds:
        return MixingReport(**report, bounds_reason="bounds not requested")
    if q.mode != "average" or q.divergence == "tv":
        return MixingReport(
            **report, bounds_reason="spectral bounds cover average alpha/Renyi mixing only")
    fn = spectral_bounds_d_alpha if q.divergence == "d_alpha" else spectral_bounds_r_alpha
    sb = fn(A, p, q.alpha, q.epsilon)
    holds = None
    if sb.applicable and t != EXCEEDED:
        holds = bool(sb.lower <= t <= sb.upper)
    return MixingReport(
        **report,
        bound_lower=sb.lower,
        bound_upper=sb.upper,
        bounds_applicable=sb.applicable,
        bounds_reason=sb.reason,
        epsilon_condition_met=sb.epsilon_ok,
        bounds_inverted=sb.inverted,
        sandwich_holds=holds,
    )


def mixing_times(P, pi, queries, *, threads: int = 1, bounds: bool = True) -> list[MixingReport]:
    """Run several queries, optionally on a thread pool; order is preserved."""
    queries = list(queries)
    if threads <= 1 or len(queries) <= 1:
        return [mixing_time(P, pi, q, bounds=bounds) for q in queries]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda q: mixing_time(P, pi, q, bounds=bounds), queries))


# ---------------------------------------------------------------------------
# average versus worst case


def comparison_epsilon_limit(divergence: str, pi_min: float, alpha: float | None = None) -> float:
    """Largest epsilon (exclusive) for the average/worst-case comparison."""
    if divergence == "tv":
        return pi_min**3 / 4
    a = _check_alpha(alpha)
    eps0 = min(_alpha_epsilon_limit(a),
               abs(a - 1) * pi_min**6 / (128 * a),
               a * abs(a - 1) * pi_min**6 / 2048)
    if divergence == "d_alpha":
        return eps0
    return log1p((a - 1) * eps0) / (a - 1)


@dataclass(frozen=True)
class ComparisonRecord:
    """``lhs <= mid <= rhs`` with ``lhs = c * t_worst``, ``mid = t_avg``, ``rhs = t_worst``."""

    lhs: float | None
    mid: int | str | None
    rhs: int | str | None
    constant: float | None
    holds: bool | str
    reason: str = ""


def comparison_check(P, pi, divergence: str, epsilon: float, alpha: float | None = None,
                     t_cap: int = DEFAULT_T_CAP) -> ComparisonRecord:
    """Compare the ``pi``-weighted and worst-case mixing times.

    The constant is ``(1 - gamma_star)/2`` for TV and ``(1 - gamma_star)/4``
    for the alpha and Renyi divergences.  ``holds`` is ``"not_applicable"``
    when the chain structure or epsilon is outside the valid range or a scan
    hits the cap.
    """
    A = as_transition_matrix(P)
    p = as_distribution(pi, A.shape[0], strict=True)
    eps = _check_epsilon(epsilon)
    gamma, pi_min, reason = _structure(A, p)
    if reason:
        return ComparisonRecord(None, None, None, None, "not_applicable", reason)
    limit = comparison_epsilon_limit(divergence, pi_min, alpha)
    if not eps < limit:
        return ComparisonRecord(None, None, None, None, "not_applicable",
                                f"epsilon must be below {limit!r}")
    const = (1 - gamma) / (2 if divergence == "tv" else 4)
    avg = mixing_time(A, p, MixingQuery(divergence, eps, "average", alpha, t_cap), bounds=False)
    worst = mixing_time(A, p, MixingQuery(divergence, eps, "worst_case", alpha, t_cap), bounds=False)
    if not (avg.finite and worst.finite):
        return ComparisonRecord(None, avg.t_exact, worst.t_exact, const, "not_applicable",
                                "a scan exceeded its cap")
    lhs = const * worst.t_exact
    holds = bool(lhs <= avg.t_exact <= worst.t_exact)
    return ComparisonRecord(lhs, avg.t_exact, worst.t_exact, const, holds)


# ---------------------------------------------------------------------------
# Cesaro bounds


@dataclass(frozen=True)
class CesaroBound:
    name: str
    cesaro_time: int | str | None
    bound: float | None
    holds: bool | str
    reason: str = ""

    @property
    def margin(self) -> float | None:
        if self.bound is None or not isinstance(self.cesaro_time, int):
            return None
        return self.bound - self.cesaro_time


@dataclass(frozen=True)
class CesaroCheck:
    epsilon: float
    theta: float | None
    bounds: list[CesaroBound] = field(default_factory=list)

    def by_name(self, name: str) -> CesaroBound:
        for b in self.bounds:
            if b.name == name:
                return b
        raise KeyError(name)


def _time(A, p, div, eps, mode, alpha, t_cap):
    return mixing_time(A, p, MixingQuery(div, eps, mode, alpha, t_cap), bounds=False).t_exact


def _bound_entry(name, ces, factor, t_mix, extra=0.0):
    if ces == EXCEEDED or t_mix == EXCEEDED:
        return CesaroBound(name, ces, None, "not_applicable", "a scan exceeded its cap")
    if not isfinite(factor):
        return CesaroBound(name, ces, None, "not_applicable", "bound is infinite")
    bound = factor * t_mix + extra
    return CesaroBound(name, ces, bound, bool(ces <= bound))


def cesaro_bound_check(P, pi, epsilon: float, theta: float | None = None,
                       alpha: float | None = None, t_cap: int = DEFAULT_T_CAP) -> CesaroCheck:
    """Evaluate the Cesaro mixing-time bounds whose hypotheses hold.

    ``tv_worst``
        ``t_ces^TV <= t_mix^TV(worst case) / (eps (1 - 2 eps))`` for ``eps < 1/2``.
    ``tv_scrambling``, ``d_alpha_scrambling``, ``r_alpha_scrambling``
        Need a contraction level ``theta`` with ``eta_TV(P) <= theta < 1``;
        when ``theta`` is omitted the Dobrushin coefficient of ``P`` is used.
        The last two also need ``alpha``.
    """
    from .ergodicity import dobrushin_tv

    A = as_transition_matrix(P)
    p = as_distribution(pi, A.shape[0], strict=True)
    eps = _check_epsilon(epsilon)
    pred = classify(A, p, STRUCTURE_TOL)
    out: list[CesaroBound] = []
    if not (pred.irreducible and pred.stationary):
        reason = "chain must be irreducible and pi-stationary"
        names = ["tv_worst", "tv_scrambling", "d_alpha_scrambling", "r_alpha_scrambling"]
        return CesaroCheck(eps, theta, [CesaroBound(n, None, None, "not_applicable", reason)
                                        for n in names])
    ces_tv = _time(A, p, "tv", eps, "cesaro", None, t_cap)
    if eps < 0.5:
        worst = _time(A, p, "tv", eps, "worst_case", None, t_cap)
        out.append(_bound_entry("tv_worst", ces_tv, 1.0 / (eps * (1 - 2 * eps)), worst))
    else:
        out.append(CesaroBound("tv_worst", ces_tv, None, "not_applicable", "needs epsilon < 1/2"))

    eta = dobrushin_tv(A)
    if theta is None:
        theta = eta
    scrambling_reason = ""
    if not theta < 1:
        scrambling_reason = "needs theta < 1 (scrambling chain)"
    elif theta < eta - 1e-12:
        scrambling_reason = f"theta is below the Dobrushin coefficient {eta!r}"
    if scrambling_reason:
        out.append(CesaroBound("tv_scrambling", ces_tv, None, "not_applicable", scrambling_reason))
    else:
        avg = _time(A, p, "tv", eps, "average", None, t_cap)
        out.append(_bound_entry("tv_scrambling", ces_tv, 1.0 / eps, avg, 1.0 / (1.0 - theta)))
    if alpha is None:
        return CesaroCheck(eps, theta, out)

    a = _check_alpha(alpha)
    d_one = distance_to_stationary(A, p, "d_alpha", a)
    for div, factor in (("d_alpha", d_one / eps), ("r_alpha", (1 + eps) / eps * d_one)):
        name = f"{div}_scrambling"
        ces = _time(A, p, div, eps, "cesaro", a, t_cap)
        if scrambling_reason:
            out.append(CesaroBound(name, ces, None, "not_applicable", scrambling_reason))
            continue
        avg = _time(A, p, div, eps, "average", a, t_cap)
        out.append(_bound_entry(name, ces, factor, avg, 1.0 / (1.0 - theta)))
    return CesaroCheck(eps, theta, out)
