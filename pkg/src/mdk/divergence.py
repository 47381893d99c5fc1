"""f-divergences, alpha-divergences and Renyi divergences.

Between probability vectors ``mu, nu`` the f-divergence is
``sum nu f(mu / nu)`` with the conventions ``0 f(0/0) = 0`` and
``0 f(a/0) = a f'(+inf)``.  Between transition matrices ``M, L`` it is the
``pi``-weighted average of the row divergences.  The Renyi divergence of two
chains is the Renyi divergence of their edge measures ``pi(x) M(x, y)``.

Values are floats; ``inf`` marks a support violation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .chain import as_distribution, as_transition_matrix
from .errors import DimensionError, DomainError, GeneratorError

#: probabilities below this are treated as exact zeros for support logic
ENTRY_FLOOR = 1e-15
#: arguments of the Renyi log map at or below this give +inf
LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class Generator:
    """Convex generator ``f`` of an f-divergence.

    Attributes
    ----------
    name : str
    f : callable
        Vectorised ``f(t)`` for ``t >= 0`` (``f(0)`` is the right limit).
    f_prime_inf : float
        ``lim_{x -> 0+} x f(1/x)``; may be ``inf``.
    df : callable, optional
        Derivative of ``f``; required for gradient-based estimators.
    alpha : float, optional
        Order, for the alpha family.
    """

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    f_prime_inf: float
    df: Callable[[np.ndarray], np.ndarray] | None = None
    alpha: float | None = None

    def conjugate_slope(self, t):
        """``f(t) - t f'(t)``, the derivative of ``nu f(mu/nu)`` in ``nu``."""
        t = np.asarray(t, dtype=float)
        return self.f(t) - t * self.df(t)


def _xlogx(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = t[pos] * np.log(t[pos])
    return out


def _kl_df(t):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(t) + 1.0


def alpha_generator(alpha: float) -> Generator:
    """``f(t) = (t**alpha - 1) / (alpha - 1)``."""
    alpha = float(alpha)
    if not np.isfinite(alpha) or alpha <= 0 or alpha == 1:
        raise DomainError(f"alpha must lie in (0,1) or (1,inf), got {alpha}")

    def f(t):
        return (np.power(np.asarray(t, dtype=float), alpha) - 1.0) / (alpha - 1.0)

    def df(t):
        with np.errstate(divide="ignore"):
            return alpha * np.power(np.asarray(t, dtype=float), alpha - 1.0) / (alpha - 1.0)

    return Generator(f"alpha({alpha!r})", f, 0.0 if alpha < 1 else np.inf, df, alpha)


KL = Generator("kl", _xlogx, np.inf, _kl_df)
TV = Generator(
    "tv",
    lambda t: 0.5 * np.abs(np.asarray(t, dtype=float) - 1.0),
    0.5,
    lambda t: 0.5 * np.sign(np.asarray(t, dtype=float) - 1.0),
)


def _hellinger_df(t):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        return 1.0 - 1.0 / np.sqrt(t)


HELLINGER = Generator(
    "hellinger",
    lambda t: (np.sqrt(np.asarray(t, dtype=float)) - 1.0) ** 2,
    1.0,
    _hellinger_df,
)
CHI2 = Generator(
    "chi2",
    lambda t: (np.asarray(t, dtype=float) - 1.0) ** 2,
    np.inf,
    lambda t: 2.0 * (np.asarray(t, dtype=float) - 1.0),
)

_NAMED = {"kl": KL, "tv": TV, "hellinger": HELLINGER, "chi2": CHI2}


def custom_generator(f, f_prime_inf: float, df=None, name: str = "custom") -> Generator:
    """Wrap a user generator after probing ``f(1) = 0`` and midpoint convexity.

    Convexity is only checked on 64 points of (0, 10], so passing the check
    is evidence rather than proof.
    """
    f1 = float(np.asarray(f(np.array([1.0])))[0])
    if abs(f1) > 1e-12:
        raise GeneratorError(f"generator must vanish at 1, f(1) = {f1!r}")
    grid = np.linspace(10.0 / 64, 10.0, 64)
    vals = np.asarray(f(grid), dtype=float)
    mid = vals[1:-1]
    chord = 0.5 * (vals[:-2] + vals[2:])
    if np.any(mid > chord + 1e-12 * (1.0 + np.abs(chord))):
        raise GeneratorError("generator failed the midpoint convexity probe")
    if not (f_prime_inf >= 0 or f_prime_inf < 0):
        raise GeneratorError("f'(+inf) must be a number or inf")
    return Generator(name, f, float(f_prime_inf), df)


def generator(spec) -> Generator:
    """Resolve ``"kl"``, ``"tv"``, ``"hellinger"``, ``"chi2"``, ``"alpha:<a>"``
    or a float order into a :class:`Generator`."""
    if isinstance(spec, Generator):
        return spec
    if isinstance(spec, (int, float)):
        return alpha_generator(spec)
    key = str(spec).lower()
    if key in _NAMED:
        return _NAMED[key]
    if key.startswith("alpha"):
        return alpha_generator(float(key.split(":", 1)[1].strip("()")))
    raise GeneratorError(f"unknown generator {spec!r}")


def _support(a):
    return np.where(a < ENTRY_FLOOR, 0.0, a)


def f_div_terms(mu, nu, gen: Generator) -> np.ndarray:
    """Elementwise contributions ``nu f(mu/nu)`` under the support conventions."""
    mu = _support(np.asarray(mu, dtype=float))
    nu = _support(np.asarray(nu, dtype=float))
    out = np.zeros(np.broadcast(mu, nu).shape)
    mu, nu = np.broadcast_arrays(mu, nu)
    both = nu > 0
    ratio = np.divide(mu, nu, out=np.ones_like(mu), where=both)
    out[both] = nu[both] * gen.f(ratio[both])
    orphan = (nu == 0) & (mu > 0)
    if orphan.any():
        # 0 f(a/0) = a f'(+inf); written out to avoid 0 * inf
        out[orphan] = np.inf if np.isinf(gen.f_prime_inf) else mu[orphan] * gen.f_prime_inf
    return out


def f_div_measures(mu, nu, f="kl") -> float:
    """f-divergence from ``nu`` to ``mu`` for probability vectors.

    Examples
    --------
    >>> round(f_div_measures([0.5, 0.5], [0.75, 0.25], "kl"), 10)
    0.1438410362
    """
    gen = generator(f)
    mu = np.asarray(mu, dtype=float).ravel()
    nu = np.asarray(nu, dtype=float).ravel()
    if mu.shape != nu.shape:
        raise DimensionError("measures live on different spaces")
    return max(float(f_div_terms(mu, nu, gen).sum()), 0.0)


def _chain_pair(M, L, pi):
    A = as_transition_matrix(M)
    B = as_transition_matrix(L, A.shape[0])
    p = as_distribution(pi, A.shape[0])
    return A, B, p


def f_div_chains(M, L, pi, f="kl") -> float:
    """``sum_x pi(x) D_f(M(x, .) || L(x, .))``."""
    A, B, p = _chain_pair(M, L, pi)
    rows = f_div_terms(A, B, generator(f)).sum(axis=1)
    with np.errstate(invalid="ignore"):
        val = float(np.sum(np.where(p > 0, p * rows, 0.0)))
    return max(val, 0.0)


def _canonical_alpha(alpha):
    if isinstance(alpha, str):
        key = alpha.strip().lower()
        if key in ("0", "zero"):
            return 0.0
        if key in ("1", "one", "kl"):
            return 1.0
        if key in ("inf", "infinity", "+inf"):
            return np.inf
        alpha = float(key)
    alpha = float(alpha)
    if np.isnan(alpha) or alpha < 0:
        raise DomainError(f"Renyi order must be non-negative, got {alpha}")
    return alpha


def _moment_terms(mu, nu, alpha):
    mu = _support(np.asarray(mu, dtype=float))
    nu = _support(np.asarray(nu, dtype=float))
    if alpha > 1 and np.any((mu > 0) & (nu == 0)):
        return None
    both = (mu > 0) & (nu > 0)
    return mu[both], nu[both]


def log_alpha_moment(mu, nu, alpha: float) -> float:
    """``ln sum mu**alpha nu**(1-alpha)`` evaluated in log space.

    Returns ``inf`` for ``alpha > 1`` when ``mu`` charges a point ``nu``
    does not, and ``-inf`` when the supports are disjoint.
    """
    terms = _moment_terms(mu, nu, alpha)
    if terms is None:
        return np.inf
    m_, n_ = terms
    if m_.size == 0:
        return -np.inf
    e = alpha * np.log(m_) + (1.0 - alpha) * np.log(n_)
    m = e.max()
    return float(m + np.log(np.exp(e - m).sum()))


def alpha_moment(mu, nu, alpha: float) -> float:
    """``sum mu**alpha nu**(1-alpha)`` with the support conventions.

    Summed directly when every term is finite, otherwise through
    :func:`log_alpha_moment` (``nu**(1-alpha)`` overflows for large orders).
    """
    terms = _moment_terms(mu, nu, alpha)
    if terms is None:
        return np.inf
    m_, n_ = terms
    with np.errstate(over="ignore", invalid="ignore"):
        s = float(np.sum(m_**alpha * n_ ** (1.0 - alpha)))
        if np.isfinite(s):
            return s
        return float(np.exp(log_alpha_moment(mu, nu, alpha)))


def alpha_div_measures(mu, nu, alpha: float) -> float:
    """``(sum nu (mu/nu)**alpha - 1) / (alpha - 1)``."""
    a = _canonical_alpha(alpha)
    if a == 0 or a == 1 or np.isinf(a):
        raise DomainError("alpha-divergence needs alpha in (0,1) or (1,inf)")
    s = alpha_moment(mu, nu, a)
    if np.isinf(s):
        return np.inf
    return max((s - 1.0) / (a - 1.0), 0.0)


def alpha_div(M, L, pi, alpha: float) -> float:
    """alpha-divergence from chain ``L`` to chain ``M`` under ``pi``.

    >>> M = [[0.5, 0.5], [0.5, 0.5]]; L = [[0.75, 0.25], [0.25, 0.75]]
    >>> round(alpha_div(M, L, [0.5, 0.5], 2.0), 12)
    0.333333333333
    """
    A, B, p = _chain_pair(M, L, pi)
    a = _canonical_alpha(alpha)
    if a == 0 or a == 1 or np.isinf(a):
        raise DomainError("alpha-divergence needs alpha in (0,1) or (1,inf); "
                          "use renyi_div for the limiting orders")
    return alpha_div_measures(p[:, None] * A, p[:, None] * B, a)


def renyi_div_measures(mu, nu, alpha) -> float:
    """Renyi divergence of order ``alpha`` from ``nu`` to ``mu``.

    ``alpha`` may be 0, 1 or ``inf`` (or the strings ``"0"``, ``"1"``,
    ``"inf"``), which select the limiting formulas.
    """
    a = _canonical_alpha(alpha)
    mu = _support(np.asarray(mu, dtype=float).ravel())
    nu = _support(np.asarray(nu, dtype=float).ravel())
    if mu.shape != nu.shape:
        raise DimensionError("measures live on different spaces")
    if a == 0:
        mass = float(nu[mu > 0].sum())
        return np.inf if mass <= LOG_FLOOR else max(-np.log(mass), 0.0)
    if a == 1:
        if np.any((mu > 0) & (nu == 0)):
            return np.inf
        both = (mu > 0) & (nu > 0)
        return max(float(np.sum(mu[both] * (np.log(mu[both]) - np.log(nu[both])))), 0.0)
    if np.isinf(a):
        if np.any((mu > 0) & (nu == 0)):
            return np.inf
        pos = nu > 0
        return max(float(np.log(np.max(mu[pos] / nu[pos]))), 0.0)
    lm = log_alpha_moment(mu, nu, a)
    if np.isinf(lm) and lm > 0:
        return np.inf
    if lm <= np.log(LOG_FLOOR):
        return np.inf
    return max(float(lm / (a - 1.0)), 0.0)


def renyi_div(M, L, pi, alpha) -> float:
    """Renyi divergence from chain ``L`` to chain ``M``.

    Numeric orders give ``log(1 + (alpha-1) D_alpha) / (alpha-1)`` evaluated
    on the edge measures; 0, 1 and ``inf`` give the limiting formulas
    (1 is the KL divergence).

    >>> M = [[0.5, 0.5], [0.5, 0.5]]; L = [[0.75, 0.25], [0.25, 0.75]]
    >>> round(renyi_div(M, L, [0.5, 0.5], 2), 10)
    0.2876820725
    """
    A, B, p = _chain_pair(M, L, pi)
    return renyi_div_measures(p[:, None] * A, p[:, None] * B, alpha)


def kl_div(M, L, pi) -> float:
    return renyi_div(M, L, pi, 1)


def tv_distance(M, L, pi) -> float:
    """``(1/2) sum pi(x) |M(x, y) - L(x, y)|``."""
    A, B, p = _chain_pair(M, L, pi)
    return float(0.5 * np.sum(p[:, None] * np.abs(A - B)))


def hellinger2(M, L, pi) -> float:
    """Squared Hellinger distance ``sum pi (sqrt M - sqrt L)**2``."""
    A, B, p = _chain_pair(M, L, pi)
    return float(np.sum(p[:, None] * (np.sqrt(A) - np.sqrt(B)) ** 2))


def chi2_div(M, L, pi) -> float:
    """chi-square divergence, equal to the order-2 alpha-divergence."""
    return f_div_chains(M, L, pi, CHI2)


def named_div(M, L, pi, which: str) -> float:
    """One of ``"tv"``, ``"hellinger2"``, ``"chi2"``, ``"kl"``."""
    funcs = {"tv": tv_distance, "hellinger2": hellinger2, "chi2": chi2_div, "kl": kl_div}
    try:
        fn = funcs[which.lower()]
    except KeyError:
        raise DomainError(f"unknown divergence {which!r}") from None
    return fn(M, L, pi)


def renyi_from_alpha_div(d: float, alpha: float) -> float:
    """Monotone map ``d -> log(1 + (alpha-1) d) / (alpha-1)``."""
    if np.isinf(d):
        return np.inf
    arg = 1.0 + (alpha - 1.0) * d
    if arg <= LOG_FLOOR:
        return np.inf
    return float(np.log1p((alpha - 1.0) * d) / (alpha - 1.0))


def alpha_div_from_renyi(r: float, alpha: float) -> float:
    """Inverse of :func:`renyi_from_alpha_div`: ``(exp((alpha-1) r) - 1)/(alpha-1)``."""
    return float(np.expm1((alpha - 1.0) * r) / (alpha - 1.0))
