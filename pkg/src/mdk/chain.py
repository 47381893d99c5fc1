"""Core chain objects: validation, constructors, powers and structural predicates.

Chains are plain ``(n, n)`` float arrays and distributions are ``(n,)`` arrays.
The validators below are the single entry point that enforces stochasticity;
everything downstream assumes validated input.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import gcd

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (
    CapacityError,
    DimensionError,
    DomainError,
    NumericalError,
    ReversibilityError,
)

STOCHASTIC_TOL = 1e-12
STRUCTURE_TOL = 1e-10
HYPERCUBE_MAX_STATES = 2**20


@dataclass(frozen=True)
class StateSpace:
    """Ordered, unique state labels."""

    labels: tuple[str, ...]

    def __post_init__(self):
        if len(self.labels) < 1:
            raise DomainError("state space must contain at least one state")
        if len(set(self.labels)) != len(self.labels):
            raise DomainError("state labels must be unique")

    @classmethod
    def range(cls, n: int) -> "StateSpace":
        return cls(tuple(str(i) for i in range(n)))

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True)
class ChainPredicates:
    stationary: bool
    reversible: bool
    irreducible: bool
    aperiodic: bool
    scrambling: bool
    tolerance: float
    period: int


def as_distribution(pi, n: int | None = None, *, strict: bool = False,
                    tol: float = STOCHASTIC_TOL) -> np.ndarray:
    """Validate a probability vector and return it as a float array.

    Parameters
    ----------
    pi : array_like, shape (n,)
    n : int, optional
        Required length.
    strict : bool
        Require every weight to be strictly positive.
    """
    p = np.asarray(pi, dtype=float)
    if p.ndim != 1:
        raise DimensionError(f"distribution must be 1-d, got shape {p.shape}")
    if n is not None and p.shape[0] != n:
        raise DimensionError(f"distribution has length {p.shape[0]}, expected {n}")
    if not np.all(np.isfinite(p)):
        raise DomainError("distribution contains non-finite weights")
    if np.any(p < 0):
        raise DomainError("distribution contains negative weights")
    if abs(p.sum() - 1.0) > tol:
        raise DomainError(f"distribution sums to {p.sum()!r}, not 1")
    if strict and np.any(p <= 0):
        raise DomainError("distribution must be strictly positive")
    return p


def as_transition_matrix(P, n: int | None = None, *,
                         tol: float = STOCHASTIC_TOL) -> np.ndarray:
    """Validate a row-stochastic matrix and return it as a float array."""
    A = np.asarray(P, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"transition matrix must be square, got shape {A.shape}")
    if n is not None and A.shape[0] != n:
        raise DimensionError(f"transition matrix has {A.shape[0]} states, expected {n}")
    if not np.all(np.isfinite(A)):
        raise DomainError("transition matrix contains non-finite entries")
    if np.any(A < 0):
        raise DomainError("transition matrix contains negative entries")
    dev = np.abs(A.sum(axis=1) - 1.0)
    if np.any(dev > tol):
        row = int(np.argmax(dev))
        raise DomainError(f"row {row} sums to {A[row].sum()!r}, not 1")
    return A


def chain_and_pi(P, pi, *, strict: bool = True):
    """Validate a (matrix, distribution) pair on a common state space."""
    A = as_transition_matrix(P)
    p = as_distribution(pi, A.shape[0], strict=strict)
    return A, p


def edge_measure(M, pi) -> np.ndarray:
    """Joint law ``pi(x) M(x, y)`` of a stationary-started transition."""
    A = as_transition_matrix(M)
    p = as_distribution(pi, A.shape[0])
    return p[:, None] * A


def stationary_projector(pi) -> np.ndarray:
    """Matrix whose every row equals ``pi``."""
    p = as_distribution(pi)
    return np.tile(p, (p.shape[0], 1))


def stationary_distribution(P) -> np.ndarray:
    """Stationary law of an irreducible chain (least-squares solve)."""
    A = as_transition_matrix(P)
    n = A.shape[0]
    system = np.vstack([A.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def hypercube_labels(N: int) -> list[str]:
    """Sign-vector labels in lexicographic order, +1 encoded as bit 1."""
    return ["".join("+" if b else "-" for b in bits)
            for bits in itertools.product((0, 1), repeat=N)]


def hypercube_walk(N: int, max_states: int = HYPERCUBE_MAX_STATES):
    """Lazy random walk on the N-dimensional hypercube.

    A coordinate is picked uniformly and resampled uniformly from {-1, +1},
    so the chain holds with probability 1/2 and moves to each neighbour with
    probability 1/(2N).

    Returns
    -------
    P : ndarray, shape (2**N, 2**N)
    pi : ndarray, shape (2**N,)
        Uniform stationary law.
    """
    if int(N) != N or N < 1:
        raise DomainError("hypercube dimension must be a positive integer")
    N = int(N)
    n = 2**N
    if n > max_states:
        raise CapacityError(f"hypercube with 2**{N} states exceeds cap {max_states}")
    P = np.zeros((n, n))
    idx = np.arange(n)
    P[idx, idx] = 0.5
    for bit in range(N):
        P[idx, idx ^ (1 << bit)] = 1.0 / (2 * N)
    pi = np.full(n, 1.0 / n)
    return P, pi


def gibbs_distribution(mu, U, beta: float) -> np.ndarray:
    """``pi_beta(x)`` proportional to ``mu(x) exp(-beta U(x))``."""
    m = as_distribution(mu)
    u = np.asarray(U, dtype=float)
    if u.shape != m.shape:
        raise DimensionError("energy and base measure have different lengths")
    logw = np.log(m, where=m > 0, out=np.full_like(m, -np.inf)) - beta * u
    logw -= logw.max()
    w = np.exp(logw)
    return w / w.sum()


def metropolis_chain(Q, mu, U, beta: float, *, tol: float = STRUCTURE_TOL) -> np.ndarray:
    """Metropolis-Hastings kernel targeting ``mu * exp(-beta U)``.

    Off-diagonal moves from ``x`` to ``y`` are proposed by ``Q`` and accepted
    with probability ``exp(-beta (U(y) - U(x))_+)``; rejected mass stays on
    the diagonal.
    """
    A = as_transition_matrix(Q)
    m = as_distribution(mu, A.shape[0])
    u = np.asarray(U, dtype=float)
    if u.shape != (A.shape[0],):
        raise DimensionError("energy must have one value per state")
    if beta < 0:
        raise DomainError("inverse temperature must be non-negative")
    flux = m[:, None] * A
    if np.max(np.abs(flux - flux.T)) > tol:
        raise ReversibilityError("proposal kernel is not reversible w.r.t. mu")
    accept = np.exp(-beta * np.maximum(u[None, :] - u[:, None], 0.0))
    P = A * accept
    np.fill_diagonal(P, 0.0)
    diag = 1.0 - P.sum(axis=1)
    if np.any(diag < -1e-12):
        raise NumericalError("negative holding probability in Metropolis kernel")
    P[np.diag_indices_from(P)] = np.maximum(diag, 0.0)
    return P


def _renormalize(A: np.ndarray, tol: float = STOCHASTIC_TOL):
    drift = float(np.max(np.abs(A.sum(axis=1) - 1.0)))
    if drift > tol:
        A = A / A.sum(axis=1, keepdims=True)
    return A, drift


def matrix_power(P, t: int, *, return_drift: bool = False):
    """``P**t`` by repeated squaring.

    Rows are renormalised only when their sums drift from 1 by more than
    1e-12; the observed drift is returned when ``return_drift`` is set.
    """
    A = as_transition_matrix(P)
    if int(t) != t or t < 0:
        raise DomainError("power must be a non-negative integer")
    t = int(t)
    result = np.eye(A.shape[0])
    base = A.copy()
    while t:
        if t & 1:
            result = result @ base
        t >>= 1
        if t:
            base = base @ base
    result, drift = _renormalize(result)
    return (result, drift) if return_drift else result


def cesaro_average(P, t: int) -> np.ndarray:
    """``(1/t) * sum_{s=1}^t P**s`` with a running product."""
    A = as_transition_matrix(P)
    if int(t) != t or t < 1:
        raise DomainError("Cesaro horizon must be a positive integer")
    power = A.copy()
    total = A.copy()
    for _ in range(int(t) - 1):
        power = power @ A
        total += power
    return total / t


def row_overlap(P) -> np.ndarray:
    """``sum_z min(P(x, z), P(y, z))`` for every row pair."""
    A = np.asarray(P, dtype=float)
    if A.shape[0] <= 64:
        return np.minimum(A[:, None, :], A[None, :, :]).sum(axis=2)
    return np.stack([np.minimum(row, A).sum(axis=1) for row in A])


def _period(adj: np.ndarray) -> int:
    # gcd of level[u] + 1 - level[v] over edges inside one strongly connected class
    n = adj.shape[0]
    level = np.full(n, -1)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(adj[u]):
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    g = 0
    for u, v in zip(*np.nonzero(adj)):
        g = gcd(g, int(abs(level[u] + 1 - level[v])))
    return g


def is_irreducible(P) -> bool:
    ncomp, _ = connected_components(np.asarray(P) > 0, directed=True, connection="strong")
    return ncomp == 1


def classify(P, pi, tol: float = STRUCTURE_TOL) -> ChainPredicates:
    """Structural predicates of ``P`` relative to ``pi``.

    ``period`` is the period of the chain when it is irreducible and the
    largest class period otherwise; ``aperiodic`` requires every closed
    class with a cycle to have period 1.
    """
    A = as_transition_matrix(P)
    p = as_distribution(pi, A.shape[0])
    flux = p[:, None] * A
    stationary = bool(np.abs(p @ A - p).sum() <= tol)
    # detailed balance within tol can leave an O(n^2 tol) stationarity defect
    reversible = stationary and bool(np.max(np.abs(flux - flux.T)) <= tol)
    adj = A > 0
    ncomp, labels = connected_components(adj, directed=True, connection="strong")
    irreducible = ncomp == 1
    periods = []
    for c in range(ncomp):
        members = np.flatnonzero(labels == c)
        sub = adj[np.ix_(members, members)]
        if sub.any():
            periods.append(_period(sub))
    period = max(periods) if periods else 0
    aperiodic = bool(periods) and all(d == 1 for d in periods)
    overlap = row_overlap(A)
    scrambling = bool(overlap.min() > tol)
    return ChainPredicates(
        stationary=stationary,
        reversible=reversible,
        irreducible=bool(irreducible),
        aperiodic=aperiodic,
        scrambling=scrambling,
        tolerance=tol,
        period=int(period),
    )


def random_chain(n: int, rng: np.random.Generator, *, concentration: float = 1.0) -> np.ndarray:
    """Chain with i.i.d. Dirichlet rows (strictly positive almost surely)."""
    if int(n) != n or n < 1:
        raise DomainError("number of states must be a positive integer")
    return rng.dirichlet(np.full(int(n), concentration), size=int(n))


def random_reversible_chain(n: int, rng: np.random.Generator, *,
                            zero_fraction: float = 0.0):
    """Random reversible chain from symmetric edge weights.

    Weights ``W = W^T`` are exponential; off-diagonal pairs are zeroed with
    probability ``zero_fraction`` while the diagonal stays positive, so the
    chain is aperiodic.  Then ``P = W / rowsum`` and ``pi`` is proportional
    to the row sums.

    Returns
    -------
    P : ndarray, shape (n, n)
    pi : ndarray, shape (n,)
    """
    if int(n) != n or n < 1:
        raise DomainError("number of states must be a positive integer")
    n = int(n)
    W = rng.exponential(size=(n, n))
    if zero_fraction > 0:
        W[rng.random((n, n)) < zero_fraction] = 0.0
    W = np.triu(W) + np.triu(W, 1).T
    W[np.diag_indices(n)] = np.maximum(W.diagonal(), 1e-3)
    rows = W.sum(axis=1)
    return W / rows[:, None], rows / rows.sum()
