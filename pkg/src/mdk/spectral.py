"""Spectra of reversible chains via a symmetric Jacobi eigensolver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import as_distribution, as_transition_matrix, is_irreducible
from .errors import NumericalError, ReversibilityError

OFF_TOL = 1e-12
MAX_SWEEPS = 64
UNIT_TOL = 1e-9


@dataclass(frozen=True)
class SpectralSummary:
    eigenvalues: np.ndarray
    gamma_star: float
    lambda_star: float
    reversible_certified: bool
    sweeps: int


def _round_robin(m: int):
    """Pairings of ``range(m)`` (m even) into m-1 rounds of disjoint pairs."""
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        half = m // 2
        p = np.array(players[:half])
        q = np.array(players[half:][::-1])
        rounds.append((np.minimum(p, q), np.maximum(p, q)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def off_norm(A: np.ndarray) -> float:
    """Frobenius norm of the off-diagonal part, summed directly (no cancellation)."""
    off = A[~np.eye(A.shape[0], dtype=bool)]
    return float(np.sqrt(np.sum(off * off)))


def jacobi_eigenvalues(A, tol: float = OFF_TOL, max_sweeps: int = MAX_SWEEPS):
    """Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.

    Each sweep visits every off-diagonal pair once, in round-robin order so
    that the ``n/2`` rotations of a round act on disjoint index pairs and can
    be applied together.

    Returns
    -------
    eigenvalues : ndarray
        Sorted in descending order.
    sweeps : int
        Number of completed sweeps.

    Raises
    ------
    NumericalError
        If the off-diagonal norm is still above ``tol`` after ``max_sweeps``.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    A = 0.5 * (A + A.T)
    if n == 1:
        return A.diagonal().copy(), 0
    m = n + (n % 2)
    if m != n:
        A = np.pad(A, ((0, 1), (0, 1)))
    rounds = _round_robin(m)
    sweeps = 0
    while off_norm(A) >= tol:
        if sweeps >= max_sweeps:
            raise NumericalError(
                f"Jacobi did not converge in {max_sweeps} sweeps (off-norm {off_norm(A):.3e})")
        for p, q in rounds:
            apq = A[p, q]
            active = np.abs(apq) > 1e-300
            if not active.any():
                continue
            p, q, apq = p[active], q[active], apq[active]
            tau = (A[q, q] - A[p, p]) / (2.0 * apq)
            # hypot avoids overflowing tau**2 when apq is tiny
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            rot = np.empty((p.size, 2, 2))
            rot[:, 0, 0] = c
            rot[:, 0, 1] = -s
            rot[:, 1, 0] = s
            rot[:, 1, 1] = c
            idx = np.stack([p, q], axis=1)
            # J^T A J = J^T (J^T A)^T for symmetric A: two batched row passes
            for _ in range(2):
                A[idx] = rot @ A[idx]
                A = np.ascontiguousarray(A.T)
            A[p, q] = 0.0
            A[q, p] = 0.0
        sweeps += 1
    eig = np.sort(A.diagonal()[:n])[::-1]
    return eig, sweeps


def symmetrize(P, pi) -> np.ndarray:
    """``D^{1/2} P D^{-1/2}`` with ``D = diag(pi)``, symmetrised against rounding."""
    r = np.sqrt(pi)
    S = r[:, None] * P / r[None, :]
    return 0.5 * (S + S.T)


def spectrum_reversible(P, pi, *, tol: float = 1e-10) -> SpectralSummary:
    """Real spectrum and absolute spectral gap of a ``pi``-reversible chain.

    ``lambda_star`` is the largest modulus among the eigenvalues left after
    removing one copy of the eigenvalue 1, and ``gamma_star = 1 - lambda_star``.

    Raises
    ------
    ReversibilityError
        If detailed balance fails by more than ``tol``.
    NumericalError
        If the solver stalls, no eigenvalue is within 1e-9 of 1, or an
        irreducible chain shows a repeated unit eigenvalue.
    """
    A = as_transition_matrix(P)
    p = as_distribution(pi, A.shape[0], strict=True)
    flux = p[:, None] * A
    if np.max(np.abs(flux - flux.T)) > tol:
        raise ReversibilityError("chain is not reversible with respect to pi")
    eig, sweeps = jacobi_eigenvalues(symmetrize(A, p))
    k = int(np.argmin(np.abs(eig - 1.0)))
    if abs(eig[k] - 1.0) > UNIT_TOL:
        raise NumericalError(f"no unit eigenvalue found (closest {eig[k]!r})")
    rest = np.delete(eig, k)
    if rest.size and np.any(np.abs(rest - 1.0) <= UNIT_TOL) and is_irreducible(A):
        raise NumericalError("repeated unit eigenvalue for an irreducible chain")
    lam = float(np.max(np.abs(rest))) if rest.size else 0.0
    lam = min(max(lam, 0.0), 1.0)
    return SpectralSummary(eig, 1.0 - lam, lam, True, sweeps)


def absolute_spectral_gap(P, pi) -> float:
    return spectrum_reversible(P, pi).gamma_star
