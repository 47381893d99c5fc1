"""alpha-projection of a transition matrix onto the pi-reversible chains.

Reversible chains ``M`` correspond one-to-one to symmetric edge measures
``s = pi(x) M(x, y)`` with row sums ``pi``.  Minimising ``R_alpha(M || L)``
is the same as minimising the alpha-divergence ``D_alpha(s || L~)`` over that
polytope, because ``R_alpha`` is an increasing function of ``D_alpha``; the
latter is smoother and has no logarithm to overflow.

The solver is a projected-gradient method in the metric given by the
(diagonal) Hessian of the separable objective.  Each projection onto the
polytope runs Dykstra's algorithm between the affine set
``{s symmetric, s 1 = pi}`` (closed form) and the non-negative orthant, and
every step is followed by an Armijo backtrack so the objective never
increases.

The result is then polished on the dual.  Stationarity of the separable
objective gives every entry as an explicit function of ``mu_x + mu_y`` for
one multiplier per row, so Newton's method on the ``n`` multipliers
restores the row sums to rounding level.  The polished point is kept only
if it is feasible and does not raise the objective.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import isfinite

import numpy as np
from scipy.optimize import linprog

from .chain import as_distribution, as_transition_matrix
from .divergence import ENTRY_FLOOR, renyi_div, renyi_from_alpha_div
from .errors import DomainError, InfeasibleError, NumericalError

FEAS_TOL = 1e-11
KKT_TOL = 1e-6
DYKSTRA_MAX_ITERS = 20000
# variables stay above this when alpha < 1, where the gradient is -inf at 0
SMALL_ALPHA_FLOOR = 1e-14


@dataclass(frozen=True)
class ProjectionResult:
    """Outcome of :func:`alpha_project`.

    Attributes
    ----------
    M_star : ndarray
        The pi-reversible chain found.
    s : ndarray
        Its edge measure ``pi(x) M_star(x, y)``.
    objective : float
        ``R_alpha(M_star || L)``.
    d_alpha : float
        ``D_alpha(M_star || L)``, the quantity actually minimised.
    initial_objective : float
        ``R_alpha(M_0 || L)`` at the initial point.
    kkt_residual : float
        ``|| s - Proj(s - grad) ||_F`` with the Euclidean projection onto the
        symmetric edge-measure polytope.
    iterations : int
    converged : bool
    feasibility_residual : float
        Largest violation of symmetry, row sums or non-negativity.
    history : list of float
        ``D_alpha`` after every projected-gradient iteration (non-increasing).
    pythagorean_margin : float or None
        Smallest ``R(M||L) - R(M||M*) - R(M*||L)`` over random probes
        ``M``, when probes were requested.
    polished : bool
        Whether the dual Newton polish replaced the projected-gradient point.
    """

    M_star: np.ndarray
    s: np.ndarray
    objective: float
    d_alpha: float
    initial_objective: float
    kkt_residual: float
    iterations: int
    converged: bool
    feasibility_residual: float
    history: list = field(default_factory=list)
    pythagorean_margin: float | None = None
    polished: bool = False


# ---------------------------------------------------------------------------
# polytope geometry


class _Polytope:
    """Symmetric ``n x n`` matrices with row sums ``pi`` and free entries ``>= lo``.

    Entries outside ``free`` are pinned to zero.
    """

    def __init__(self, pi, free, lo: float = 0.0):
        self.pi = pi
        self.free = free
        self.lo = np.where(free, lo, 0.0)

    def affine_map(self, h):
        """Projection onto ``{S = S^T, S 1 = pi, S = 0 off free}`` in the metric ``diag(h)``.

        ``S = Z + C (lam_x + lam_y)`` with ``C = 1 / (2 h)`` on free entries,
        where ``lam`` solves a small symmetric system whose (pseudo-)inverse
        is computed once per metric.
        """
        C = np.where(self.free, 0.5 / h, 0.0)
        K = np.linalg.pinv(np.diag(C.sum(axis=1)) + C)

        def apply(Z):
            Z = np.where(self.free, Z, 0.0)
            lam = K @ (self.pi - Z.sum(axis=1))
            S = Z + C * (lam[:, None] + lam[None, :])
            return 0.5 * (S + S.T)

        return apply

    def affine(self, Z, h):
        return self.affine_map(h)(Z)

    def orthant(self, Z):
        return np.where(self.free, np.maximum(Z, self.lo), 0.0)

    def residual(self, S):
        return float(max(np.abs(S.sum(axis=1) - self.pi).max(),
                         np.abs(S - S.T).max(),
                         max(-(S - self.lo).min(), 0.0)))

    def project(self, Z, h=None, tol: float = FEAS_TOL, max_iters: int = DYKSTRA_MAX_ITERS):
        """Dykstra's algorithm for the projection of ``Z`` onto the polytope.

        The affine set needs no correction term, so only the orthant step
        carries one.
        """
        if h is None:
            h = np.ones_like(Z)
        affine = self.affine_map(h)
        Z = 0.5 * (Z + Z.T)
        x = Z
        q = np.zeros_like(Z)
        for _ in range(max_iters):
            y = affine(x)
            x_new = self.orthant(y + q)
            q = y + q - x_new
            x = x_new
            if np.abs(x.sum(axis=1) - self.pi).max() < tol:
                return x
        raise NumericalError("Dykstra projection did not reach feasibility")


# ---------------------------------------------------------------------------
# objective


class _Objective:
    """``D_alpha(s || L~) = (sum s^a W - 1) / (a - 1)`` with ``W`` symmetrised ``L~^(1-a)``."""

    def __init__(self, Lt, alpha, free):
        a = float(alpha)
        self.a = a
        with np.errstate(divide="ignore"):
            powered = np.where(Lt > 0, Lt ** (1.0 - a), 0.0 if a < 1 else np.inf)
        self.W = np.where(free, 0.5 * (powered + powered.T), 0.0)

    def value(self, S):
        a = self.a
        return float(((S**a * self.W).sum() - 1.0) / (a - 1.0))

    def grad(self, S):
        a = self.a
        with np.errstate(divide="ignore", invalid="ignore"):
            G = a * self.W * S ** (a - 1.0) / (a - 1.0)
        return np.where(self.W > 0, G, 0.0)

    def hess_diag(self, S):
        a = self.a
        with np.errstate(divide="ignore"):
            h = a * self.W * np.maximum(S, 1e-12) ** (a - 2.0)
        scale = h[h > 0].mean() if np.any(h > 0) else 1.0
        return np.clip(h, 1e-6 * scale, 1e12 * scale)


def _edge(L, pi):
    Lt = pi[:, None] * L
    return np.where(Lt < ENTRY_FLOOR, 0.0, Lt)


def _support(Lt, alpha):
    """Entries allowed to be positive: all for ``alpha < 1``; for ``alpha > 1``
    only where both ``L~(x,y)`` and ``L~(y,x)`` are positive."""
    if alpha < 1:
        return np.ones(Lt.shape, dtype=bool)
    return (Lt > 0) & (Lt.T > 0)


def _check_feasible(pi, free):
    """Is there a symmetric ``s >= 0`` supported on ``free`` with row sums ``pi``?"""
    n = pi.shape[0]
    iu = [(x, y) for x in range(n) for y in range(x, n) if free[x, y]]
    if not iu:
        return False
    A = np.zeros((n, len(iu)))
    for k, (x, y) in enumerate(iu):
        A[x, k] += 1.0
        if y != x:
            A[y, k] += 1.0
    res = linprog(np.zeros(len(iu)), A_eq=A, b_eq=pi, bounds=(0, None), method="highs")
    return res.status == 0


# ---------------------------------------------------------------------------
# solver


def _solve(obj: _Objective, poly: _Polytope, S, tol, max_iters):
    f = obj.value(S)
    history = [f]
    it = 0
    stop = "max_iters"
    for it in range(1, max_iters + 1):
        G = obj.grad(S)
        h = obj.hess_diag(S)
        try:
            target = poly.project(S - G / h, h)
        except NumericalError:
            # Dykstra stalls under a badly conditioned metric; a uniform one
            # still gives a descent direction
            h = np.full_like(h, np.median(h))
            target = poly.project(S - G / h, h)
        d = target - S
        slope = float((G * d).sum())
        if slope >= 0 or np.abs(d).max() < 1e-15:
            stop = "stationary"
            break
        t = 1.0
        while True:
            trial = S + t * d
            f_trial = obj.value(trial)
            if f_trial <= f + 1e-4 * t * slope:
                break
            t *= 0.5
            if t < 1e-12:
                break
        if f_trial > f:
            stop = "line search failed"
            break
        decrease = f - f_trial
        S, f = trial, f_trial
        history.append(f)
        if decrease <= tol * max(abs(f), 1e-300) and np.abs(t * d).max() < 1e-9:
            stop = "tolerance"
            break
    return S, history, it, stop


class _Dual:
    """Convex dual in the row multipliers ``mu``.

    With ``t = mu_x + mu_y`` stationarity gives ``s = (W / t)**k`` for
    ``alpha < 1`` and ``s = (t_+ / W)**k`` for ``alpha > 1``, where
    ``k = 1 / |1 - alpha|``.  The dual objective ``sum G(t) +- 2 mu . pi``
    has gradient ``+-2 (pi - rowsum(s))``.
    """

    def __init__(self, W, alpha, pi, mask):
        self.W = np.where(mask, W, 1.0)
        self.mask = mask
        self.a = alpha
        self.pi = pi
        self.k = 1.0 / abs(1.0 - alpha)

    def entries(self, mu):
        t = mu[:, None] + mu[None, :]
        k, W = self.k, self.W
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.a < 1:
                if np.any(t[self.mask] <= 0):
                    return None
                s = (W / t) ** k
                ds = -k * s / t
                G = W**k * t ** (1.0 - k) / (k - 1.0)
            else:
                tp = np.maximum(t, 0.0)
                s = (tp / W) ** k
                ds = np.where(t > 0, k * s / np.where(t > 0, t, 1.0), 0.0)
                G = tp * s / (k + 1.0)
        m = self.mask
        return t, np.where(m, s, 0.0), np.where(m, ds, 0.0), np.where(m, G, 0.0)

    def value(self, mu, parts):
        sign = 1.0 if self.a < 1 else -1.0
        return float(parts[3].sum() + sign * 2.0 * mu @ self.pi)

    def polish(self, S, max_iters: int = 100):
        """Newton iterations started from multipliers fitted to ``S``."""
        n = S.shape[0]
        a = self.a
        use = self.mask & ((S > 0) if a > 1 else np.ones_like(self.mask))
        xs, ys = np.nonzero(use)
        if xs.size == 0:
            return None
        A = np.zeros((xs.size, n))
        A[np.arange(xs.size), xs] += 1.0
        A[np.arange(xs.size), ys] += 1.0
        with np.errstate(divide="ignore"):
            target = self.W[xs, ys] * np.maximum(S[xs, ys], 1e-300) ** (a - 1.0)
        mu = np.linalg.lstsq(A, target, rcond=None)[0]
        parts = self.entries(mu)
        if parts is None:
            return None
        val = self.value(mu, parts)
        sign = 1.0 if a < 1 else -1.0
        for _ in range(max_iters):
            _, s, ds, _ = parts
            resid = s.sum(axis=1) - self.pi
            if np.abs(resid).max() < 1e-16:
                break
            grad = -sign * 2.0 * resid
            # ds < 0 for alpha < 1, so -sign * ds >= 0 in both branches
            H = -sign * 2.0 * (np.diag(ds.sum(axis=1)) + ds)
            step = np.linalg.lstsq(H, -grad, rcond=None)[0]
            slope = float(grad @ step)
            if not slope < 0:
                break
            t = 1.0
            while t > 1e-12:
                trial = mu + t * step
                tparts = self.entries(trial)
                if tparts is not None:
                    tval = self.value(trial, tparts)
                    if tval <= val + 1e-4 * t * slope:
                        break
                t *= 0.5
            else:
                break
            mu, parts, val = trial, tparts, tval
        s = parts[1]
        return 0.5 * (s + s.T)


def _polish(obj, poly, S, pi, free):
    """Dual Newton polish of ``S``; returns ``S`` itself when it does not help.

    Near the optimum the objective is flat to rounding level, so the
    polished point is judged by feasibility and KKT residual instead.
    """
    a = obj.a
    if a < 1 and np.any(free & (obj.W <= 0)):
        return S
    S_new = _Dual(obj.W, a, pi, free & (obj.W > 0)).polish(S)
    if S_new is None or not np.all(np.isfinite(S_new)):
        return S
    if poly.residual(S_new) > max(poly.residual(S), 1e-15):
        return S
    f, f_new = obj.value(S), obj.value(S_new)
    if f_new > f + 1e-12 * max(1.0, abs(f)):
        return S
    if _kkt(obj, S_new, pi, free) > _kkt(obj, S, pi, free):
        return S
    return S_new


def _euclid_project(Z, pi, free, max_iters: int = 100):
    """Euclidean projection onto the polytope by semismooth Newton on the dual.

    The projection of ``Z`` is ``max(0, Zs + mu_x + mu_y)`` on free entries,
    with ``Zs`` the symmetric part of ``Z`` and ``mu`` chosen so the row sums
    equal ``pi``.  Returns ``None`` if the iteration stalls.
    """
    n = pi.shape[0]
    Zs = np.where(free, 0.5 * (Z + Z.T), -np.inf)
    mu = (pi - np.where(free, Zs, 0.0).sum(axis=1)) / (2.0 * n)

    def parts(m):
        u = Zs + m[:, None] + m[None, :]
        return np.maximum(u, 0.0), u > 0

    def dual(m, s):
        return 0.5 * float((s * s).sum()) - 2.0 * float(m @ pi)

    s, act = parts(mu)
    val = dual(mu, s)
    for _ in range(max_iters):
        resid = s.sum(axis=1) - pi
        if np.abs(resid).max() < 1e-15:
            return s
        A = act.astype(float)
        H = 2.0 * (np.diag(A.sum(axis=1)) + A) + 1e-12 * np.eye(n)
        step = np.linalg.solve(H, -2.0 * resid)
        slope = float(2.0 * resid @ step)
        if not slope < 0:
            break
        t = 1.0
        while t > 1e-12:
            trial = mu + t * step
            ts, tact = parts(trial)
            tval = dual(trial, ts)
            if tval <= val + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            break
        mu, s, act, val = trial, ts, tact, tval
    return s if np.abs(s.sum(axis=1) - pi).max() < FEAS_TOL else None


def _kkt(obj, S, pi, free):
    """Euclidean projected-gradient norm at ``S``."""
    G = obj.grad(S)
    target = _euclid_project(S - G, pi, free)
    if target is None:
        target = _Polytope(pi, free, 0.0).project(S - G)
    return float(np.linalg.norm(S - target))


def _random_feasible(rng, pi, free):
    R = rng.random(free.shape) * free
    R = R + R.T
    R *= 1.0 / R.sum()
    return _Polytope(pi, free, 0.0).project(R)


def _prepare(L, pi, alpha):
    A = as_transition_matrix(L)
    p = as_distribution(pi, A.shape[0], strict=True)
    a = float(alpha)
    if not isfinite(a) or a <= 0 or a == 1:
        raise DomainError("alpha must lie in (0,1) or (1,inf)")
    Lt = _edge(A, p)
    free = _support(Lt, a)
    if a > 1 and not _check_feasible(p, free):
        raise InfeasibleError(
            "every pi-reversible chain has infinite divergence from L: "
            "its mutual support cannot carry the row sums pi")
    lo = SMALL_ALPHA_FLOOR if a < 1 else 0.0
    return A, p, a, Lt, free, _Polytope(p, free, lo)


def _result(A, p, a, obj, poly, S, history, it, stop, init_obj, free, polished=False):
    M = S / p[:, None]
    M = M / M.sum(axis=1, keepdims=True)
    d = obj.value(S)
    kkt = _kkt(obj, S, p, free)
    return ProjectionResult(
        M_star=M,
        s=S,
        objective=renyi_div(M, A, p, a),
        d_alpha=max(d, 0.0),
        initial_objective=init_obj,
        kkt_residual=kkt,
        iterations=it,
        converged=bool(stop in ("tolerance", "stationary", "polished") and kkt < KKT_TOL),
        feasibility_residual=poly.residual(S),
        history=[max(v, 0.0) for v in history],
        polished=polished,
    )


def alpha_project(L, pi, alpha: float, tol: float = 1e-13, max_iters: int = 500, *,
                  start=None, probes: int = 0, seed: int = 0) -> ProjectionResult:
    """alpha-projection of ``L`` onto the ``pi``-reversible chains.

    Parameters
    ----------
    L : array_like, shape (n, n)
    pi : array_like, shape (n,)
        Strictly positive.
    alpha : float
        In ``(0, 1)`` or ``(1, inf)``.
    tol : float
        Stop once the relative objective decrease falls below ``tol``.
    max_iters : int
    start : array_like, optional
        Feasible symmetric edge measure to start from; by default the
        symmetrised edge measure of ``L`` projected onto the polytope.
    probes, seed : int
        Number of random reversible chains used to evaluate the Pythagorean
        margin, and their seed.

    Raises
    ------
    InfeasibleError
        For ``alpha > 1`` when no reversible chain has finite divergence.
    """
    A, p, a, Lt, free, poly = _prepare(L, pi, alpha)
    obj = _Objective(Lt, a, free)
    if start is None:
        S0 = poly.project(0.5 * (Lt + Lt.T))
    else:
        S0 = poly.project(np.asarray(start, dtype=float))
    init_obj = renyi_from_alpha_div(max(obj.value(S0), 0.0), a)
    S, history, it, stop = _solve(obj, poly, S0, tol, max_iters)
    S_pol = _polish(obj, poly, S, p, free)
    polished = S_pol is not S
    if polished:
        S, stop = S_pol, "polished"
    res = _result(A, p, a, obj, poly, S, history, it, stop, init_obj, free, polished)
    if probes:
        margin = pythagorean_margin(A, p, a, res.M_star, probes=probes, seed=seed)
        res = dataclasses.replace(res, pythagorean_margin=margin)
    return res


def random_reversible(pi, rng, free=None) -> np.ndarray:
    """A random ``pi``-reversible chain (projection of a random symmetric measure)."""
    p = np.asarray(pi, dtype=float)
    if free is None:
        free = np.ones((p.size, p.size), dtype=bool)
    S = _random_feasible(rng, p, free)
    M = S / p[:, None]
    return M / M.sum(axis=1, keepdims=True)


def pythagorean_margin(L, pi, alpha: float, M_star, probes: int = 8, seed: int = 0) -> float:
    """Smallest ``R(M||L) - R(M||M*) - R(M*||L)`` over random reversible ``M``."""
    A = as_transition_matrix(L)
    p = as_distribution(pi, A.shape[0], strict=True)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    base = renyi_div(M_star, A, p, alpha)
    worst = np.inf
    for _ in range(probes):
        M = random_reversible(p, rng)
        lhs = renyi_div(M, A, p, alpha)
        if not np.isfinite(lhs):
            continue
        worst = min(worst, lhs - renyi_div(M, M_star, p, alpha) - base)
    return float(worst)


def multistart_projection(L, pi, alpha: float, starts: int = 8, seed: int = 0,
                          tol: float = 1e-13, max_iters: int = 500, *, threads: int = 1):
    """Solve from the default start and ``starts`` random feasible starts.

    Returns
    -------
    best : ProjectionResult
        Lowest objective; ties broken by the lexicographic order of ``M_star``.
    spread : float
        Largest ``max |M_i - M_best|`` over all runs.
    results : list of ProjectionResult
    """
    if int(starts) != starts or starts < 0:
        raise DomainError("starts must be a non-negative integer")
    A, p, a, Lt, free, poly = _prepare(L, pi, alpha)
    children = np.random.SeedSequence(seed).spawn(int(starts))

    def run(i):
        if i == 0:
            return alpha_project(A, p, a, tol, max_iters)
        rng = np.random.Generator(np.random.Philox(children[i - 1]))
        S0 = _random_feasible(rng, p, free)
        return alpha_project(A, p, a, tol, max_iters, start=S0)

    idx = range(int(starts) + 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, idx))
    else:
        results = [run(i) for i in idx]
    best = min(results, key=lambda r: (r.d_alpha, tuple(r.M_star.ravel())))
    spread = max(float(np.abs(r.M_star - best.M_star).max()) for r in results)
    return best, spread, results
