"""Maximally stable site vectors.

The most stable site vector for the p-norm is the minimum Euclidean norm
point ``z`` with ``v_j^T z <= -||v_j||_q`` for every facet normal ``v_j``
(``q`` dual to ``p``).  Such a ``z`` carries a unit p-ball inside the cone,
and its stability is ``1 / ||z||_2``.

The QP is solved by Hildreth's dual coordinate ascent, followed by an
active-set polish that solves the equality KKT system on the identified
tight facets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from .cone import NormalConeH, cone_contains, filter_facets
from .core import InvalidInput

__all__ = [
    "NotAVertex",
    "StabilityResult",
    "parse_p",
    "dual_exponent",
    "gamma_p",
    "min_norm_point",
    "has_interior",
    "most_stable_site",
    "stability_of",
    "norm_constant",
    "rescale_for_norm",
    "ball_support_violation",
    "corner_violation",
]

KKT_TOL = 1e-8
MAX_SWEEPS = 100_000
POLISH_EVERY = 50
_WEIGHT_EPS = 1e-14


class NotAVertex(InvalidInput):
    """The cone has empty interior, so the clustering is not a vertex clustering."""


def parse_p(p) -> float:
    """Accept ``1``, ``2``, ``inf``, ``"inf"`` or any real ``>= 1``."""
    if isinstance(p, str):
        p = p.strip().lower()
        p = math.inf if p in ("inf", "infinity", "oo") else float(p)
    p = float(p)
    if not p >= 1.0:
        raise InvalidInput("p must lie in [1, inf]")
    return p


def dual_exponent(p) -> float:
    p = parse_p(p)
    if p == 1.0:
        return math.inf
    if math.isinf(p):
        return 1.0
    if p == 2.0:
        return 2.0
    return p / (p - 1.0)


def gamma_p(v, p) -> float:
    """``min v^T z`` over the unit p-ball, i.e. ``-||v||_q``."""
    v = np.asarray(v, dtype=float).ravel()
    if not np.any(v):
        raise InvalidInput("gamma_p needs a non-zero vector")
    return -float(np.linalg.norm(v, dual_exponent(p)))


def min_norm_point(points, tol: float = 1e-12, max_iter: int = 10_000):
    """Wolfe's algorithm for the point of ``conv(points)`` nearest the origin.

    Returns
    -------
    x : ndarray
        The minimum-norm point.
    support : ndarray of int
        Indices of the points carrying ``x``.
    weights : ndarray
        Convex coefficients on ``support``, so ``weights @ points[support] == x``.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or len(P) == 0:
        raise InvalidInput("min_norm_point needs a non-empty (N, m) array")
    sq = np.einsum("ij,ij->i", P, P)
    scale = max(float(sq.max()), 1e-300)
    S = [int(np.argmin(sq))]
    lam = np.array([1.0])
    x = P[S[0]].copy()
    for _ in range(max_iter):
        g = P @ x
        j = int(np.argmin(g))
        if x @ x - g[j] <= tol * scale or j in S:
            break
        S.append(j)
        lam = np.append(lam, 0.0)
        while True:
            alpha = _affine_min(P[S])
            if np.all(alpha > _WEIGHT_EPS):
                lam = alpha
                break
            # move towards the affine minimiser until a weight hits zero
            low = alpha <= _WEIGHT_EPS
            theta = float(np.min(lam[low] / (lam[low] - alpha[low])))
            lam = lam + theta * (alpha - lam)
            keep = lam > _WEIGHT_EPS
            S = [s for s, kp in zip(S, keep) if kp]
            lam = lam[keep] / lam[keep].sum()
        x = lam @ P[S]
        if j not in S:
            break
    return x, np.asarray(S, dtype=np.int64), lam


def _affine_min(Q: np.ndarray) -> np.ndarray:
    """Coefficients of the min-norm point of the affine hull of the rows of ``Q``."""
    r = len(Q)
    kkt = np.zeros((r + 1, r + 1))
    kkt[:r, :r] = Q @ Q.T
    kkt[:r, r] = 1.0
    kkt[r, :r] = 1.0
    rhs = np.zeros(r + 1)
    rhs[r] = 1.0
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:r]


@dataclass(frozen=True)
class StabilityResult:
    """Most stable site vector ``z`` for one norm.

    ``multipliers`` are the nonnegative ``lam`` with ``z = -sum lam_j v_j``
    over ``active_set`` (indices into the cone's normals).
    """

    z: np.ndarray
    p: float
    tau: float
    active_set: tuple[int, ...]
    multipliers: np.ndarray
    kkt_residual: float
    sweeps: int


def _hildreth(V, gamma, lam, max_sweeps, sweeps_done):
    """Run dual coordinate sweeps until updates stall; returns (lam, sweeps, last_change)."""
    rows = [tuple(r) for r in V.tolist()]
    norms2 = (V * V).sum(axis=1).tolist()
    g = gamma.tolist()
    lam_l = lam.tolist()
    z = (-(V.T @ lam)).tolist()
    m = V.shape[1]
    change = math.inf
    sweeps = sweeps_done
    while sweeps < max_sweeps:
        sweeps += 1
        change = 0.0
        for j, row in enumerate(rows):
            dot = sum(row[i] * z[i] for i in range(m))
            new = lam_l[j] + (dot - g[j]) / norms2[j]
            if new < 0.0:
                new = 0.0
            delta = new - lam_l[j]
            if delta != 0.0:
                for i in range(m):
                    z[i] -= delta * row[i]
                lam_l[j] = new
                change = max(change, abs(delta))
        if change < 1e-12 or sweeps % POLISH_EVERY == 0:
            break
    return np.array(lam_l), sweeps, change


def _kkt(V, gamma, z, idx, mu):
    """Residual of primal feasibility, stationarity and complementarity."""
    scale = max(1.0, float(np.abs(gamma).max()))
    slack = V @ z - gamma
    primal = max(0.0, float(slack.max())) / scale
    stat = float(np.linalg.norm(z + V[idx].T @ mu)) / max(1.0, float(np.linalg.norm(z)))
    comp = float(np.abs(mu * slack[idx]).max()) / scale if len(idx) else 0.0
    dual = max(0.0, float(-mu.min())) if len(idx) else 0.0
    return max(primal, stat, comp, dual)


def _nnls(A: np.ndarray, b: np.ndarray, max_iter: int = 500) -> np.ndarray:
    """Lawson-Hanson: ``argmin ||A x - b||_2`` over ``x >= 0``."""
    m = A.shape[1]
    x = np.zeros(m)
    passive = np.zeros(m, dtype=bool)
    tol = 1e-12 * max(1.0, float(np.abs(A).max())) * max(1.0, float(np.abs(b).max()))
    for _ in range(max_iter):
        grad = A.T @ (b - A @ x)
        grad[passive] = -np.inf
        j = int(np.argmax(grad))
        if passive.all() or grad[j] <= tol:
            break
        passive[j] = True
        while True:
            idx = np.flatnonzero(passive)
            trial = np.zeros(m)
            trial[idx] = np.linalg.lstsq(A[:, idx], b, rcond=None)[0]
            if np.all(trial[idx] > 0):
                x = trial
                break
            # step back to the boundary and release the variables that hit zero
            neg = idx[trial[idx] <= 0]
            alpha = float(np.min(x[neg] / (x[neg] - trial[neg])))
            x = x + alpha * (trial - x)
            passive &= x > tol
            x[~passive] = 0.0
    return x


def _polish(V, gamma, lam, z):
    scale = max(1.0, float(np.abs(gamma).max()))
    slack = V @ z - gamma
    active = np.flatnonzero((lam > 0.0) | (slack > -1e-7 * scale))
    if len(active) == 0:
        return None
    A = V[active]
    zp = np.linalg.lstsq(A, gamma[active], rcond=None)[0]
    mu = _nnls(A.T, -zp)
    keep = mu > 0.0
    idx = active[keep]
    mu = mu[keep]
    return zp, idx, mu, _kkt(V, gamma, zp, idx, mu)


def _empty_interior(V: np.ndarray) -> bool:
    # a cone {Vz <= 0} has interior iff 0 is outside conv of the unit normals
    units = V / np.linalg.norm(V, axis=1)[:, None]
    y, _, _ = min_norm_point(units)
    return float(np.linalg.norm(y)) <= 1e-7


def has_interior(cone: NormalConeH) -> bool:
    """True iff the cone is full-dimensional, i.e. its clustering is a vertex clustering."""
    return len(cone.normals) == 0 or not _empty_interior(cone.normals)


def most_stable_site(cone: NormalConeH, p=2, use_all_normals: bool = False, init=None) -> StabilityResult:
    """Solve ``min ||z||_2^2  s.t.  v_j^T z <= -||v_j||_q``.

    Facet normals are used unless ``use_all_normals``; redundant normals do
    not change the optimum, only the cost of the solve.  ``init`` may hold
    starting multipliers (one per constraint row used).

    Raises
    ------
    NotAVertex
        If the cone has empty interior.
    """
    p = parse_p(p)
    if not use_all_normals and not cone.filtered:
        cone = filter_facets(cone)
    idx_map = np.arange(len(cone.normals)) if use_all_normals else cone.facet_indices
    V = cone.normals[idx_map]
    m = cone.dim
    if len(V) == 0:
        # whole space: every direction is infinitely stable; no finite centre
        raise InvalidInput("the cone is the whole space; stability is unbounded")
    if _empty_interior(V):
        raise NotAVertex("normal cone has empty interior: not a vertex clustering")
    q = dual_exponent(p)
    gamma = -np.linalg.norm(V, ord=q, axis=1)
    lam = np.zeros(len(V)) if init is None else np.maximum(np.asarray(init, dtype=float), 0.0)
    sweeps = 0
    best = None
    while True:
        lam, sweeps, change = _hildreth(V, gamma, lam, MAX_SWEEPS, sweeps)
        z = -(V.T @ lam)
        pol = _polish(V, gamma, lam, z)
        if pol is not None and (best is None or pol[3] < best[3]):
            best = pol
        if (best is not None and best[3] <= KKT_TOL) or change < 1e-12 or sweeps >= MAX_SWEEPS:
            break
    if best is None or best[3] > KKT_TOL:
        idx = np.flatnonzero(lam > 0)
        best = (z, idx, lam[idx], _kkt(V, gamma, z, idx, lam[idx]))
    z, idx, mu, resid = best
    z = np.asarray(z, dtype=float).reshape(m)
    return StabilityResult(
        z=z,
        p=p,
        tau=1.0 / float(np.linalg.norm(z)),
        active_set=tuple(int(i) for i in idx_map[idx]),
        multipliers=mu,
        kkt_residual=float(resid),
        sweeps=sweeps,
    )


def stability_of(cone: NormalConeH, a, p=2) -> float:
    """Largest ``delta / ||a||_2`` with the p-ball of radius ``delta`` at ``a`` inside the cone."""
    a = np.asarray(a, dtype=float).ravel()
    na = float(np.linalg.norm(a))
    if na == 0.0:
        raise InvalidInput("site vector must be non-zero")
    if not cone_contains(cone, a):
        raise InvalidInput("site vector lies outside the cone")
    V = cone.facets if cone.filtered else cone.normals
    if len(V) == 0:
        return math.inf
    q = dual_exponent(p)
    dist = -(V @ a) / np.linalg.norm(V, ord=q, axis=1)
    return max(0.0, float(dist.min())) / na


def norm_constant(p, q, m: int) -> float:
    """Smallest ``c`` with ``||x||_p <= c ||x||_q`` on ``R^m``."""
    p, q = parse_p(p), parse_p(q)
    return float(m) ** max(0.0, 1.0 / p - 1.0 / q)


def rescale_for_norm(z_p, p, q) -> np.ndarray:
    """Scale an optimal p-centre so that the unit q-ball around it fits the cone."""
    z_p = np.asarray(z_p, dtype=float).ravel()
    return norm_constant(p, q, z_p.size) * z_p


def ball_support_violation(cone: NormalConeH, center, q) -> float:
    """``max_j v_j^T c + ||v_j||_{q*}``; ``<= 0`` certifies the unit q-ball at ``c`` is inside."""
    center = np.asarray(center, dtype=float).ravel()
    V = cone.facets if cone.filtered else cone.normals
    return float((V @ center + np.linalg.norm(V, ord=dual_exponent(q), axis=1)).max())


def corner_violation(cone: NormalConeH, center) -> float:
    """Largest ``v_j^T x`` over all corners ``x`` of the unit inf-ball at ``center``."""
    center = np.asarray(center, dtype=float).ravel()
    m = center.size
    if m > 20:
        raise InvalidInput("corner enumeration limited to dimension 20")
    corners = center + (((np.arange(2**m)[:, None] >> np.arange(m)) & 1) * 2.0 - 1.0)
    V = cone.facets if cone.filtered else cone.normals
    return float((corners @ V.T).max())
