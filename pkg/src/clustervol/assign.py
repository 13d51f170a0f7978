"""Linear optimisation over partition polytopes and least-squares assignments.

Every problem here is a transportation problem: ``n`` unit supplies (the
points) are shipped to ``k`` clusters whose intake must lie in a window
``[lower_i, upper_i]``.  It is solved exactly by successive shortest paths on
the residual graph contracted to the clusters plus an overflow sink.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import Bounds, Clustering, InvalidInput, PointSet, objective

__all__ = [
    "TransportResult",
    "LinearOptimum",
    "KMeansResult",
    "solve_transport",
    "lsa_fixed_shape",
    "lsa_bounded",
    "maximize_linear_bounded",
    "kmeans",
    "kmeans_restarts",
    "centroids",
]

_EPS = 1e-12


@dataclass
class TransportResult:
    labels: np.ndarray
    cost: float
    # costs[j, labels[j]] - potentials[labels[j]] <= costs[j, i] - potentials[i]; sink pinned at 0
    potentials: np.ndarray = field(repr=False)


def _move_graph(costs, labels, counts, lower, upper):
    """Residual arcs between clusters (0..k-1) and the overflow sink (k)."""
    n, k = costs.shape
    inf = np.inf
    weight = np.full((k + 1, k + 1), inf)
    via = np.full((k + 1, k + 1), -1, dtype=np.int64)
    assigned = labels >= 0
    idx = np.flatnonzero(assigned)
    if idx.size:
        own = costs[idx, labels[idx]]
        delta = costs[idx] - own[:, None]
        for i in range(k):
            rows = labels[idx] == i
            if not rows.any():
                continue
            sub = delta[rows]
            best = np.argmin(sub, axis=0)
            weight[i, :k] = sub[best, np.arange(k)]
            via[i, :k] = idx[rows][best]
            weight[i, i] = inf
    for i in range(k):
        if counts[i] < upper[i]:
            weight[i, k] = 0.0
        if counts[i] > lower[i]:
            weight[k, i] = 0.0
    return weight, via


def _bellman_ford(dist0, weight):
    m = len(dist0)
    dist = dist0.copy()
    pred = np.full(m, -1, dtype=np.int64)
    for _ in range(m):
        cand = dist[:, None] + weight
        best = np.argmin(cand, axis=0)
        vals = cand[best, np.arange(m)]
        with np.errstate(invalid="ignore"):
            thresh = np.where(np.isfinite(dist), dist - _EPS * (1.0 + np.abs(dist)), np.inf)
        better = vals < thresh
        if not better.any():
            break
        dist[better] = vals[better]
        pred[better] = best[better]
    return dist, pred


def solve_transport(costs, lower, upper) -> TransportResult:
    """Minimum-cost assignment of each row to a column within column windows.

    Parameters
    ----------
    costs : array_like, shape (n, k)
        ``costs[j, i]`` is the cost of putting point ``j`` into cluster ``i``.
    lower, upper : array_like of int, shape (k,)
        Intake window of each cluster.

    Points are inserted in index order; each insertion follows a shortest
    augmenting path ending at the nearest cluster still below its lower bound
    or, once those are served, at the overflow sink. Ties go to the lowest
    cluster index.
    """
    costs = np.asarray(costs, dtype=float)
    n, k = costs.shape
    lower = np.asarray(lower, dtype=np.int64)
    upper = np.asarray(upper, dtype=np.int64)
    if lower.sum() > n or upper.sum() < n or np.any(lower > upper):
        raise InvalidInput("infeasible cluster-size window")
    labels = np.full(n, -1, dtype=np.int64)
    counts = np.zeros(k, dtype=np.int64)
    overflow_cap = n - int(lower.sum())
    for j in range(n):
        weight, via = _move_graph(costs, labels, counts, lower, upper)
        dist0 = np.full(k + 1, np.inf)
        dist0[:k] = costs[j]
        dist, pred = _bellman_ford(dist0, weight)
        overflow_used = int(np.maximum(counts - lower, 0).sum())
        targets = [i for i in range(k) if counts[i] < lower[i]]
        if overflow_used < overflow_cap:
            targets.append(k)
        reachable = [t for t in targets if np.isfinite(dist[t])]
        if not reachable:
            raise InvalidInput("no feasible augmenting path")
        target = min(reachable, key=lambda t: (dist[t], t))
        # walk back to the first cluster, moving the recorded points forward
        node = target
        while pred[node] >= 0:
            prev = pred[node]
            if prev < k and node < k:
                p = via[prev, node]
                labels[p] = node
                counts[prev] -= 1
                counts[node] += 1
            node = prev
        labels[j] = node
        counts[node] += 1
    cost = float(costs[np.arange(n), labels].sum())
    return TransportResult(labels, cost, _potentials(costs, labels, counts, lower, upper))


def _potentials(costs, labels, counts, lower, upper):
    k = costs.shape[1]
    weight, _ = _move_graph(costs, labels, counts, lower, upper)
    dist, _ = _bellman_ford(np.zeros(k + 1), weight)
    return dist[:k] - dist[k]


def _as_sites(a, k: int, d: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.size != k * d:
        raise InvalidInput(f"site vector must have {k * d} entries, got {a.size}")
    return a.reshape(k, d)


def _sq_dist(ps: PointSet, sites: np.ndarray) -> np.ndarray:
    diff = ps.points[:, None, :] - sites[None, :, :]
    return np.einsum("jid,jid->ji", diff, diff)


def lsa_fixed_shape(ps: PointSet, a, shape) -> Clustering:
    """Constrained least-squares assignment to the sites ``a`` with a fixed shape."""
    shape = np.asarray(shape, dtype=np.int64)
    k = shape.size
    if shape.sum() != ps.n or np.any(shape < 0):
        raise InvalidInput("shape must be nonnegative and sum to n")
    sites = _as_sites(a, k, ps.d)
    return Clustering(solve_transport(_sq_dist(ps, sites), shape, shape).labels, k)


def lsa_bounded(ps: PointSet, a, bounds: Bounds) -> Clustering:
    """General LSA: minimise the squared-distance objective over all feasible shapes."""
    bounds.validate(ps.n)
    sites = _as_sites(a, bounds.k, ps.d)
    return Clustering(solve_transport(_sq_dist(ps, sites), bounds.lower, bounds.upper).labels, bounds.k)


class LinearOptimum(NamedTuple):
    clustering: Clustering
    value: float
    degenerate: bool


def maximize_linear_bounded(ps: PointSet, a, bounds: Bounds) -> LinearOptimum:
    """Maximise ``a^T w(C)`` over all clusterings feasible for ``bounds``."""
    bounds.validate(ps.n)
    sites = _as_sites(a, bounds.k, ps.d)
    reward = ps.points @ sites.T
    res = solve_transport(-reward, bounds.lower, bounds.upper)
    degenerate = not np.any(sites)
    return LinearOptimum(Clustering(res.labels, bounds.k), -res.cost, degenerate)


def centroids(ps: PointSet, c: Clustering, fallback=None) -> np.ndarray:
    """Cluster means; empty clusters keep the corresponding ``fallback`` row."""
    sums = np.zeros((c.k, ps.d))
    np.add.at(sums, c.labels, ps.points)
    counts = c.shape
    out = np.zeros((c.k, ps.d)) if fallback is None else np.array(fallback, dtype=float).reshape(c.k, ps.d)
    nz = counts > 0
    out[nz] = sums[nz] / counts[nz, None]
    return out


@dataclass
class KMeansResult:
    clustering: Clustering
    sites: np.ndarray
    iterations: int
    objectives: list[float]
    converged: bool


def kmeans(ps: PointSet, k: int, init_sites, max_iter: int = 300) -> KMeansResult:
    """Lloyd iterations: nearest-site assignment followed by centroid update.

    An empty cluster is reseeded with the point lying farthest from its own
    current site, which strictly lowers the objective.
    """
    if k < 1:
        raise InvalidInput("k must be positive")
    sites = np.array(init_sites, dtype=float).reshape(k, ps.d)
    if len(np.unique(sites, axis=0)) != k:
        raise InvalidInput("initial sites must be pairwise distinct")
    prev = None
    objectives: list[float] = []
    for it in range(1, max_iter + 1):
        labels = np.argmin(_sq_dist(ps, sites), axis=1)
        for empty in np.flatnonzero(np.bincount(labels, minlength=k) == 0):
            dist = np.einsum("jd,jd->j", ps.points - sites[labels], ps.points - sites[labels])
            sizes = np.bincount(labels, minlength=k)
            dist[sizes[labels] <= 1] = -np.inf
            far = int(np.argmax(dist))
            labels[far] = empty
            sites[empty] = ps.points[far]
        c = Clustering(labels, k)
        objectives.append(objective(ps, c, sites))
        new_sites = centroids(ps, c, sites)
        objectives.append(objective(ps, c, new_sites))
        if (prev is not None and np.array_equal(prev, labels)) or np.array_equal(new_sites, sites):
            return KMeansResult(c, new_sites, it, objectives, True)
        prev = labels
        sites = new_sites
    return KMeansResult(c, sites, max_iter, objectives, False)


def kmeans_restarts(ps: PointSet, k: int, restarts: int, seed: int, max_iter: int = 300) -> list[KMeansResult]:
    """Run k-means from ``restarts`` initial sites drawn uniformly in the data's bounding box."""
    rng = np.random.default_rng(seed)
    lo, hi = ps.points.min(axis=0), ps.points.max(axis=0)
    runs = []
    for _ in range(restarts):
        init = rng.uniform(lo, hi, size=(k, ps.d))
        runs.append(kmeans(ps, k, init, max_iter))
    return runs
