"""Separating power diagrams for site vectors in a normal cone.

Cell ``i`` of the diagram with sites ``a_i`` and weights ``alpha_i`` is
``{x : (a_j - a_i)^T x <= alpha_i - alpha_j for all j}``, the set where
``a_i^T x + alpha_i`` is maximal.  Weights that put every cluster inside its
own cell solve a system of difference constraints, handled here by
Bellman-Ford shortest paths.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import Bounds, Clustering, InvalidInput, PointSet

__all__ = [
    "PowerDiagram",
    "WeightResult",
    "InfeasibleWeights",
    "Violation",
    "VerifyResult",
    "weights_for_sites",
    "power_diagram",
    "locate",
    "verify_induces",
    "cell_polygon",
]

MARGIN_TOL = 1e-9
_BISECTIONS = 100


class InfeasibleWeights(InvalidInput):
    """No weights separate the clustering; ``cycle`` lists the offending nodes.

    Node ``k`` in ``cycle`` stands for the weight pinned to zero.
    """

    def __init__(self, message: str, cycle: list[int]):
        super().__init__(message)
        self.cycle = cycle


@dataclass(frozen=True, eq=False)
class PowerDiagram:
    sites: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        sites = np.array(self.sites, dtype=float)
        weights = np.array(self.weights, dtype=float).ravel()
        if sites.ndim != 2 or len(weights) != len(sites):
            raise InvalidInput("need k sites (rows) and k weights")
        if len(np.unique(sites, axis=0)) != len(sites):
            raise InvalidInput("sites must be pairwise distinct")
        sites.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "weights", weights)

    @property
    def k(self) -> int:
        return len(self.sites)

    def scores(self, x) -> np.ndarray:
        """``a_i^T x + alpha_i`` for one point (1-d) or many points (rows)."""
        return np.asarray(x, dtype=float) @ self.sites.T + self.weights


class WeightResult(NamedTuple):
    diagram: PowerDiagram
    margin: float
    max_margin: float


def _sites(a, k: int, d: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.size != k * d:
        raise InvalidInput(f"site vector must have {k * d} entries")
    sites = a.reshape(k, d)
    if len(np.unique(sites, axis=0)) != k:
        raise InvalidInput("sites must be pairwise distinct")
    return sites


def _bellman_ford(m: int, edges: list[tuple[int, int, float]]):
    """Shortest paths from a virtual source joined to all nodes by 0-arcs.

    Returns ``(dist, None)`` or ``(None, cycle)`` for a negative cycle.
    """
    dist = np.zeros(m)
    pred = np.full(m, -1, dtype=np.int64)
    last = -1
    for _ in range(m + 1):
        last = -1
        for u, v, w in edges:
            cand = dist[u] + w
            if cand < dist[v] - 1e-12 * (1.0 + abs(dist[v])):
                dist[v] = cand
                pred[v] = u
                last = v
        if last < 0:
            return dist, None
    node = last
    for _ in range(m):
        node = pred[node]
    cycle = [node]
    cur = pred[node]
    while cur != node:
        cycle.append(int(cur))
        cur = pred[cur]
    return None, [int(v) for v in reversed(cycle)]


def _constraint_graph(ps, c, sites, variant, bounds):
    """Data arcs ``(i, j, -c_ij)`` and sign arcs through the pinned node ``k``."""
    k = c.k
    proj = ps.points @ sites.T  # proj[x, i] = a_i^T x
    data = []
    for i, members in enumerate(c.clusters):
        if not members:
            continue
        sub = proj[list(members)]
        for j in range(k):
            if j != i:
                cij = float(np.max(sub[:, j] - sub[:, i]))
                data.append((i, j, -cij))
    signs = []
    if variant == "pm":
        shape = c.shape
        for i in range(k):
            if shape[i] > bounds.lower[i]:
                signs.append((k, i, 0.0))
            if shape[i] < bounds.upper[i]:
                signs.append((i, k, 0.0))
    return data, signs


def weights_for_sites(ps: PointSet, c: Clustering, a, variant: str = "eq", bounds: Bounds | None = None) -> WeightResult:
    """Weights ``alpha`` of a power diagram with sites ``a`` separating ``c``.

    The largest uniform margin ``delta*`` by which every point can beat every
    foreign cell is found by bisection; the weights returned realise
    ``delta*/2`` so the strict separation survives rounding.  ``margin`` is 0
    for site vectors on the cone boundary.  For ``variant="pm"`` the weights
    also obey the sign rules: ``alpha_i <= 0`` if cluster ``i`` may shrink and
    ``alpha_i >= 0`` if it may grow.

    Raises
    ------
    InfeasibleWeights
        With a negative cycle as witness if no weights exist.
    """
    if variant not in ("pm", "eq"):
        raise InvalidInput("variant must be 'pm' or 'eq'")
    if ps.n != c.n:
        raise InvalidInput("clustering does not match the point set")
    if variant == "pm":
        bounds = bounds if bounds is not None else Bounds.all_shapes(ps.n, c.k)
        if not c.feasible(bounds):
            raise InvalidInput("clustering is infeasible for the given bounds")
    sites = _sites(a, c.k, ps.d)
    data, signs = _constraint_graph(ps, c, sites, variant, bounds)
    m = c.k + 1

    def solve(delta):
        return _bellman_ford(m, [(u, v, w - delta) for u, v, w in data] + signs)

    dist, cycle = solve(0.0)
    if dist is None:
        raise InfeasibleWeights("site vector does not induce the clustering", cycle)
    scale = float(np.abs(sites).max() * np.abs(ps.points).max())
    lo = 0.0
    hi = 2.0 * max((abs(w) for _, _, w in data), default=0.0) + scale + 1.0
    if solve(hi)[0] is not None:
        lo = hi
    else:
        for _ in range(_BISECTIONS):
            mid = 0.5 * (lo + hi)
            if solve(mid)[0] is not None:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * max(1.0, hi):
                break
    max_margin = lo if lo > MARGIN_TOL * max(scale, 1e-300) else 0.0
    margin = 0.5 * max_margin
    dist, _ = solve(margin)
    alpha = dist[: c.k] - dist[c.k]
    return WeightResult(PowerDiagram(sites, alpha), margin, max_margin)


def power_diagram(sites, weights) -> PowerDiagram:
    return PowerDiagram(sites, weights)


def locate(pd: PowerDiagram, x, tol: float = 1e-12) -> tuple[int, ...]:
    """All cells containing ``x``, i.e. every maximiser of ``a_i^T x + alpha_i``."""
    s = pd.scores(np.asarray(x, dtype=float).ravel())
    scale = 1.0 + float(np.abs(s).max())
    return tuple(int(i) for i in np.flatnonzero(s >= s.max() - tol * scale))


class Violation(NamedTuple):
    point: int
    cluster: int
    rival: int
    slack: float


class VerifyResult(NamedTuple):
    ok: bool
    violations: list[Violation]
    min_slack: float

    def __bool__(self):
        return self.ok


def verify_induces(pd: PowerDiagram, c: Clustering, ps: PointSet, strict: bool = True, tol: float = 1e-9) -> VerifyResult:
    """Check that every point lies in the cell of its own cluster.

    The slack of point ``x`` in cluster ``i`` is
    ``a_i^T x + alpha_i - max_{l != i} (a_l^T x + alpha_l)``; strict mode
    needs it above ``tol * scale``, weak mode above ``-tol * scale``.
    One violation is reported per failing point.
    """
    if c.k != pd.k or c.n != ps.n:
        raise InvalidInput("diagram, clustering and points disagree in size")
    if pd.k == 1:
        return VerifyResult(True, [], float("inf"))
    s = pd.scores(ps.points)
    own = s[np.arange(ps.n), c.labels]
    rivals = s.copy()
    rivals[np.arange(ps.n), c.labels] = -np.inf
    rival = np.argmax(rivals, axis=1)
    slack = own - rivals[np.arange(ps.n), rival]
    scale = 1.0 + float(np.abs(s).max())
    bad = slack <= tol * scale if strict else slack < -tol * scale
    violations = [Violation(int(j), int(c.labels[j]), int(rival[j]), float(slack[j])) for j in np.flatnonzero(bad)]
    return VerifyResult(not violations, violations, float(slack.min()))


def cell_polygon(pd: PowerDiagram, i: int, box) -> np.ndarray:
    """Vertices of cell ``i`` clipped to ``box = (xmin, ymin, xmax, ymax)``; planar only."""
    if pd.sites.shape[1] != 2:
        raise InvalidInput("cell polygons need d = 2")
    x0, y0, x1, y1 = box
    poly = [np.array(p, dtype=float) for p in ((x0, y0), (x1, y0), (x1, y1), (x0, y1))]
    for j in range(pd.k):
        if j == i or not poly:
            continue
        # keep (a_j - a_i)^T x <= alpha_i - alpha_j
        nrm = pd.sites[j] - pd.sites[i]
        rhs = pd.weights[i] - pd.weights[j]
        out = []
        for cur, nxt in zip(poly, poly[1:] + poly[:1]):
            fc, fn = nrm @ cur - rhs, nrm @ nxt - rhs
            if fc <= 0:
                out.append(cur)
            if (fc < 0 < fn) or (fn < 0 < fc):
                out.append(cur + (fc / (fc - fn)) * (nxt - cur))
        poly = out
    return np.array(poly).reshape(-1, 2)
