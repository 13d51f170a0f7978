"""Clustering difference graphs and (cyclical) movements between clusterings."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .core import Clustering, InvalidInput, PointSet

__all__ = [
    "CDG",
    "Movement",
    "MovementError",
    "build_cdg",
    "decompose",
    "apply_movement",
    "apply_movements",
    "movement_vector",
    "movement_matrix",
]


class MovementError(InvalidInput):
    """A movement does not fit the clustering it is applied to."""


@dataclass(frozen=True)
class Movement:
    """Transfer ``points[l]`` from cluster ``clusters[l]`` to ``clusters[l + 1]``.

    A movement is cyclical when ``clusters[0] == clusters[-1]``; it then
    preserves the shape of the clustering.
    """

    clusters: tuple[int, ...]
    points: tuple[int, ...]

    def __post_init__(self):
        clusters = tuple(int(i) for i in self.clusters)
        points = tuple(int(j) for j in self.points)
        if len(points) < 1 or len(clusters) != len(points) + 1:
            raise MovementError("a movement needs t >= 1 points and t + 1 clusters")
        if any(a == b for a, b in zip(clusters, clusters[1:])):
            raise MovementError("consecutive clusters of a movement must differ")
        if len(set(points)) != len(points):
            raise MovementError("a movement moves each point at most once")
        inner = clusters[:-1] if clusters[0] == clusters[-1] else clusters
        if len(set(inner)) != len(inner):
            raise MovementError("a movement visits each cluster at most once")
        object.__setattr__(self, "clusters", clusters)
        object.__setattr__(self, "points", points)

    @property
    def cyclic(self) -> bool:
        return self.clusters[0] == self.clusters[-1]

    @property
    def length(self) -> int:
        return len(self.points)

    def inverse(self) -> "Movement":
        return Movement(self.clusters[::-1], self.points[::-1])

    def steps(self):
        """Yield ``(source, target, point)`` triples."""
        return zip(self.clusters[:-1], self.clusters[1:], self.points)

    def __str__(self):
        parts = [f"C{self.clusters[0] + 1}"]
        for _, dst, j in self.steps():
            parts.append(f"-[x{j + 1}]-> C{dst + 1}")
        return " ".join(parts)


@dataclass(frozen=True)
class CDG:
    """Labelled directed multigraph of point transfers between two clusterings.

    ``edges`` holds ``(from_cluster, to_cluster, point)``; parallel edges are
    allowed and isolated nodes are dropped.
    """

    k: int
    edges: tuple[tuple[int, int, int], ...]

    @property
    def nodes(self) -> tuple[int, ...]:
        return tuple(sorted({i for e in self.edges for i in e[:2]}))

    def __len__(self):
        return len(self.edges)


def build_cdg(c: Clustering, c2: Clustering) -> CDG:
    if c.n != c2.n or c.k != c2.k:
        raise InvalidInput("clusterings must share n and k")
    moved = np.flatnonzero(c.labels != c2.labels)
    edges = tuple((int(c.labels[j]), int(c2.labels[j]), int(j)) for j in moved)
    return CDG(c.k, edges)


def _find_cycle(out_edges: dict[int, list[tuple[int, int]]]) -> list[tuple[int, int, int]] | None:
    """Depth-first search for a simple directed cycle among remaining edges."""
    state: dict[int, int] = {}  # 1 = on stack, 2 = finished
    for root in sorted(out_edges):
        if state.get(root):
            continue
        path_nodes = [root]
        path_edges: list[tuple[int, int, int]] = []
        iters = [iter(list(out_edges[root]))]
        state[root] = 1
        while iters:
            node = path_nodes[-1]
            step = next(iters[-1], None)
            if step is None:
                state[node] = 2
                iters.pop()
                path_nodes.pop()
                if path_edges:
                    path_edges.pop()
                continue
            dst, j = step
            if state.get(dst) == 1:
                start = path_nodes.index(dst)
                return path_edges[start:] + [(node, dst, j)]
            if state.get(dst) == 2:
                continue
            state[dst] = 1
            path_nodes.append(dst)
            path_edges.append((node, dst, j))
            iters.append(iter(list(out_edges.get(dst, ()))))
    return None


def decompose(g: CDG) -> list[Movement]:
    """Greedy edge-disjoint split of a CDG into cyclical movements, then paths.

    Cycles are extracted first; the acyclic remainder is covered by maximal
    paths. Movements are edge-disjoint and touch distinct points, so they can
    be applied in any order.
    """
    out_edges: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for src, dst, j in sorted(g.edges):
        out_edges[src].append((dst, j))

    def remove(edge_list):
        for src, dst, j in edge_list:
            out_edges[src].remove((dst, j))
            if not out_edges[src]:
                del out_edges[src]

    movements: list[Movement] = []
    while True:
        cycle = _find_cycle(out_edges)
        if cycle is None:
            break
        remove(cycle)
        movements.append(Movement([e[0] for e in cycle] + [cycle[0][0]], [e[2] for e in cycle]))

    while out_edges:
        indeg: dict[int, int] = defaultdict(int)
        for edges in out_edges.values():
            for dst, _ in edges:
                indeg[dst] += 1
        start = min(node for node in out_edges if indeg[node] == 0)
        node, path = start, []
        while node in out_edges:
            dst, j = out_edges[node][0]
            path.append((node, dst, j))
            remove([(node, dst, j)])
            node = dst
        movements.append(Movement([e[0] for e in path] + [path[-1][1]], [e[2] for e in path]))
    return movements


def apply_movement(c: Clustering, m: Movement) -> Clustering:
    if max(m.clusters) >= c.k or max(m.points) >= c.n or min(m.points) < 0:
        raise MovementError("movement refers to clusters or points outside the clustering")
    labels = c.labels.copy()
    for src, dst, j in m.steps():
        if c.labels[j] != src:
            raise MovementError(f"point {j} is not in cluster {src}")
        labels[j] = dst
    return Clustering(labels, c.k)


def apply_movements(c: Clustering, movements) -> Clustering:
    for m in movements:
        c = apply_movement(c, m)
    return c


def movement_vector(ps: PointSet, m: Movement, c: Clustering | None = None) -> np.ndarray:
    """``w(C') - w(C)`` for the clustering ``C'`` reached by applying ``m``.

    When ``c`` is given the movement is checked for applicability first.
    """
    if c is not None:
        apply_movement(c, m)
    k = max(m.clusters) + 1 if c is None else c.k
    return movement_matrix(ps, [m], k)[0]


def movement_matrix(ps: PointSet, movements, k: int) -> np.ndarray:
    """Stack the movement vectors of ``movements`` as rows of a ``(t, d*k)`` array."""
    movements = list(movements)
    d = ps.d
    out = np.zeros((len(movements), k, d))
    for row, m in enumerate(movements):
        for src, dst, j in m.steps():
            x = ps.points[j]
            out[row, src] -= x
            out[row, dst] += x
    return out.reshape(len(movements), k * d)
