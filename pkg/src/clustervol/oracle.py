"""Brute-force ground truth for small instances.

All feasible clusterings are enumerated; vertex and edge questions about
their convex hull are reduced to minimum-norm-point problems.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .assign import solve_transport
from .cone import sphere_samples
from .core import Bounds, Clustering, InvalidInput, PointSet, clustering_vector
from .stability import min_norm_point

__all__ = [
    "GuardExceeded",
    "VertexCertificate",
    "FrequencyEstimate",
    "PolytopeOracle",
    "enumerate_feasible",
    "is_vertex",
    "oracle_adjacent",
    "empirical_lsa_frequency",
]

GUARD = 10**7
# squared distance of 0 to a hull, relative to the squared diameter of the point cloud
HULL_TOL = 1e-10
_ON_LINE = 1e-9


class GuardExceeded(RuntimeError):
    """Exhaustive enumeration would exceed the desk-scale limit."""


@dataclass(frozen=True)
class VertexCertificate:
    """Outcome of a vertex test.

    For a vertex, ``direction`` is a site vector ``a`` with ``a^T w(C) > a^T w(C')``
    for every other clustering vector. Otherwise ``coefficients`` are convex
    weights on the vectors of ``support`` whose combination is ``w(C)``.
    """

    is_vertex: bool
    direction: np.ndarray | None
    support: tuple[Clustering, ...]
    coefficients: np.ndarray | None
    distance: float


def _all_labelings(n: int, k: int, guard: int) -> np.ndarray:
    if k**n > guard:
        raise GuardExceeded(f"k^n = {k}^{n} exceeds the enumeration guard {guard}")
    codes = np.arange(k**n, dtype=np.int64)
    labels = np.empty((k**n, n), dtype=np.int8)
    for j in range(n - 1, -1, -1):
        labels[:, j] = codes % k
        codes //= k
    return labels


def _feasible_labelings(n: int, bounds: Bounds, guard: int) -> np.ndarray:
    k = bounds.k
    labels = _all_labelings(n, k, guard)
    counts = np.stack([(labels == i).sum(axis=1) for i in range(k)], axis=1)
    ok = np.all((counts >= bounds.lower) & (counts <= bounds.upper), axis=1)
    return labels[ok]


def enumerate_feasible(ps: PointSet, bounds: Bounds, guard: int = GUARD) -> list[Clustering]:
    """Every clustering of ``ps`` whose shape lies within ``bounds``."""
    bounds.validate(ps.n)
    return [Clustering(row, bounds.k) for row in _feasible_labelings(ps.n, bounds, guard)]


class PolytopeOracle:
    """Enumerated clustering vectors of ``P(ps, bounds)`` with vertex and edge queries.

    Clustering vectors are grouped: distinct labelings with equal ``w`` form
    one group, and queries are answered per group.
    """

    def __init__(self, ps: PointSet, bounds: Bounds, guard: int = GUARD):
        bounds.validate(ps.n)
        self.ps = ps
        self.bounds = bounds
        self.labels = _feasible_labelings(ps.n, bounds, guard)
        k, d = bounds.k, ps.d
        w = np.zeros((len(self.labels), k, d))
        rows = np.arange(len(self.labels))
        for j in range(ps.n):
            w[rows, self.labels[:, j]] += ps.points[j]
        w = w.reshape(len(self.labels), k * d)
        self._scale = max(1.0, float(np.abs(w).max()))
        keys = np.round(w / self._scale, 9)
        _, first, self.group_of = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        self.group_of = self.group_of.ravel()
        self.vectors = w[first]
        self._vertex_cache: dict[int, VertexCertificate] = {}

    @property
    def k(self) -> int:
        return self.bounds.k

    def __len__(self):
        return len(self.labels)

    def group(self, c: Clustering) -> int:
        if not c.feasible(self.bounds) or c.n != self.ps.n:
            raise InvalidInput("clustering is not feasible for this polytope")
        key = np.round(clustering_vector(self.ps, c) / self._scale, 9)
        hits = np.flatnonzero(np.all(np.round(self.vectors / self._scale, 9) == key, axis=1))
        return int(hits[0])

    def labelings(self, g: int) -> list[Clustering]:
        return [Clustering(row, self.k) for row in self.labels[self.group_of == g]]

    def _hull_distance(self, diffs: np.ndarray):
        y, support, lam = min_norm_point(diffs)
        diam2 = float(np.einsum("ij,ij->i", diffs, diffs).max())
        return y, support, lam, float(y @ y) > HULL_TOL * diam2

    def vertex_certificate(self, g: int) -> VertexCertificate:
        if g in self._vertex_cache:
            return self._vertex_cache[g]
        w = self.vectors[g]
        others = np.delete(np.arange(len(self.vectors)), g)
        if len(others) == 0:
            cert = VertexCertificate(True, np.zeros_like(w), (), None, math.inf)
        else:
            diffs = self.vectors[others] - w
            y, support, lam, separated = self._hull_distance(diffs)
            dist = float(np.linalg.norm(y))
            if separated:
                cert = VertexCertificate(True, -y, (), None, dist)
            else:
                groups = others[support]
                cert = VertexCertificate(False, None, tuple(self.labelings(int(h))[0] for h in groups), lam, dist)
        self._vertex_cache[g] = cert
        return cert

    def is_vertex(self, c: Clustering) -> VertexCertificate:
        return self.vertex_certificate(self.group(c))

    def vertices(self) -> list[int]:
        return [g for g in range(len(self.vectors)) if self.vertex_certificate(g).is_vertex]

    def groups_adjacent(self, g: int, h: int) -> bool:
        """Is ``[w_g, w_h]`` an edge of the polytope?

        All vectors are projected along ``e = w_h - w_g``. The segment is an
        edge iff the common image of its endpoints is a vertex of the
        projected cloud and every vector mapping onto it lies in the segment.
        """
        if g == h:
            return False
        w, e = self.vectors[g], self.vectors[h] - self.vectors[g]
        rel = self.vectors - w
        t = rel @ e / (e @ e)
        proj = rel - t[:, None] * e
        on_line = np.linalg.norm(proj, axis=1) <= _ON_LINE * self._scale
        if np.any(on_line & ((t < -_ON_LINE) | (t > 1 + _ON_LINE))):
            return False
        rest = proj[~on_line]
        if len(rest) == 0:
            return True
        return self._hull_distance(rest)[3]

    def adjacent(self, c: Clustering, c2: Clustering) -> bool:
        return self.groups_adjacent(self.group(c), self.group(c2))

    def neighbors(self, g: int) -> list[int]:
        """Vertices joined to vertex group ``g`` by an edge."""
        return [h for h in self.vertices() if self.groups_adjacent(g, h)]

    def edge_directions(self, g: int) -> np.ndarray:
        nb = self.neighbors(g)
        dirs = self.vectors[nb] - self.vectors[g]
        return dirs / np.linalg.norm(dirs, axis=1)[:, None] if len(nb) else dirs.reshape(0, self.vectors.shape[1])


def _oracle(ps, c, variant, bounds, guard):
    if variant == "eq":
        bounds = Bounds.single_shape(c.shape)
    elif variant == "pm":
        bounds = bounds if bounds is not None else Bounds.all_shapes(ps.n, c.k)
    else:
        raise InvalidInput("variant must be 'pm' or 'eq'")
    return PolytopeOracle(ps, bounds, guard)


def is_vertex(ps: PointSet, c: Clustering, variant: str = "eq", bounds: Bounds | None = None, guard: int = GUARD) -> VertexCertificate:
    return _oracle(ps, c, variant, bounds, guard).is_vertex(c)


def oracle_adjacent(ps: PointSet, c: Clustering, c2: Clustering, variant: str = "eq", bounds: Bounds | None = None, guard: int = GUARD) -> bool:
    """Edge test between the clustering vectors of ``c`` and ``c2``; both must be vertices."""
    orc = _oracle(ps, c, variant, bounds, guard)
    g, h = orc.group(c), orc.group(c2)
    if not (orc.vertex_certificate(g).is_vertex and orc.vertex_certificate(h).is_vertex):
        raise InvalidInput("both clusterings must be vertex clusterings")
    return orc.groups_adjacent(g, h)


class FrequencyEstimate(NamedTuple):
    freq: float
    std_err: float
    hits: int
    samples: int


def empirical_lsa_frequency(ps: PointSet, c: Clustering, samples: int, seed: int) -> FrequencyEstimate:
    """Share of uniform random site directions whose fixed-shape assignment is exactly ``c``."""
    if samples < 1:
        raise InvalidInput("samples must be positive")
    shape = c.shape
    hits = 0
    for chunk in sphere_samples(ps.d * c.k, samples, seed):
        for a in chunk:
            reward = ps.points @ a.reshape(c.k, ps.d).T
            labels = solve_transport(-reward, shape, shape).labels
            hits += bool(np.array_equal(labels, c.labels))
    f = hits / samples
    return FrequencyEstimate(f, math.sqrt(f * (1.0 - f) / samples), hits, samples)
