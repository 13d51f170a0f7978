"""Point sets, size bounds, clusterings and clustering vectors.

A clustering of ``n`` points into ``k`` labelled clusters is stored as a
label array.  Its clustering vector concatenates the per-cluster coordinate
sums, giving a point in ``R^(d*k)``.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "InvalidInput",
    "PointSet",
    "Bounds",
    "Clustering",
    "Dataset",
    "GeneralPosition",
    "clustering_vector",
    "check_general_position",
    "objective",
    "load_dataset",
    "save_dataset",
]

COLLINEAR_TOL = 1e-9


class InvalidInput(ValueError):
    """Raised for malformed point sets, bounds, clusterings or dataset files."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PointSet:
    """``n`` distinct, non-zero points in ``R^d`` (rows of ``points``)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] == 0:
            raise InvalidInput("points must be a non-empty (n, d) array")
        if not np.all(np.isfinite(pts)):
            raise InvalidInput("points must be finite")
        if np.any(np.all(pts == 0.0, axis=1)):
            raise InvalidInput("the zero vector is not allowed as a data point")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise InvalidInput("points must be pairwise distinct")
        object.__setattr__(self, "points", _frozen(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n


@dataclass(frozen=True, eq=False)
class Bounds:
    """Lower and upper cluster-size bounds ``s-`` and ``s+``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.int64).ravel().copy()
        hi = np.asarray(self.upper, dtype=np.int64).ravel().copy()
        if lo.shape != hi.shape or lo.size == 0:
            raise InvalidInput("lower and upper bounds need the same positive length")
        if np.any(lo < 0) or np.any(lo > hi):
            raise InvalidInput("bounds must satisfy 0 <= lower <= upper")
        object.__setattr__(self, "lower", _frozen(lo))
        object.__setattr__(self, "upper", _frozen(hi))

    @property
    def k(self) -> int:
        return self.lower.size

    @classmethod
    def all_shapes(cls, n: int, k: int) -> "Bounds":
        return cls(np.zeros(k, dtype=int), np.full(k, n))

    @classmethod
    def single_shape(cls, shape: Sequence[int]) -> "Bounds":
        return cls(shape, shape)

    def validate(self, n: int) -> None:
        if np.any(self.upper > n):
            raise InvalidInput(f"upper bounds exceed n={n}")
        if self.lower.sum() > n or self.upper.sum() < n:
            raise InvalidInput("no feasible clustering: need sum(lower) <= n <= sum(upper)")

    def admits(self, shape: Sequence[int]) -> bool:
        shape = np.asarray(shape)
        return bool(np.all(self.lower <= shape) and np.all(shape <= self.upper))

    def __eq__(self, other):
        if not isinstance(other, Bounds):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))


@dataclass(frozen=True, eq=False)
class Clustering:
    """Assignment of point ``j`` to cluster ``labels[j]`` in ``range(k)``.

    Labels are significant: permuting them yields a different clustering.
    """

    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).ravel().copy()
        if self.k < 1:
            raise InvalidInput("k must be positive")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise InvalidInput("cluster label out of range")
        object.__setattr__(self, "labels", _frozen(labels))

    @classmethod
    def from_clusters(cls, clusters: Sequence[Iterable[int]], n: int | None = None) -> "Clustering":
        clusters = [list(c) for c in clusters]
        members = [j for c in clusters for j in c]
        if n is None:
            n = len(members)
        if sorted(members) != list(range(n)):
            raise InvalidInput("clusters must partition the point indices 0..n-1")
        labels = np.empty(n, dtype=np.int64)
        for i, c in enumerate(clusters):
            labels[c] = i
        return cls(labels, len(clusters))

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def shape(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    @property
    def clusters(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(np.flatnonzero(self.labels == i).tolist()) for i in range(self.k))

    def feasible(self, bounds: Bounds) -> bool:
        return bounds.k == self.k and bounds.admits(self.shape)

    def relabel(self, perm: Sequence[int]) -> "Clustering":
        """Return the clustering whose cluster ``perm[i]`` is this cluster ``i``."""
        perm = np.asarray(perm)
        return Clustering(perm[self.labels], self.k)

    def canonical(self) -> tuple[int, ...]:
        """Labels renumbered by first appearance; equal for label permutations."""
        mapping: dict[int, int] = {}
        return tuple(mapping.setdefault(int(l), len(mapping)) for l in self.labels)

    def __eq__(self, other):
        if not isinstance(other, Clustering):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.labels, other.labels)

    def __hash__(self):
        return hash((self.k, self.labels.tobytes()))

    def __repr__(self):
        return f"Clustering(k={self.k}, clusters={self.clusters})"


@dataclass(frozen=True)
class GeneralPosition:
    no_3_collinear: bool
    no_4_collinear: bool
    # no two points x, y with x = lambda * y; excludes the parallel-movement edges
    no_parallel_pairs: bool

    def guarantees(self, variant: str) -> bool:
        if variant == "eq":
            return self.no_4_collinear
        return self.no_3_collinear and self.no_parallel_pairs


def clustering_vector(ps: PointSet, c: Clustering) -> np.ndarray:
    """Concatenated cluster sums ``(sigma_1, ..., sigma_k)`` as a flat array.

    Blocks of empty clusters are zero.
    """
    if c.n != ps.n:
        raise InvalidInput(f"clustering has {c.n} labels but the point set has {ps.n} points")
    w = np.zeros((c.k, ps.d))
    np.add.at(w, c.labels, ps.points)
    return w.ravel()


def objective(ps: PointSet, c: Clustering, sites: np.ndarray) -> float:
    """Sum of squared distances of every point to the site of its cluster."""
    sites = np.asarray(sites, dtype=float).reshape(c.k, ps.d)
    diff = ps.points - sites[c.labels]
    return float(np.einsum("ij,ij->", diff, diff))


def _collinear(p: np.ndarray, q: np.ndarray, r: np.ndarray, scale2: float) -> bool:
    u, v = q - p, r - p
    # all 2x2 minors of [u; v] vanish iff u and v are parallel
    minors = np.outer(u, v) - np.outer(v, u)
    return float(np.max(np.abs(minors))) <= COLLINEAR_TOL * scale2


def check_general_position(ps: PointSet) -> GeneralPosition:
    """Exhaustive collinearity scan over triples and quadruples.

    Uses the scale-aware test ``|det| <= 1e-9 * max|coord|^2``.
    """
    pts = ps.points
    scale2 = max(float(np.max(np.abs(pts))) ** 2, 1e-300)
    n = ps.n
    lines: list[tuple[int, int, int]] = []
    for a, b, c in itertools.combinations(range(n), 3):
        if _collinear(pts[a], pts[b], pts[c], scale2):
            lines.append((a, b, c))
    no4 = True
    if lines:
        collinear_triples = set(lines)
        for a, b, c in lines:
            for e in range(c + 1, n):
                if (a, b, e) in collinear_triples and (a, c, e) in collinear_triples:
                    no4 = False
                    break
            if not no4:
                break
    origin = np.zeros(ps.d)
    parallel = any(
        _collinear(origin, pts[a], pts[b], scale2) for a, b in itertools.combinations(range(n), 2)
    )
    return GeneralPosition(not lines, no4, not parallel)


@dataclass(frozen=True, eq=False)
class Dataset:
    """In-memory form of the JSON dataset file."""

    points: PointSet
    bounds: Bounds
    clustering: Clustering | None = None
    extra: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.bounds.k

    def with_clustering(self, c: Clustering | None) -> "Dataset":
        return Dataset(self.points, self.bounds, c, dict(self.extra))

    def to_json(self) -> dict:
        doc = {
            "points": self.points.points.tolist(),
            "k": self.k,
            "lower": self.bounds.lower.tolist(),
            "upper": self.bounds.upper.tolist(),
        }
        if self.clustering is not None:
            doc["clustering"] = [list(cl) for cl in self.clustering.clusters]
        doc.update(self.extra)
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "Dataset":
        try:
            ps = PointSet(np.asarray(doc["points"], dtype=float))
            k = int(doc["k"])
            lower = doc.get("lower", [0] * k)
            upper = doc.get("upper", [ps.n] * k)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidInput):
                raise
            raise InvalidInput(f"malformed dataset: {exc}") from exc
        bounds = Bounds(lower, upper)
        if bounds.k != k:
            raise InvalidInput("length of bounds must equal k")
        bounds.validate(ps.n)
        clustering = None
        if doc.get("clustering") is not None:
            clusters = doc["clustering"]
            if len(clusters) != k:
                raise InvalidInput("clustering must list exactly k clusters")
            clustering = Clustering.from_clusters(clusters, ps.n)
        known = {"points", "k", "lower", "upper", "clustering"}
        extra = {key: val for key, val in doc.items() if key not in known}
        return cls(ps, bounds, clustering, extra)


def load_dataset(path: str | Path) -> Dataset:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path}: not valid JSON ({exc})") from exc
    return Dataset.from_json(doc)


def save_dataset(ds: Dataset, path: str | Path) -> None:
    Path(path).write_text(json.dumps(ds.to_json(), indent=2) + "\n", encoding="utf-8")
