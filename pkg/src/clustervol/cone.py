"""Normal cones of clustering vectors, facet filtering and Monte Carlo volume.

The normal cone of ``w(C)`` on a partition polytope is written as
``{z : v^T z <= 0}`` over the vectors ``v`` of all single (cyclical)
movements that lead from ``C`` to another feasible clustering.  Every such
inequality is valid, and together they are also sufficient: a site vector
satisfying all of them admits no improving residual cycle in the underlying
transportation problem.
"""
from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterator, NamedTuple

import numpy as np
from scipy.optimize import linprog

from .core import Bounds, Clustering, InvalidInput, PointSet, check_general_position, clustering_vector
from .movements import Movement, movement_matrix

__all__ = [
    "VARIANTS",
    "NormalConeH",
    "VolumeEstimate",
    "GeneralPositionWarning",
    "enumerate_cyclic_movements",
    "enumerate_feasible_single_movements",
    "build_normal_cone",
    "filter_facets",
    "cone_contains",
    "spherical_distance",
    "sphere_surface_area",
    "sphere_samples",
    "estimate_volume",
]

VARIANTS = ("pm", "eq")
FACET_TOL = 1e-8
CHUNK = 8192


class GeneralPositionWarning(UserWarning):
    """Data are not in general position; facets may not be single movements."""


@dataclass(frozen=True, eq=False)
class NormalConeH:
    """H-representation ``{z : normals @ z <= 0}``.

    ``movements[j]`` generated ``normals[j]`` when the cone came from a
    clustering. ``facet_mask`` is ``None`` until :func:`filter_facets` ran.
    """

    normals: np.ndarray
    movements: tuple[Movement, ...] | None = None
    vertex: np.ndarray | None = None
    variant: str | None = None
    facet_mask: np.ndarray | None = None
    guarantee: str = "exact"

    def __post_init__(self):
        normals = np.array(self.normals, dtype=float)
        if normals.ndim != 2:
            raise InvalidInput("normals must be a 2-d array")
        normals.setflags(write=False)
        object.__setattr__(self, "normals", normals)

    @classmethod
    def from_normals(cls, normals) -> "NormalConeH":
        return cls(np.atleast_2d(np.asarray(normals, dtype=float)))

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @property
    def filtered(self) -> bool:
        return self.facet_mask is not None

    @property
    def facet_indices(self) -> np.ndarray:
        if self.facet_mask is None:
            return np.arange(len(self.normals))
        return np.flatnonzero(self.facet_mask)

    @property
    def facets(self) -> np.ndarray:
        return self.normals[self.facet_indices]

    def __len__(self):
        return len(self.normals)


def _members(c: Clustering) -> list[tuple[int, ...]]:
    return list(c.clusters)


def enumerate_cyclic_movements(ps: PointSet, c: Clustering) -> list[Movement]:
    """All cyclical movements over ``2 <= t <= k`` distinct clusters.

    Each cycle starts at its smallest cluster index, so rotations are not
    repeated; both orientations of cycles with ``t >= 3`` are produced.
    """
    if c.n != ps.n:
        raise InvalidInput("clustering does not match the point set")
    members = _members(c)
    out: list[Movement] = []
    for t in range(2, c.k + 1):
        for subset in itertools.combinations(range(c.k), t):
            if any(not members[i] for i in subset):
                continue
            start, rest = subset[0], subset[1:]
            for order in itertools.permutations(rest):
                seq = (start,) + order
                for pts in itertools.product(*(members[i] for i in seq)):
                    out.append(Movement(seq + (start,), pts))
    return out


def enumerate_feasible_single_movements(ps: PointSet, c: Clustering, b: Bounds) -> list[Movement]:
    """Cyclical movements plus every path movement that keeps ``c`` feasible."""
    if not c.feasible(b):
        raise InvalidInput("clustering is infeasible for the given bounds")
    out = enumerate_cyclic_movements(ps, c)
    members = _members(c)
    shape = c.shape
    for t in range(1, c.k):
        for seq in itertools.permutations(range(c.k), t + 1):
            src, dst = seq[0], seq[-1]
            if shape[src] <= b.lower[src] or shape[dst] >= b.upper[dst]:
                continue
            if any(not members[i] for i in seq[:-1]):
                continue
            for pts in itertools.product(*(members[i] for i in seq[:-1])):
                out.append(Movement(seq, pts))
    return out


def build_normal_cone(ps: PointSet, c: Clustering, variant: str = "eq", bounds: Bounds | None = None) -> NormalConeH:
    """Movement-generated H-representation of ``N(w(C))``.

    ``variant="eq"`` fixes the shape of ``c`` (single-shape polytope);
    ``variant="pm"`` uses ``bounds`` (all-shape bounds when omitted).
    """
    if variant not in VARIANTS:
        raise InvalidInput(f"variant must be one of {VARIANTS}")
    if variant == "eq":
        movements = enumerate_cyclic_movements(ps, c)
    else:
        bounds = bounds if bounds is not None else Bounds.all_shapes(ps.n, c.k)
        movements = enumerate_feasible_single_movements(ps, c, bounds)
    gp = check_general_position(ps)
    guarantee = "exact" if gp.guarantees(variant) else "heuristic"
    if guarantee == "heuristic":
        warnings.warn(
            "points are not in general position; cone facets need not be single movements",
            GeneralPositionWarning,
            stacklevel=2,
        )
    normals = movement_matrix(ps, movements, c.k)
    return NormalConeH(
        normals.reshape(len(movements), ps.d * c.k),
        tuple(movements),
        clustering_vector(ps, c),
        variant,
        None,
        guarantee,
    )


def _unit_rows(v: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(v, axis=1)
    if np.any(norms == 0):
        raise InvalidInput("zero normal vector")
    return v / norms[:, None]


def _dedup_directions(units: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Indices of the first representative of each distinct direction."""
    keep = np.ones(len(units), dtype=bool)
    gram = units @ units.T
    for j in range(len(units)):
        if keep[j]:
            dup = gram[j, j + 1 :] > 1.0 - tol
            keep[j + 1 :][dup] = False
    return np.flatnonzero(keep)


def filter_facets(cone: NormalConeH, tol: float = FACET_TOL) -> NormalConeH:
    """Mark irredundant normals.

    Parallel duplicates are collapsed to their first occurrence. The rest are
    tested in order: normal ``u`` is dropped iff ``max u^T z`` subject to the
    normals still kept and ``|z|_inf <= 1`` is at most ``tol`` (all normals
    scaled to unit length). Testing against the kept set only matters for
    cones with empty interior, where normals can imply each other mutually.
    """
    t = len(cone.normals)
    mask = np.zeros(t, dtype=bool)
    if t == 0:
        return replace(cone, facet_mask=mask)
    units = _unit_rows(cone.normals)
    reps = _dedup_directions(units)
    rep_units = units[reps]
    box = [(-1.0, 1.0)] * cone.dim
    alive = np.ones(len(reps), dtype=bool)
    for pos in range(len(reps)):
        alive[pos] = False
        others = rep_units[alive]
        if len(others) == 0:
            alive[pos] = True
            continue
        res = linprog(-rep_units[pos], A_ub=others, b_ub=np.zeros(len(others)), bounds=box, method="highs")
        if res.status != 0:
            raise RuntimeError(f"facet LP failed: {res.message}")
        alive[pos] = -res.fun > tol
    mask[np.asarray(reps)[alive]] = True
    return replace(cone, facet_mask=mask)


def cone_contains(cone: NormalConeH, a, strict: bool = False, tol: float = 1e-9) -> bool:
    """Membership of ``a`` in the cone.

    Non-strict membership allows ``v^T a <= 1e-12 |v| |a|`` to absorb rounding;
    strict membership needs ``v^T a < -tol |v| |a|`` for every normal.
    """
    a = np.asarray(a, dtype=float).ravel()
    if a.size != cone.dim:
        raise InvalidInput("dimension mismatch")
    if len(cone.normals) == 0:
        return bool(np.any(a)) if strict else True
    scale = np.linalg.norm(cone.normals, axis=1) * np.linalg.norm(a)
    vals = cone.normals @ a
    if strict:
        return bool(np.linalg.norm(a) > 0 and np.all(vals < -tol * scale))
    return bool(np.all(vals <= 1e-12 * scale))


def spherical_distance(a, a2) -> float:
    """Geodesic distance between the unit representatives of ``a`` and ``a2``."""
    a = np.asarray(a, dtype=float).ravel()
    a2 = np.asarray(a2, dtype=float).ravel()
    na, nb = np.linalg.norm(a), np.linalg.norm(a2)
    if na == 0 or nb == 0:
        raise InvalidInput("site vectors must be non-zero")
    u, v = a / na, a2 / nb
    return float(2.0 * math.atan2(np.linalg.norm(u - v), np.linalg.norm(u + v)))


def sphere_surface_area(m: int) -> float:
    """Surface area ``2 pi^(m/2) / Gamma(m/2)`` of the unit sphere in ``R^m``."""
    if m < 1:
        raise InvalidInput("m must be positive")
    return 2.0 * math.pi ** (m / 2) / math.gamma(m / 2)


def sphere_samples(m: int, samples: int, seed: int, chunk: int = CHUNK) -> Iterator[np.ndarray]:
    """Uniform unit vectors in ``R^m``, yielded in fixed-size chunks.

    Chunk ``i`` draws from a Philox stream keyed by ``(seed, i)``, so a chunk's
    content does not depend on how chunks are scheduled.
    """
    for idx, start in enumerate(range(0, samples, chunk)):
        yield _sample_chunk(m, min(chunk, samples - start), seed, idx)


def _sample_chunk(m: int, size: int, seed: int, idx: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, idx])))
    z = rng.standard_normal((size, m))
    return z / np.linalg.norm(z, axis=1)[:, None]


class VolumeEstimate(NamedTuple):
    mu_hat: float
    std_err: float
    hits: int
    samples: int


def _count_hits(normals: np.ndarray, z: np.ndarray) -> int:
    if len(normals) == 0:
        return len(z)
    return int(np.count_nonzero(np.all(z @ normals.T <= 0.0, axis=1)))


def estimate_volume(cone: NormalConeH, samples: int, seed: int, workers: int = 1, chunk: int = CHUNK) -> VolumeEstimate:
    """Fraction of the unit sphere inside the cone, by uniform sampling.

    Results are identical for any ``workers`` value.
    """
    if samples < 1:
        raise InvalidInput("samples must be positive")
    m = cone.dim
    normals = cone.normals
    starts = list(range(0, samples, chunk))

    def count(idx):
        size = min(chunk, samples - starts[idx])
        return _count_hits(normals, _sample_chunk(m, size, seed, idx))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            hits = sum(pool.map(count, range(len(starts))))
    else:
        hits = sum(count(i) for i in range(len(starts)))
    mu = hits / samples
    return VolumeEstimate(mu, math.sqrt(mu * (1.0 - mu) / samples), hits, samples)
