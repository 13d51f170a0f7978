"""Seeded Gaussian-blob point sets in general position."""
from __future__ import annotations

import itertools

import numpy as np

from .core import COLLINEAR_TOL, InvalidInput, PointSet

__all__ = ["make_blobs", "blob_centers"]

_MAX_REDRAWS = 10_000


def blob_centers(blobs: int, radius: float, d: int = 2) -> np.ndarray:
    """Centres evenly spread on a circle (first two coordinates) of the given radius."""
    angles = np.pi / 2 + 2 * np.pi * np.arange(blobs) / blobs
    centers = np.zeros((blobs, d))
    centers[:, 0] = radius * np.cos(angles)
    if d > 1:
        centers[:, 1] = radius * np.sin(angles)
    return centers


def _offending(pts: np.ndarray, j: int, scale2: float) -> bool:
    """Does point ``j`` sit on a line through two earlier points or through the origin and one?"""
    x = pts[j]
    if not np.any(np.abs(x) > 1e-12):
        return True
    origin = np.zeros_like(x)
    prev = [pts[i] for i in range(j)]
    for p in prev:
        if np.allclose(p, x, atol=1e-9):
            return True
    if x.size == 1:
        return False
    for p, q in itertools.chain(itertools.combinations(prev, 2), ((origin, p) for p in prev)):
        u, v = q - p, x - p
        if np.max(np.abs(np.outer(u, v) - np.outer(v, u))) <= 100 * COLLINEAR_TOL * scale2:
            return True
    return False


def make_blobs(blobs: int, per_blob: int, spread: float, seed: int, d: int = 2, radius: float = 4.0) -> PointSet:
    """``blobs * per_blob`` points drawn around :func:`blob_centers`.

    Points are drawn in order; a point that is (nearly) zero, duplicated, or
    collinear with two earlier points or with the origin and an earlier point
    is redrawn, so the result has no three collinear points and no two points
    on a common ray (for ``d >= 2``).
    """
    if blobs < 1 or per_blob < 1 or spread <= 0 or d < 1:
        raise InvalidInput("need blobs >= 1, per_blob >= 1, spread > 0, d >= 1")
    rng = np.random.default_rng(seed)
    centers = blob_centers(blobs, radius, d)
    pts = np.zeros((blobs * per_blob, d))
    scale2 = (radius + 4 * spread) ** 2
    for j in range(len(pts)):
        for _ in range(_MAX_REDRAWS):
            pts[j] = centers[j // per_blob] + spread * rng.standard_normal(d)
            if not _offending(pts, j, scale2):
                break
        else:
            raise InvalidInput("could not place points in general position")
    return PointSet(pts)
