import warnings

import numpy as np
import pytest

from clustervol.cli import fixture_path
from clustervol.core import Bounds, Clustering, PointSet, load_dataset

TWELVE_POINTS = [
    (1, 0), (1, -1), (2, 0), (0, -1),
    (-2, 0), (-2, -2), (-3, -1), (-3, 1),
    (-1, 2), (-1, 3), (0, 3), (1, 2),
]
TWELVE_CLUSTERS = [[0, 1, 2, 3], [4, 5, 6, 7], [8, 9, 10, 11]]
# path movement: (0,-1) black -> blue, (-3,1) blue -> red
PATH_CLUSTERS = [[0, 1, 2], [3, 4, 5, 6], [7, 8, 9, 10, 11]]
# cyclic movement: the path above plus (1,2) red -> black
CYCLE_CLUSTERS = [[0, 1, 2, 11], [3, 4, 5, 6], [7, 8, 9, 10]]


@pytest.fixture
def twelve():
    ps = PointSet(np.array(TWELVE_POINTS, dtype=float))
    return ps, Clustering.from_clusters(TWELVE_CLUSTERS)


@pytest.fixture
def twelve_dataset():
    return load_dataset(fixture_path("twelve"))


@pytest.fixture(autouse=True)
def _quiet_general_position():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="points are not in general position")
        yield


def random_points(rng, n, d=2, scale=3.0):
    return PointSet(rng.normal(size=(n, d)) * scale)


def random_clustering(rng, n, k, bounds=None):
    while True:
        labels = rng.integers(0, k, size=n)
        c = Clustering(labels, k)
        if bounds is None or c.feasible(bounds):
            return c


def balanced_shape(n, k):
    shape = np.full(k, n // k)
    shape[: n % k] += 1
    return shape


def random_window(rng, n, k):
    """Random size window ``lower <= upper`` that admits some clustering."""
    while True:
        lo = rng.integers(0, n // k + 1, size=k)
        hi = lo + rng.integers(0, n + 1, size=k)
        hi = np.minimum(hi, n)
        b = Bounds(lo, hi)
        if lo.sum() <= n <= hi.sum():
            return b


def general_position_instance(rng, n, k, variant):
    """Random points satisfying the variant's general-position condition, and a vertex clustering.

    The clustering maximises a random linear objective over the variant's polytope.
    """
    from clustervol.assign import lsa_fixed_shape, maximize_linear_bounded
    from clustervol.core import check_general_position

    while True:
        ps = random_points(rng, n)
        if check_general_position(ps).guarantees(variant):
            break
    a = rng.normal(size=ps.d * k)
    if variant == "eq":
        c = lsa_fixed_shape(ps, a, balanced_shape(n, k))
    else:
        c = maximize_linear_bounded(ps, a, Bounds.all_shapes(n, k)).clustering
    return ps, c


def same_directions(A, B, tol=1e-9):
    """Equality of two sets of unit vectors, matched one to one within ``tol``."""
    A, B = np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    if A.shape != B.shape:
        return False
    used = np.zeros(len(B), dtype=bool)
    for row in A:
        dist = np.abs(B - row).max(axis=1)
        dist[used] = np.inf
        j = int(np.argmin(dist)) if len(dist) else -1
        if j < 0 or dist[j] > tol:
            return False
        used[j] = True
    return True


def facet_directions(cone):
    f = cone.facets
    return f / np.linalg.norm(f, axis=1)[:, None]


# rays of a three-sided cone whose apex region fools ray-distance arguments
COUNTER_RAYS = [[0.0, 3**0.5, 3.0], [0.0, -(3**0.5), 3.0], [3**0.5, 0.0, 3.0]]


def counterexample_cone():
    """Facet-filtered H-representation of the cone spanned by ``COUNTER_RAYS``."""
    from clustervol.cone import NormalConeH, filter_facets

    rays = np.array(COUNTER_RAYS)
    normals = []
    for i in range(3):
        for j in range(i + 1, 3):
            n = np.cross(rays[i], rays[j])
            other = rays[3 - i - j]
            normals.append(n if n @ other < 0 else -n)
    return filter_facets(NormalConeH.from_normals(normals))


_ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Record ``(number, ok, detail)`` for the acceptance summary."""
    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
