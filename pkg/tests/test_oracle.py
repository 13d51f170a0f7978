import numpy as np
import pytest

from clustervol.cone import build_normal_cone, estimate_volume, filter_facets
from clustervol.core import Bounds, Clustering, PointSet, clustering_vector
from clustervol.movements import apply_movement, build_cdg, decompose
from clustervol.oracle import (
    GuardExceeded,
    PolytopeOracle,
    empirical_lsa_frequency,
    enumerate_feasible,
    is_vertex,
    oracle_adjacent,
)

from conftest import facet_directions, general_position_instance, random_points, same_directions


def swapped_twelve(twelve):
    ps, c = twelve
    labels = c.labels.copy()
    labels[[2, 7]] = labels[[7, 2]]
    return ps, Clustering(labels, 3)


def test_enumeration_counts():
    three = PointSet([[1.0, 0.0], [0.0, 1.0], [1.0, 2.0]])
    assert len(enumerate_feasible(three, Bounds([0, 0], [3, 3]))) == 8
    four = PointSet([[1.0, 0.0], [0.0, 1.0], [1.0, 2.0], [3.0, 1.0]])
    found = enumerate_feasible(four, Bounds.single_shape([2, 2]))
    assert len(found) == 6 and len({tuple(c.labels) for c in found}) == 6


def test_twelve_single_shape_count(twelve):
    ps, _ = twelve
    assert len(PolytopeOracle(ps, Bounds.single_shape([4, 4, 4]))) == 34650


def test_guard():
    ps = PointSet(np.arange(1, 31, dtype=float).reshape(15, 2))
    with pytest.raises(GuardExceeded):
        enumerate_feasible(ps, Bounds.all_shapes(15, 3))
    small = PointSet([[1.0, 0.0], [0.0, 1.0], [1.0, 2.0]])
    with pytest.raises(GuardExceeded):
        PolytopeOracle(small, Bounds.all_shapes(3, 2), guard=7)


@pytest.mark.parametrize("variant", ["eq", "pm"])
def test_twelve_is_vertex(twelve, variant):
    ps, c = twelve
    cert = is_vertex(ps, c, variant)
    assert cert.is_vertex and cert.distance > 0
    # the witness direction strictly prefers w(C) to every other clustering
    bounds = Bounds.single_shape([4, 4, 4]) if variant == "eq" else Bounds.all_shapes(12, 3)
    orc = PolytopeOracle(ps, bounds)
    w = clustering_vector(ps, c)
    vals = orc.vectors @ cert.direction
    g = orc.group(c)
    scale = np.abs(orc.vectors).max() * np.linalg.norm(cert.direction)
    assert np.all(np.delete(vals, g) < vals[g] - 1e-9 * scale)
    assert vals[g] == pytest.approx(w @ cert.direction)


def test_swapped_twelve_is_not_vertex(twelve):
    ps, c = swapped_twelve(twelve)
    cert = is_vertex(ps, c, "eq")
    assert not cert.is_vertex and cert.direction is None
    assert np.all(cert.coefficients >= 0) and cert.coefficients.sum() == pytest.approx(1.0)
    recon = sum(lam * clustering_vector(ps, s) for lam, s in zip(cert.coefficients, cert.support))
    np.testing.assert_allclose(recon, clustering_vector(ps, c), atol=1e-8)


def test_two_points_both_vertices():
    ps = PointSet([[1.0, 0.0], [0.0, 1.0]])
    orc = PolytopeOracle(ps, Bounds.single_shape([1, 1]))
    assert len(orc) == 2 and len(orc.vertices()) == 2
    assert orc.adjacent(Clustering([0, 1], 2), Clustering([1, 0], 2))


def test_identical_clusterings_not_adjacent(twelve):
    ps, c = twelve
    assert not oracle_adjacent(ps, c, c, "eq")


def test_facet_movement_gives_adjacent_vertex():
    rng = np.random.default_rng(11)
    ps, c = general_position_instance(rng, 6, 2, "eq")
    cone = filter_facets(build_normal_cone(ps, c, "eq"))
    assert len(cone.facet_indices) > 0
    for i in cone.facet_indices:
        c2 = apply_movement(c, cone.movements[i])
        assert oracle_adjacent(ps, c, c2, "eq")


def test_two_disjoint_swaps_not_adjacent():
    rng = np.random.default_rng(5)
    ps, c = general_position_instance(rng, 8, 2, "eq")
    orc = PolytopeOracle(ps, Bounds.single_shape(c.shape))
    g = orc.group(c)
    checked = 0
    for h in orc.vertices():
        c2 = orc.labelings(h)[0]
        moves = decompose(build_cdg(c, c2))
        if len(moves) == 2 and all(m.cyclic and m.length == 2 for m in moves):
            assert not orc.groups_adjacent(g, h)
            checked += 1
    assert checked > 0


@pytest.mark.parametrize("variant", ["eq", "pm"])
@pytest.mark.parametrize("seed,n,k", [(0, 6, 2), (1, 7, 2), (2, 6, 3), (3, 7, 3), (4, 8, 2)])
def test_edges_match_facets_and_have_restricted_shape(seed, n, k, variant):
    rng = np.random.default_rng(100 + seed)
    ps, c = general_position_instance(rng, n, k, variant)
    cone = filter_facets(build_normal_cone(ps, c, variant))
    bounds = Bounds.single_shape(c.shape) if variant == "eq" else Bounds.all_shapes(n, k)
    orc = PolytopeOracle(ps, bounds)
    g = orc.group(c)
    assert same_directions(facet_directions(cone), orc.edge_directions(g))
    for h in orc.neighbors(g):
        moves = decompose(build_cdg(c, orc.labelings(h)[0]))
        single = len(moves) == 1
        parallel_steps = len(moves) == 2 and all(not m.cyclic and m.length == 1 for m in moves)
        assert single or parallel_steps


@pytest.mark.parametrize("seed", range(2))
def test_vertices_are_exactly_the_positive_volume_clusterings(seed):
    rng = np.random.default_rng(seed)
    ps = random_points(rng, 5)
    orc = PolytopeOracle(ps, Bounds.single_shape([3, 2]))
    vertex_groups = set(orc.vertices())
    for g in range(len(orc.vectors)):
        c = orc.labelings(g)[0]
        est = estimate_volume(build_normal_cone(ps, c, "eq"), 20_000, seed=seed)
        assert (g in vertex_groups) == (est.mu_hat > 3 * est.std_err)


def test_frequency_trivial_cases(twelve):
    ps = PointSet([[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]])
    one = empirical_lsa_frequency(ps, Clustering([0, 0, 0], 1), 200, seed=0)
    assert one.freq == 1.0 and one.std_err == 0.0
    ps, c = swapped_twelve(twelve)
    assert empirical_lsa_frequency(ps, c, 2000, seed=0).freq == 0.0


def test_frequency_is_seeded(twelve):
    ps, c = twelve
    a = empirical_lsa_frequency(ps, c, 500, seed=3)
    assert a == empirical_lsa_frequency(ps, c, 500, seed=3)
    assert 0 < a.freq < 1
