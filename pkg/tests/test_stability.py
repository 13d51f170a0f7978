import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clustervol.assign import lsa_fixed_shape
from clustervol.cone import NormalConeH, build_normal_cone, cone_contains, filter_facets
from clustervol.core import InvalidInput
from clustervol.stability import (
    NotAVertex,
    ball_support_violation,
    corner_violation,
    dual_exponent,
    gamma_p,
    has_interior,
    min_norm_point,
    most_stable_site,
    norm_constant,
    parse_p,
    rescale_for_norm,
    stability_of,
)

from conftest import COUNTER_RAYS, balanced_shape, counterexample_cone, random_points

def twelve_cone(twelve, variant="eq"):
    ps, c = twelve
    return filter_facets(build_normal_cone(ps, c, variant))


def test_parse_and_dual():
    assert parse_p("inf") == math.inf and parse_p(2) == 2.0
    assert dual_exponent(1) == math.inf and dual_exponent("inf") == 1.0
    assert dual_exponent(3) == pytest.approx(1.5)
    with pytest.raises(InvalidInput):
        parse_p(0.5)


def test_gamma_examples():
    v = np.array([0.3, -1.2, 2.0])
    assert gamma_p(v, 2) == pytest.approx(-np.linalg.norm(v))
    assert gamma_p([1.0, 1.0], "inf") == -2.0
    assert gamma_p([3.0, -4.0], 1) == -4.0
    with pytest.raises(InvalidInput):
        gamma_p([0.0, 0.0], 2)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1.0, 1.5, 2.0, 3.0, math.inf]))
def test_gamma_is_ball_minimum(seed, p):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=4)
    g = gamma_p(v, p)
    assert g < 0
    # no point of the unit p-ball does better
    z = rng.normal(size=(2000, 4))
    z /= np.linalg.norm(z, ord=p, axis=1)[:, None]
    assert (z @ v).min() >= g - 1e-12


def test_single_facet():
    res = most_stable_site(NormalConeH.from_normals([[1.0, 0.0, 0.0]]), 2)
    np.testing.assert_allclose(res.z, [-1.0, 0.0, 0.0], atol=1e-12)
    assert res.tau == pytest.approx(1.0)


def test_symmetric_two_facet_case():
    res = most_stable_site(NormalConeH.from_normals([[2.0, -1.0], [-2.0, -1.0]]), 2)
    np.testing.assert_allclose(res.z, [0.0, math.sqrt(5.0)], atol=1e-6)
    assert res.tau == pytest.approx(1 / math.sqrt(5.0), abs=1e-6)
    assert res.kkt_residual <= 1e-8
    assert sorted(res.active_set) == [0, 1]


def test_counterexample_center_is_interior():
    cone = counterexample_cone()
    res = most_stable_site(cone, 2)
    assert cone_contains(cone, res.z, strict=True)
    assert res.tau > 0
    boundary = np.array([0.0, 0.0, 2.0])
    # the boundary point is at distance 1 from each ray yet not a valid centre
    for r in np.array(COUNTER_RAYS):
        assert np.linalg.norm(boundary - 0.5 * r) == pytest.approx(1.0, abs=1e-12)
    assert stability_of(cone, boundary, 2) == pytest.approx(0.0, abs=1e-9)
    assert not np.allclose(res.z, boundary)


def test_stability_of_examples():
    half = NormalConeH.from_normals([[1.0, 0.0, 0.0]])
    assert stability_of(half, [-1.0, 0.0, 0.0], 2) == pytest.approx(1.0)
    assert stability_of(half, [0.0, 1.0, 0.0], 2) == 0.0
    with pytest.raises(InvalidInput):
        stability_of(half, [1.0, 0.0, 0.0], 2)


@pytest.mark.parametrize("p", [1, 2, "inf"])
@pytest.mark.parametrize("variant", ["eq", "pm"])
def test_twelve_solution_properties(twelve, variant, p):
    cone = twelve_cone(twelve, variant)
    res = most_stable_site(cone, p)
    assert res.kkt_residual <= 1e-8
    assert res.tau * np.linalg.norm(res.z) == pytest.approx(1.0)
    q = dual_exponent(p)
    gam = -np.linalg.norm(cone.facets, ord=q, axis=1)
    scale = np.abs(gam).max()
    assert np.all(cone.facets @ res.z <= gam + 1e-8 * scale)
    # stationarity with nonnegative multipliers on the active facets
    np.testing.assert_allclose(-cone.normals[list(res.active_set)].T @ res.multipliers, res.z, atol=1e-7)
    assert np.all(res.multipliers >= 0)
    assert ball_support_violation(cone, res.z, p) <= 1e-8 * scale
    assert stability_of(cone, res.z, p) == pytest.approx(res.tau, rel=1e-7)


def test_all_normals_give_same_optimum(twelve):
    # redundant normals carry slack at the optimum, so the solution is unchanged
    cone = twelve_cone(twelve)
    a = most_stable_site(cone, 2)
    b = most_stable_site(cone, 2, use_all_normals=True)
    np.testing.assert_allclose(a.z, b.z, atol=1e-7)


def test_random_cones_reach_kkt_tolerance():
    rng = np.random.default_rng(4)
    for _ in range(40):
        V = rng.normal(size=(6, 3)) + np.array([0.0, 0.0, 2.0])
        cone = filter_facets(NormalConeH.from_normals(V))
        res = most_stable_site(cone, 2)
        gam = -np.linalg.norm(cone.facets, axis=1)
        assert np.all(cone.facets @ res.z <= gam + 1e-8 * np.abs(gam).max())
        assert res.kkt_residual <= 1e-8


def test_uniqueness_from_different_starts(twelve):
    cone = twelve_cone(twelve)
    a = most_stable_site(cone, 2)
    rng = np.random.default_rng(0)
    b = most_stable_site(cone, 2, init=rng.uniform(0, 5, size=len(cone.facets)))
    np.testing.assert_allclose(a.z, b.z, atol=1e-7)


def _random_vertex_cone(rng, n=7, k=3):
    ps = random_points(rng, n)
    a = rng.normal(size=2 * k)
    c = lsa_fixed_shape(ps, a, balanced_shape(n, k))
    return filter_facets(build_normal_cone(ps, c, "eq")), a


@pytest.mark.parametrize("p", [2, "inf", 1])
@pytest.mark.parametrize("seed", range(3))
def test_tau_is_maximal(seed, p):
    rng = np.random.default_rng(seed)
    cone, a0 = _random_vertex_cone(rng)
    res = most_stable_site(cone, p)
    tested = 0
    while tested < 100:
        a = a0 + rng.normal(size=a0.size) * rng.uniform(0, 2)
        if not cone_contains(cone, a, strict=True):
            continue
        assert stability_of(cone, a, p) <= res.tau + 1e-9
        tested += 1


@pytest.mark.parametrize("p", [1, 2, 3, "inf"])
def test_block_perturbations_stay_in_cone(twelve, p):
    cone = twelve_cone(twelve)
    res = most_stable_site(cone, p)
    k, d = 3, 2
    radius = (k + 1) ** (-1.0 / parse_p(p))
    rng = np.random.default_rng(1)
    for _ in range(1000):
        blocks = rng.normal(size=(k, d))
        blocks /= np.linalg.norm(blocks, ord=parse_p(p), axis=1)[:, None]
        blocks *= radius * rng.uniform(0, 1, size=(k, 1))
        assert cone_contains(cone, res.z + blocks.ravel())


def test_norm_constant_examples():
    assert norm_constant(2, 2, 6) == 1.0
    assert norm_constant(2, "inf", 6) == pytest.approx(math.sqrt(6))
    assert norm_constant("inf", 2, 6) == 1.0
    np.testing.assert_array_equal(rescale_for_norm([1.0, 2.0], 3, 3), [1.0, 2.0])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1.0, 2.0, 3.0, math.inf]), st.sampled_from([1.0, 2.0, 3.0, math.inf]))
def test_norm_constant_is_valid(seed, p, q):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=6) * rng.integers(0, 2, size=6)
    if not x.any():
        x[0] = 1.0
    assert np.linalg.norm(x, ord=p) <= norm_constant(p, q, 6) * np.linalg.norm(x, ord=q) * (1 + 1e-12)


@pytest.mark.parametrize("p,q", [(2, "inf"), ("inf", 2), (1, 2), (2, 1), (1, "inf"), ("inf", 1)])
def test_rescaled_centre_contains_q_ball(twelve, p, q):
    cone = twelve_cone(twelve)
    zp = most_stable_site(cone, p).z
    zq = most_stable_site(cone, q).z
    z2 = rescale_for_norm(zp, p, q)
    scale = np.abs(cone.facets).sum(axis=1).max()
    assert ball_support_violation(cone, z2, q) <= 1e-9 * scale
    m = zp.size
    bound = max(norm_constant(p, q, m), norm_constant(q, p, m)) ** 2 * (zq @ zq)
    assert z2 @ z2 <= bound * (1 + 1e-9)


def test_corners_of_rescaled_centre(twelve):
    cone = twelve_cone(twelve)
    z = rescale_for_norm(most_stable_site(cone, 2).z, 2, "inf")
    assert corner_violation(cone, z) <= 1e-9


def test_corner_and_support_agree(twelve):
    cone = twelve_cone(twelve)
    rng = np.random.default_rng(2)
    for _ in range(50):
        c = rng.normal(size=6) * 5
        # the support function of the inf-ball is attained at a corner
        assert corner_violation(cone, c) == pytest.approx(ball_support_violation(cone, c, "inf"), abs=1e-9)


def test_min_norm_point_examples():
    x, support, w = min_norm_point([[1.0, 1.0], [1.0, -1.0], [3.0, 0.0]])
    np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-12)
    assert sorted(support.tolist()) == [0, 1]
    np.testing.assert_allclose(w, [0.5, 0.5])
    x, support, _ = min_norm_point([[2.0, 3.0]])
    np.testing.assert_array_equal(x, [2.0, 3.0])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 12), st.integers(2, 5))
def test_min_norm_point_is_optimal(seed, n, m):
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(n, m)) + rng.normal(size=m)
    x, support, w = min_norm_point(P)
    np.testing.assert_allclose(w @ P[support], x, atol=1e-9)
    assert np.all(w >= 0) and w.sum() == pytest.approx(1.0)
    # Wolfe criterion: x^T p >= ||x||^2 for every point
    assert (P @ x).min() >= x @ x - 1e-9 * (1 + (P * P).sum(axis=1).max())


def test_empty_interior_raises():
    flat = NormalConeH.from_normals([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    assert not has_interior(flat)
    with pytest.raises(NotAVertex):
        most_stable_site(flat, 2)
    assert has_interior(NormalConeH.from_normals([[1.0, 0.0], [0.0, 1.0]]))


def test_whole_space_rejected():
    with pytest.raises(InvalidInput):
        most_stable_site(NormalConeH.from_normals(np.zeros((0, 3))), 2)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 6), st.integers(1, 6))
def test_nnls_matches_scipy(seed, rows, cols):
    from scipy.optimize import nnls as scipy_nnls

    from clustervol.stability import _nnls

    rng = np.random.default_rng(seed)
    A = rng.normal(size=(rows, cols))
    b = rng.normal(size=rows)
    ours = _nnls(A, b)
    ref, _ = scipy_nnls(A, b)
    assert np.all(ours >= 0)
    assert np.linalg.norm(A @ ours - b) == pytest.approx(np.linalg.norm(A @ ref - b), abs=1e-9)
