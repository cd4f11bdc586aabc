import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from smoothcut.convex_geometry import (
    BOX_TAG,
    Ellipsoid,
    HalfspacePolytope,
    InfeasibleOrDegenerate,
    LPFailure,
    dilate,
    ellipsoid_volume,
    feasibility_margin,
    hit_and_run,
    max_inscribed_ellipsoid,
    prune_redundant,
    sample_uniform_ball,
    sandwich_check,
)
from smoothcut.verify import random_polytope

from oracles import brute_force_inellipse, cvxpy_john, mean_radius_quadrature, steiner_inellipse_area

TRIANGLE = HalfspacePolytope([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]], [0.0, 0.0, 1.0])


# -- analytic cases ---------------------------------------------------------

@pytest.mark.parametrize("d", [1, 2, 3, 4, 5, 6])
def test_box_gives_unit_ball(d):
    E = max_inscribed_ellipsoid(HalfspacePolytope.box(d))
    assert np.linalg.norm(E.center) <= 1e-6
    assert np.linalg.norm(E.shape - np.eye(d)) <= 1e-5


def test_anisotropic_box_matches_side_lengths():
    E = max_inscribed_ellipsoid(HalfspacePolytope.box(2, [1.0, 0.5]))
    assert np.allclose(E.center, 0.0, atol=1e-6)
    assert np.allclose(E.shape, np.diag([1.0, 0.5]), atol=1e-5)


def test_triangle_against_brute_force_search():
    c_ref, S_ref = brute_force_inellipse(TRIANGLE.normals, TRIANGLE.offsets)
    E = max_inscribed_ellipsoid(TRIANGLE)
    area = math.exp(E.log_volume)
    # the search only samples containment, so it can only do slightly worse
    ref_area = math.pi * math.sqrt(np.linalg.det(S_ref))
    assert np.allclose(E.center, c_ref, atol=1e-2)
    assert area >= ref_area * (1 - 1e-6)
    assert area == pytest.approx(ref_area, rel=2e-3)
    # the frozen values: centroid and the Steiner inellipse
    assert np.allclose(E.center, [1 / 3, 1 / 3], atol=1e-6)
    assert area == pytest.approx(steiner_inellipse_area([[0, 0], [1, 0], [0, 1]]), rel=1e-5)
    assert area == pytest.approx(0.30229989403903630, rel=1e-5)


@pytest.mark.parametrize("seed", range(6))
def test_matches_conic_solver_on_random_polytopes(seed):
    rng = np.random.default_rng(seed)
    d = 2 + seed % 3
    poly = random_polytope(d, rng, n_cuts=2 * d)
    E = max_inscribed_ellipsoid(poly)
    c_ref, B_ref, logdet_ref = cvxpy_john(poly.normals, poly.offsets)
    sign, logdet = np.linalg.slogdet(E.shape)
    assert sign > 0
    assert logdet == pytest.approx(logdet_ref, abs=1e-4)
    assert np.allclose(E.center, c_ref, atol=1e-3)


# -- polytope operations ----------------------------------------------------

def test_cut_membership_and_value_semantics():
    box = HalfspacePolytope.box(2)
    half = box.cut([1.0, 0.0], 0.0, tag=3)
    assert half.contains([-0.5, 0.0])
    assert not half.contains([0.5, 0.0])
    assert box.n_constraints == 4 and half.n_constraints == 5
    assert half.tags[-1] == 3 and np.all(half.tags[:4] == BOX_TAG)
    with pytest.raises(ValueError):
        box.normals[0, 0] = 5.0


def test_cut_encoding_of_a_labelled_example():
    x, y = np.array([0.4, -0.2]), -1
    poly = HalfspacePolytope.box(2).cut(-y * x, 0.0)
    w_good = np.array([-0.5, 0.1])   # <w, y x> >= 0
    w_bad = np.array([0.5, 0.1])
    assert poly.contains(w_good) and not poly.contains(w_bad)


def test_repeated_cut_keeps_member_set():
    rng = np.random.default_rng(0)
    once = HalfspacePolytope.box(2).cut([1.0, 1.0], 0.2)
    twice = once.cut([1.0, 1.0], 0.2)
    pts = rng.uniform(-1, 1, size=(500, 2))
    assert [once.contains(p) for p in pts] == [twice.contains(p) for p in pts]


def test_cut_rejects_zero_normal():
    with pytest.raises(ValueError):
        HalfspacePolytope.box(2).cut([0.0, 0.0], 1.0)


def test_contains_with_slack():
    box = HalfspacePolytope.box(2)
    assert box.contains([0.0, 0.0])
    assert box.contains([1 + 1e-6, 0.0], slack=1e-5)
    assert not box.contains([2.0, 0.0])


def test_prune_examples():
    box = HalfspacePolytope.box(2)
    assert prune_redundant(box.cut([1.0, 0.0], 1.0, 1)).n_constraints == 4
    assert prune_redundant(box.cut([1.0, 0.0], 2.0, 1)).n_constraints == 4
    kept = prune_redundant(box.cut([1.0, 0.0], 0.5, 1))
    assert kept.n_constraints == 5


def test_prune_keeps_member_set():
    rng = np.random.default_rng(1)
    poly = random_polytope(3, rng, n_cuts=12)
    for k in range(10):
        a = rng.standard_normal(3)
        poly = poly.cut(a, float(np.abs(a).sum()) + rng.uniform(0, 1), 100 + k)   # redundant
    pruned = prune_redundant(poly)
    assert pruned.n_constraints < poly.n_constraints
    pts = rng.uniform(-1.2, 1.2, size=(3000, 3))
    assert all(poly.contains(p) == pruned.contains(p) for p in pts)


def test_prune_lp_failure_carries_diagnostics(monkeypatch):
    import smoothcut.convex_geometry as cg

    class Failed:
        status, message, fun = 4, "numerical difficulties", 0.0

    monkeypatch.setattr(cg, "linprog", lambda *a, **k: Failed())
    with pytest.raises(LPFailure) as info:
        prune_redundant(HalfspacePolytope.box(2).cut([1.0, 0.0], 0.5, 1))
    assert info.value.status == 4 and "numerical" in info.value.detail


# -- volumes ----------------------------------------------------------------

def test_volume_and_dilation():
    disk = Ellipsoid.from_shape([0, 0], np.eye(2))
    assert ellipsoid_volume(disk) == pytest.approx(math.pi)
    assert ellipsoid_volume(dilate(disk, 2.0)) == pytest.approx(4 * math.pi)
    assert ellipsoid_volume(Ellipsoid.from_shape([0, 0], np.diag([1.0, 0.5]))) == pytest.approx(math.pi / 2)
    with pytest.raises(ValueError):
        dilate(disk, 0.0)


def test_shape_symmetric_and_log_volume_formula():
    rng = np.random.default_rng(2)
    E = max_inscribed_ellipsoid(random_polytope(4, rng))
    assert np.max(np.abs(E.shape - E.shape.T)) <= 1e-12
    expected = 0.5 * 4 * math.log(math.pi) - math.lgamma(3) + np.linalg.slogdet(E.shape)[1]
    assert E.log_volume == pytest.approx(expected, abs=1e-12)


# -- errors -----------------------------------------------------------------

def test_empty_polytope_is_degenerate():
    poly = HalfspacePolytope.box(2).cut([1.0, 0.0], -0.5).cut([-1.0, 0.0], -0.5)
    with pytest.raises(InfeasibleOrDegenerate):
        max_inscribed_ellipsoid(poly)


def test_flat_polytope_is_degenerate():
    x = np.array([0.6, 0.3])
    poly = HalfspacePolytope.box(2).cut(-x, 0.0).cut(x, 0.0)
    with pytest.raises(InfeasibleOrDegenerate):
        max_inscribed_ellipsoid(poly)


def test_tol_must_be_positive():
    with pytest.raises(ValueError):
        max_inscribed_ellipsoid(HalfspacePolytope.box(2), tol=0.0)


# -- sandwich and sampling --------------------------------------------------

def test_sandwich_on_box():
    rep = sandwich_check(HalfspacePolytope.box(2), max_inscribed_ellipsoid(HalfspacePolytope.box(2)),
                         2000, np.random.default_rng(0))
    assert rep.ok and rep.max_outer_ratio <= math.sqrt(2) / 2 + 1e-9


def test_sandwich_on_needle():
    needle = HalfspacePolytope.box(2, [1.0, 1e-3])
    E = max_inscribed_ellipsoid(needle)
    rep = sandwich_check(needle, E, 5000, np.random.default_rng(1))
    assert rep.ok


def test_hit_and_run_stays_inside():
    poly = random_polytope(3, np.random.default_rng(3))
    pts = hit_and_run(poly, 2000, np.random.default_rng(4))
    assert pts.shape == (2000, 3)
    assert np.all(pts @ poly.normals.T <= poly.offsets + 1e-9)


def test_uniform_ball_one_dimensional_mean():
    n = 40_000
    x = sample_uniform_ball(1, np.random.default_rng(5), size=n)
    assert np.all(np.abs(x) <= 1)
    assert abs(x.mean()) <= 3 / math.sqrt(n)


def test_uniform_ball_mean_radius_d3():
    ref = mean_radius_quadrature(3)
    assert ref == pytest.approx(0.75, abs=1e-12)
    n = 100_000
    r = np.linalg.norm(sample_uniform_ball(3, np.random.default_rng(6), size=n), axis=1)
    se = r.std() / math.sqrt(n)
    assert abs(r.mean() - ref) <= 4 * se


def test_uniform_ball_reproducible():
    a = sample_uniform_ball(4, np.random.default_rng(7), size=10)
    b = sample_uniform_ball(4, np.random.default_rng(7), size=10)
    assert np.array_equal(a, b)
    assert sample_uniform_ball(4, np.random.default_rng(7)).shape == (4,)


# -- properties -------------------------------------------------------------

polytopes = st.builds(
    lambda seed, d, k: random_polytope(d, np.random.default_rng(seed), n_cuts=k),
    st.integers(0, 2 ** 32 - 1), st.integers(1, 4), st.integers(0, 8),
)
_prop = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@_prop
@given(polytopes)
def test_solver_output_is_feasible(poly):
    E = max_inscribed_ellipsoid(poly)
    assert feasibility_margin(poly, E.center, E.shape) <= 1e-8
    assert np.linalg.eigvalsh(E.shape)[0] >= 1e-10


@_prop
@given(polytopes)
def test_solver_is_deterministic(poly):
    a = max_inscribed_ellipsoid(poly)
    b = max_inscribed_ellipsoid(poly)
    assert np.array_equal(a.center, b.center) and np.array_equal(a.shape, b.shape)
    assert a.log_volume == b.log_volume


@_prop
@given(polytopes, st.integers(0, 2 ** 32 - 1))
def test_cutting_never_grows_volume(poly, seed):
    rng = np.random.default_rng(seed)
    E = max_inscribed_ellipsoid(poly)
    u = rng.standard_normal(poly.dim)
    # any cut that keeps part of the interior; the tolerance is the solver gap
    off = float(u @ E.center) + rng.uniform(0, 0.5) * float(np.linalg.norm(E.shape @ u))
    E2 = max_inscribed_ellipsoid(poly.cut(u, off, 99))
    assert E2.log_volume <= E.log_volume + 1e-5


@_prop
@given(polytopes, st.integers(0, 2 ** 32 - 1))
def test_center_cut_decays_by_eight_ninths(poly, seed):
    rng = np.random.default_rng(seed)
    E = max_inscribed_ellipsoid(poly)
    u = rng.standard_normal(poly.dim)
    E2 = max_inscribed_ellipsoid(poly.cut(u, float(u @ E.center), 99))
    if poly.dim == 1:
        # in one dimension the center cut halves the interval exactly
        assert E2.log_volume - E.log_volume <= math.log(0.5) + 1e-5
    assert E2.log_volume - E.log_volume <= math.log(8 / 9 + 1e-3)


@_prop
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 3))
def test_affine_equivariance(seed, d):
    rng = np.random.default_rng(seed)
    poly = random_polytope(d, rng, n_cuts=d)
    M = rng.standard_normal((d, d)) + 2 * np.eye(d)
    t = rng.uniform(-0.3, 0.3, d)
    # image of the polytope under x -> M x + t: A M^{-1} (y - t) <= b
    Minv = np.linalg.inv(M)
    image = HalfspacePolytope(poly.normals @ Minv, poly.offsets + poly.normals @ Minv @ t)
    E = max_inscribed_ellipsoid(poly)
    F = max_inscribed_ellipsoid(image)
    assert np.allclose(F.center, M @ E.center + t, atol=1e-4)
    assert F.log_volume == pytest.approx(E.log_volume + np.linalg.slogdet(M)[1], abs=1e-5)
