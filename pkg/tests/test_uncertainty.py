"""Primitive sets, set families, shaping structures, and size metrics."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import minimize

from adjrobust.model import PolytopicSet  # noqa: F401  (import sanity)
from adjrobust.reformulate import build_analysis, solve_counterpart
from adjrobust.uncertainty import (
    Cone,
    ShapingStructure,
    SizeObjective,
    circle_anchors,
    evaluate_objective,
    make_ball,
    make_ellipsoid,
    make_polytope,
    make_rectangle,
    shaping_feasible,
)
from helpers import analysis_problem, random_cone_point


# -- template constructions -------------------------------------------------


def test_inf_ball_is_unit_box():
    fam = make_ball("inf", 1)
    assert_allclose(fam.primitive.G, [[1.0], [-1.0]])
    assert_allclose(fam.primitive.g, [1.0, 1.0])
    assert fam.primitive.is_polyhedral


def test_two_ball_boundary_tight():
    fam = make_ball(2, 2)
    assert fam.primitive.contains([0.6, 0.8], tol=1e-9)
    assert not fam.primitive.contains([0.6 * 1.001, 0.8 * 1.001])


def test_one_ball_encoding():
    fam = make_ball(1, 2)
    assert fam.primitive.G.shape == (4, 2)  # one row per sign pattern
    assert fam.primitive.contains([1.0, 0.0], tol=1e-9)
    assert not fam.primitive.contains([0.9, 0.2])


def test_unsupported_ball_norm():
    with pytest.raises(ValueError):
        make_ball(3, 2)


def test_ellipsoid_objective_and_sdp_flag():
    fam = make_ellipsoid(2)
    assert not fam.requires_sdp
    assert_allclose(
        evaluate_objective(fam.objective, np.diag([2.0, 3.0])), math.sqrt(6.0)
    )
    assert make_ellipsoid(3).requires_sdp


def test_rectangle_box_volume():
    # area of diag(1, 2) shaped box is 2^n * prod Y_ii = 8
    from adjrobust.verify import polytope_volume_2d, shaped_extreme_points

    fam = make_rectangle(2)
    pts = shaped_extreme_points(fam, np.diag([1.0, 2.0]), np.zeros(2))
    assert_allclose(polytope_volume_2d(pts), 8.0)


def test_polytope_vertex_count_guard():
    obj = SizeObjective("vertex-pulling", vectors=circle_anchors(2, 1.0))
    with pytest.raises(ValueError):
        make_polytope(3, 2, obj)


def test_simplex_barycentric_identity():
    fam = make_polytope(
        2, 3, SizeObjective("vertex-pulling", vectors=circle_anchors(3, 1.0))
    )
    Y = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])  # columns are vertices
    s = np.full(3, 1.0 / 3.0)
    assert fam.primitive.contains(s)
    assert_allclose(Y @ s, [1.0 / 3.0, 1.0 / 3.0])


# -- shaping structures and objectives ---------------------------------------


def test_shaping_feasible_examples():
    assert shaping_feasible(
        ShapingStructure("scaled-identity", "free"), 3.0 * np.eye(2), [1.0, -2.0]
    )
    bad = np.array([[1.0, 0.1], [0.0, 2.0]])
    assert not shaping_feasible(ShapingStructure("diagonal", "free"), bad, np.zeros(2))
    Y = np.array([[2.0, 1.0], [1.0, 2.0]])  # eigenvalues 1 and 3
    assert shaping_feasible(ShapingStructure("symmetric-psd", "free"), Y, np.zeros(2))
    assert not shaping_feasible(
        ShapingStructure("symmetric-psd", "free"), -Y, np.zeros(2)
    )


def test_evaluate_objective_examples():
    assert evaluate_objective(SizeObjective("log-det-diagonal"), np.eye(2)) == 0.0
    assert evaluate_objective(SizeObjective("radius"), 2.5 * np.eye(2)) == 2.5
    anchors = circle_anchors(4, 2.0)
    obj = SizeObjective("vertex-pulling", vectors=anchors)
    assert_allclose(evaluate_objective(obj, anchors.T), 0.0)
    # log of a nonpositive diagonal reports -inf rather than raising
    assert evaluate_objective(
        SizeObjective("log-det-diagonal"), np.diag([1.0, 0.0])
    ) == -math.inf


# -- family round-trips -------------------------------------------------------


def _round_trip_cases(rng):
    Yd = np.diag(rng.uniform(0.5, 2.5, size=2))
    Ye = np.array([[2.0, 0.8], [0.8, 1.5]])
    Yp = rng.normal(size=(2, 4))
    anchors = circle_anchors(4, 2.0)
    return [
        (make_ball("inf", 2), 1.7 * np.eye(2), rng.normal(size=2)),
        (make_ball(1, 2), 0.8 * np.eye(2), rng.normal(size=2)),
        (make_ball(2, 2), 2.2 * np.eye(2), rng.normal(size=2)),
        (make_rectangle(2), Yd, rng.normal(size=2)),
        (make_ellipsoid(2), Ye, rng.normal(size=2)),
        (
            make_polytope(2, 4, SizeObjective("vertex-pulling", vectors=anchors)),
            Yp,
            np.zeros(2),
        ),
    ]


def test_family_round_trip_membership():
    rng = np.random.default_rng(42)
    for fam, Y, y in _round_trip_cases(rng):
        s = fam.sample_primitive(rng, 1000)
        w = s @ Y.T + y
        assert all(fam.set_contains(Y, y, wi, tol=1e-9) for wi in w), fam.template
        if fam.primitive.extreme_points is not None:
            ext = fam.primitive.extreme_points @ Y.T + y
            assert all(fam.set_contains(Y, y, wi, tol=1e-9) for wi in ext)
            # pushing an extreme point outward leaves the set
            if np.linalg.matrix_rank(Y) == Y.shape[0] and fam.template != "polytope":
                out = y + (ext[0] - y) * 1.01
                assert not fam.set_contains(Y, y, out, tol=1e-9)


def test_cone_duality_pairing():
    rng = np.random.default_rng(3)
    for kind, dim in (("nonneg", 4), ("soc", 3), ("rsoc", 4)):
        cone = Cone(kind, dim)
        for _ in range(1000):
            a = random_cone_point(rng, kind, dim)
            b = random_cone_point(rng, kind, dim)
            assert cone.contains(a, tol=1e-9) and cone.contains(b, tol=1e-9)
            assert float(a @ b) >= -1e-12


def test_argmax_invariance_of_volume_transform():
    """Geometric-mean and log-det objectives share the same maximizer."""
    rng = np.random.default_rng(11)
    fam = make_rectangle(2)
    for _ in range(10):
        D = np.vstack([np.eye(2), -np.eye(2), rng.normal(size=(2, 2))])
        d = rng.uniform(1.0, 4.0, size=6)
        sol = solve_counterpart(build_analysis(analysis_problem(D, d, 2), fam))
        assert sol.ok
        ref = np.array([sol.Y[0][0, 0], sol.Y[0][1, 1], *sol.y[0]])

        corners = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)

        def neg_geomean(v):
            return -math.sqrt(max(v[0], 1e-12) * max(v[1], 1e-12))

        cons = [
            {
                "type": "ineq",
                "fun": lambda v, c=c: d - D @ (np.diag(v[:2]) @ c + v[2:]),
            }
            for c in corners
        ]
        res = minimize(
            neg_geomean,
            ref * 1.1 + 0.05,
            constraints=cons,
            bounds=[(1e-9, None), (1e-9, None), (None, None), (None, None)],
            method="SLSQP",
            options={"ftol": 1e-12, "maxiter": 500},
        )
        assert res.success
        assert_allclose(res.x, ref, atol=1e-5 * (1.0 + np.abs(ref).max()))


def test_coordinate_bounds_detects_shape():
    fam = make_ball("inf", 2)
    assert_allclose(
        fam.primitive.coordinate_bounds(), [[-1.0, 1.0], [-1.0, 1.0]], atol=1e-7
    )
