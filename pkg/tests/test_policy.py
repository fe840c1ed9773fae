"""Affine policies, the minimum-norm lifting, and policy recovery."""

import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from adjrobust.model import causal_mask
from adjrobust.policy import (
    AffinePolicy,
    LiftingOperator,
    evaluate_primitive,
    evaluate_recovered,
    lift,
    policy_from_json,
    policy_to_json,
    recover,
)
from adjrobust.uncertainty import (
    SizeObjective,
    circle_anchors,
    make_polytope,
    make_rectangle,
)


def constant_policy(N=2, n_u=1, n_s=1, p=None):
    p = np.zeros(N * n_u) if p is None else np.asarray(p, dtype=float)
    return AffinePolicy(
        P=np.zeros((N * n_u, N * n_s)), p=p, causality=causal_mask(N, n_u), N=N
    )


def test_constant_policy_and_domain_check():
    pol = constant_policy(p=[1.0, -2.0])
    fam = make_rectangle(1)
    s = np.array([0.3, -0.8])
    assert_allclose(evaluate_primitive(pol, s, fam.primitive), [1.0, -2.0])
    with pytest.raises(ValueError, match="outside"):
        evaluate_primitive(pol, [0.3, 1.5], fam.primitive)


def test_causality_mask_blocks_future_dependence():
    N, n_u, n_s = 2, 1, 1
    rng = np.random.default_rng(2)
    mask = causal_mask(N, n_u, strictly_causal=True)
    P = rng.normal(size=(N, N)) * mask  # strict: u_0 sees nothing, u_1 sees s_0
    pol = AffinePolicy(P=P, p=np.zeros(N), causality=mask, N=N)
    s = np.array([0.2, -0.4])
    bumped = s.copy()
    bumped[1] += 0.5  # stage-1 disturbance may not affect any input here
    assert_allclose(evaluate_primitive(pol, s), evaluate_primitive(pol, bumped))

    with pytest.raises(ValueError, match="causality"):
        AffinePolicy(P=np.ones((2, 2)), p=np.zeros(2), causality=mask, N=2)


def test_lift_invertible_is_exact_inverse():
    rng = np.random.default_rng(4)
    Y = np.array([[1.4, 0.0], [0.3, 0.9]])
    y = rng.normal(size=2)
    fam = make_rectangle(2)  # box primitive
    lop = LiftingOperator(primitive=fam.primitive, Y=(Y,), y=(y,))
    s = rng.uniform(-1.0, 1.0, size=2)
    w = Y @ s + y
    assert_allclose(lift(lop, w), np.linalg.solve(Y, w - y), atol=1e-12)


def test_simplex_centroid_lift():
    fam = make_polytope(
        2, 3, SizeObjective("vertex-pulling", vectors=circle_anchors(3, 1.0))
    )
    Y = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    lop = LiftingOperator(primitive=fam.primitive, Y=(Y,), y=(np.zeros(2),))
    s = lop.lift(np.array([1.0 / 3.0, 1.0 / 3.0]))
    assert_allclose(s, np.full(3, 1.0 / 3.0), atol=1e-6)


def test_lift_outside_set_raises():
    fam = make_rectangle(1)
    lop = LiftingOperator(primitive=fam.primitive, Y=(np.eye(1),), y=(np.zeros(1),))
    with pytest.raises(ValueError, match="outside"):
        lop.lift(np.array([1.5]))


def test_recover_mode_selection():
    rect = make_rectangle(2)
    pol = constant_policy(N=1, n_u=1, n_s=2)
    rp = recover(pol, [np.diag([1.0, 2.0])], [np.zeros(2)], rect)
    assert rp.mode == "affine-inverse"

    # rank-deficient diagonal shaping falls back to the lifted path
    rp = recover(pol, [np.diag([1.0, 0.0])], [np.zeros(2)], rect)
    assert rp.mode == "lifted-pwa"

    poly = make_polytope(
        2, 4, SizeObjective("vertex-pulling", vectors=circle_anchors(4, 1.0))
    )
    pol4 = constant_policy(N=1, n_u=1, n_s=4)
    rp = recover(pol4, [np.random.default_rng(0).normal(size=(2, 4))],
                 [np.zeros(2)], poly)
    assert rp.mode == "lifted-pwa"


def test_evaluate_recovered_at_center_returns_p():
    fam = make_rectangle(2)
    pol = constant_policy(N=1, n_u=2, n_s=2, p=[0.7, -0.1])
    y = np.array([0.4, -0.2])
    rp = recover(pol, [np.diag([1.0, 2.0])], [y], fam)
    assert_allclose(evaluate_recovered(rp, y), [0.7, -0.1], atol=1e-12)


def test_piecewise_linear_along_segment():
    """The simplex-lifted policy is piecewise-linear on a line segment."""
    rng = np.random.default_rng(9)
    fam = make_polytope(
        2, 3, SizeObjective("vertex-pulling", vectors=circle_anchors(3, 1.0))
    )
    Y = np.array([[1.0, -0.5, 0.0], [0.0, 0.8, -0.6]])
    P = rng.normal(size=(1, 3))
    pol = AffinePolicy(P=P, p=np.zeros(1), causality=causal_mask(1, 1), N=1)
    rp = recover(pol, [Y], [np.zeros(2)], fam)
    assert rp.mode == "lifted-pwa"

    # segment between two interior points of W = conv(columns of Y)
    wa = Y @ np.array([0.7, 0.2, 0.1])
    wb = Y @ np.array([0.1, 0.3, 0.6])
    ts = np.linspace(0.0, 1.0, 257)
    vals = np.array([
        float(evaluate_recovered(rp, (1 - t) * wa + t * wb)[0]) for t in ts
    ])
    second = np.diff(vals, 2)
    # piecewise-linear: second differences vanish except at few breakpoints
    breaks = int(np.sum(np.abs(second) > 1e-6 * (1.0 + np.abs(vals).max())))
    assert breaks <= 8
    # and the map is continuous along the sweep
    assert np.abs(np.diff(vals)).max() <= 0.1


def test_recovered_policy_lipschitz_probe():
    rng = np.random.default_rng(13)
    fam = make_polytope(
        2, 4, SizeObjective("vertex-pulling", vectors=circle_anchors(4, 1.0))
    )
    Y = rng.normal(size=(2, 4))
    P = rng.normal(size=(1, 4))
    pol = AffinePolicy(P=P, p=np.zeros(1), causality=causal_mask(1, 1), N=1)
    rp = recover(pol, [Y], [np.zeros(2)], fam)
    worst = 0.0
    for _ in range(100):
        sa, sb = fam.sample_primitive(rng, 2)
        sb = 0.95 * sa + 0.05 * sb  # adjacent pair
        wa, wb = Y @ sa, Y @ sb
        du = np.linalg.norm(evaluate_recovered(rp, wa) - evaluate_recovered(rp, wb))
        dw = np.linalg.norm(wa - wb)
        if dw > 1e-9:
            worst = max(worst, du / dw)
    assert np.isfinite(worst) and worst <= 1e3


def test_policy_json_round_trip():
    rng = np.random.default_rng(21)
    fam = make_rectangle(2)
    N = 2
    mask = causal_mask(N, 1)
    P = rng.normal(size=(N, N * 2)) * np.repeat(mask, 2, axis=1)
    pol = AffinePolicy(P=P, p=rng.normal(size=N), causality=mask, N=N)
    Ys = [np.diag(rng.uniform(0.5, 2.0, 2)) for _ in range(N)]
    ys = [rng.normal(size=2) for _ in range(N)]
    rp = recover(pol, Ys, ys, fam)
    doc = json.loads(json.dumps(policy_to_json(rp)))
    back = policy_from_json(doc, fam)
    assert back.mode == rp.mode
    for _ in range(20):
        s = rng.uniform(-1.0, 1.0, size=N * 2)
        w = np.concatenate([Ys[k] @ s[2 * k : 2 * k + 2] + ys[k] for k in range(N)])
        assert np.array_equal(evaluate_recovered(rp, w), evaluate_recovered(back, w))

    with pytest.raises(ValueError, match="schema"):
        policy_from_json({**doc, "schema_version": 2}, fam)
