"""Analysis/synthesis counterparts: exactness, duality, and certificates."""

import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import linprog

from adjrobust.model import StackedProblem
from adjrobust.reformulate import (
    build_analysis,
    build_synthesis,
    fix_inputs,
    lower_to_conic,
    solve_counterpart,
)
from adjrobust.uncertainty import make_rectangle
from adjrobust.verify import certify_feasibility
from conftest import solve_benchmark, benchmark_volume
from helpers import analysis_problem, random_box_instance


def test_one_dim_rectangle_analysis():
    # W = [y - r, y + r] inside {w <= 3, -w <= 2} is largest at r = 2.5
    spb = analysis_problem([[1.0], [-1.0]], [3.0, 2.0], 1)
    sol = solve_counterpart(build_analysis(spb, make_rectangle(1)))
    assert sol.ok
    assert_allclose(sol.Y[0][0, 0], 2.5, atol=1e-6)
    assert_allclose(sol.y[0][0], 0.5, atol=1e-6)


def test_degenerate_pinch_forces_zero():
    # a zero-rhs row w_i <= 0 paired with -w_i <= 0 admits only the origin
    spb = analysis_problem([[1.0], [-1.0]], [0.0, 0.0], 1)
    fam = make_rectangle(1, weights=[1.0])
    sol = solve_counterpart(build_analysis(spb, fam))
    assert sol.ok
    assert abs(sol.Y[0][0, 0]) <= 1e-7
    assert abs(sol.y[0][0]) <= 1e-7


def test_policy_enlarges_the_feasible_set(table1):
    # fixing u = 0 must strictly shrink the achievable rectangle volume
    spb, fam, sol, _ = table1["rectangle"]
    fixed = solve_counterpart(build_analysis(fix_inputs(spb, np.zeros(1)), fam))
    assert fixed.ok
    vol_fixed = benchmark_volume("rectangle", fixed)
    assert vol_fixed < benchmark_volume("rectangle", sol) - 1.0


def test_zero_reward_matches_fixed_set_lp():
    # lam = 0: no incentive to grow the set; tau equals the best nominal
    # robust value min_{u, y} c'u s.t. Cu + Dy <= d
    rng = np.random.default_rng(5)
    spb, fam, _ = random_box_instance(rng, N=2)
    sol = solve_counterpart(build_synthesis(spb, fam, 0.0))
    assert sol.ok
    n_u, n_w = spb.C.shape[1], spb.D.shape[1]
    ref = linprog(
        np.concatenate([spb.c, np.zeros(n_w)]),
        A_ub=np.hstack([spb.C, spb.D]),
        b_ub=spb.d,
        bounds=[(None, None)] * (n_u + n_w),
        method="highs",
    )
    assert ref.status == 0
    assert_allclose(sol.worst_case_cost, ref.fun, atol=1e-6)


def test_builder_validation():
    rng = np.random.default_rng(0)
    spb, fam, _ = random_box_instance(rng, N=1)
    with pytest.raises(ValueError, match="lam"):
        build_synthesis(spb, fam, -1.0)
    with pytest.raises(ValueError, match="dimension"):
        build_analysis(analysis_problem([[1.0], [-1.0]], [1.0, 1.0], 1),
                       make_rectangle(2))
    with pytest.raises(ValueError, match="pre-fixed"):
        build_analysis(spb, fam)


def test_census_of_one_dim_rectangle_lp():
    spb = analysis_problem([[1.0], [-1.0]], [3.0, 2.0], 1)
    cp = build_analysis(spb, make_rectangle(1, weights=[1.0]))
    census = cp.census()
    assert census["kind"] == "analysis"
    assert census["family"] == "rectangle"
    # variables r, y, Lambda in R^{2x2}_+ as per the hand count
    assert census["blocks"]["theta"] == 1
    assert census["blocks"]["y"] == 1
    assert census["blocks"]["Lam"] == 4
    assert census["variables"] == 8  # (r, y, Lam, two row slacks)
    assert census["equality_rows"] == 4
    assert not census["requires_sdp"]
    prog = lower_to_conic(cp)
    assert prog.n == census["variables"]
    assert cp.to_json()["horizon"] == 1


def test_duality_tightness_vs_vertex_enumeration():
    # optimal tau equals the exact worst case max_s c'(P s + p) over the
    # extreme scenarios of the primitive set
    rng = np.random.default_rng(17)
    for _ in range(20):
        spb, fam, lam = random_box_instance(rng)
        sol = solve_counterpart(build_synthesis(spb, fam, lam))
        assert sol.ok
        worst = max(
            float(spb.c @ (sol.P @ np.array(s) + sol.p))
            for s in itertools.product((-1.0, 1.0), repeat=spb.N)
        )
        assert_allclose(sol.tau, worst, atol=1e-6)


def test_size_monotone_in_lam(table1):
    spb, fam, _sol, _t = table1["rectangle"]
    sizes = []
    for lam in np.linspace(0.1, 4.0, 10):
        sol = solve_counterpart(build_synthesis(spb, fam, float(lam)))
        assert sol.ok
        sizes.append(sol.size_value)
    assert all(b >= a - 1e-7 for a, b in zip(sizes, sizes[1:]))


def test_analysis_certificates_are_sound():
    rng = np.random.default_rng(23)
    for _ in range(5):
        D = np.vstack([np.eye(2), -np.eye(2), rng.normal(size=(3, 2))])
        d = rng.uniform(0.5, 3.0, size=7)
        spb = analysis_problem(D, d, 2)
        fam = make_rectangle(2)
        sol = solve_counterpart(build_analysis(spb, fam))
        assert sol.ok
        report = certify_feasibility(sol, spb, fam, probes=10_000, seed=1)
        assert report.verdict, report.max_violation
        assert report.max_violation <= 1e-6
