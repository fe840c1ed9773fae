"""Exact oracles, feasibility certification, and plane geometry.

The scenario-tree oracle solves small instances exactly by enumerating
the extreme points of the shaped disturbance set, with per-scenario
inputs tied together by non-anticipativity (scenarios that share a
disturbance prefix share the corresponding inputs).  Because the shaped
set is an affine image of the primitive set, its extreme points are
affine in the shaping parameters, so the set can be co-optimized with
the inputs in a single finite program.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from .conic.program import ProgramBuilder
from .conic.solver import SolverOptions, solve
from .model import StackedProblem
from .reformulate import (
    ShapedSolution,
    _add_size_objective,
    _stage_entry_terms,
    _theta_dim,
    _unpack_Y,
)
from .uncertainty import UncertaintyFamily, evaluate_objective

SCENARIO_CAP = 2**16
EXTREME_CAP = 2**12


@dataclass(frozen=True)
class VertexOracleResult:
    """Exact optimum from full scenario enumeration."""

    value: float
    inputs: np.ndarray  # (n_scenarios, N*n_u)
    scenarios: tuple  # vertex-index tuples, aligned with `inputs`
    Y: list
    y: list
    size_value: float
    vertex_count: int
    wall_time: float


@dataclass(frozen=True)
class FeasibilityReport:
    """Probe-based robust-feasibility verdict for a solved counterpart."""

    max_violation: float
    probe_count: int
    worst_point: np.ndarray
    verdict: bool
    seed: int
    tolerance: float

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "max_violation": float(self.max_violation),
            "probe_count": int(self.probe_count),
            "worst_point": [float(v) for v in np.ravel(self.worst_point)],
            "verdict": bool(self.verdict),
            "seed": int(self.seed),
            "tolerance": float(self.tolerance),
        }


def exact_solve_enumeration(
    spb: StackedProblem, fam: UncertaintyFamily, lam: float
) -> VertexOracleResult:
    """Exact optimum over causal policies and family-shaped sets.

    Enumerates the per-stage extreme points of the primitive set; inputs
    are free per scenario subject to non-anticipativity.  Linear programs
    are handed to scipy's HiGHS; programs with a concave size reward run
    on the reference conic solver.
    """
    prim = fam.primitive
    if not prim.is_polyhedral or prim.extreme_points is None:
        raise ValueError("the oracle needs a polyhedral primitive set")
    V = prim.extreme_points
    M, N = V.shape[0], spb.N
    n_scen = M**N
    if n_scen > SCENARIO_CAP:
        raise ValueError(f"scenario count {n_scen} exceeds the cap {SCENARIO_CAP}")

    t0 = time.perf_counter()
    b = ProgramBuilder()
    theta_dim = _theta_dim(fam, N)
    if fam.shaping.family in ("scaled-identity", "diagonal"):
        b.add_nonneg("theta", theta_dim)
    else:
        b.add_free("theta", theta_dim)
    has_y = fam.shaping.offset != "zero"
    if has_y:
        b.add_free("y", N * fam.n_w)
    b.add_free("tau", 1)

    # non-anticipative inputs: coordinate i gets one variable per distinct
    # restriction of the scenario to the stages it is allowed to observe
    deps = [tuple(np.nonzero(spb.causality[i])[0]) for i in range(N * spb.n_u)]
    node_vars: dict = {}
    for i, J in enumerate(deps):
        for key in itertools.product(range(M), repeat=len(J)):
            node_vars[(i, key)] = len(node_vars)
    b.add_free("u", max(1, len(node_vars)))

    scenarios = list(itertools.product(range(M), repeat=N))
    n_u_tot = N * spb.n_u
    for sigma in scenarios:
        # selection of this scenario's stacked input from the node variables
        cols = [node_vars[(i, tuple(sigma[j] for j in deps[i]))] for i in range(n_u_tot)]
        U = np.zeros((n_u_tot, len(node_vars)))
        U[np.arange(n_u_tot), cols] = 1.0
        # disturbance as an affine function of the shaping parameters
        Wmap = np.zeros((N * fam.n_w, theta_dim))
        for k in range(N):
            v = V[sigma[k]]
            for (i, q), t, cf in _stage_entry_terms(fam, k):
                Wmap[k * fam.n_w + i, t] += cf * v[q]
        coeffs = {"u": spb.C @ U, "theta": spb.D @ Wmap}
        if has_y:
            coeffs["y"] = spb.D
        b.add_inequality(coeffs, spb.d)
        epi = {"u": (spb.c @ U).reshape(1, -1), "tau": -np.ones((1, 1))}
        b.add_inequality(epi, np.zeros(1))

    if fam.shaping.offset == "box":
        from .reformulate import _diag_map

        dm = _diag_map(fam, N)
        eye = np.eye(N * fam.n_w)
        b.add_inequality({"y": eye, "theta": -dm.toarray()}, np.zeros(N * fam.n_w))
        b.add_inequality({"y": -eye, "theta": -dm.toarray()}, np.zeros(N * fam.n_w))

    b.add_linear_objective({"tau": np.ones(1)})
    b.add_offset(spb.cost_offset)
    _add_size_objective(b, spb, fam, lam)
    prog = b.build()

    x = _solve_oracle_program(prog)
    theta = x[prog.var_map["theta"]]
    Ys = _unpack_Y(fam, N, theta)
    if has_y:
        yv = x[prog.var_map["y"]]
        ys = [yv[k * fam.n_w : (k + 1) * fam.n_w] for k in range(N)]
    else:
        ys = [np.zeros(fam.n_w) for _ in range(N)]
    size = sum(evaluate_objective(fam.objective, Yk, yk) for Yk, yk in zip(Ys, ys))
    u_nodes = x[prog.var_map["u"]]
    inputs = np.zeros((len(scenarios), n_u_tot))
    for sidx, sigma in enumerate(scenarios):
        for i in range(n_u_tot):
            inputs[sidx, i] = u_nodes[node_vars[(i, tuple(sigma[j] for j in deps[i]))]]
    return VertexOracleResult(
        value=float(prog.objective_value(x)),
        inputs=inputs,
        scenarios=tuple(scenarios),
        Y=Ys,
        y=ys,
        size_value=float(size),
        vertex_count=n_scen,
        wall_time=time.perf_counter() - t0,
    )


def _solve_oracle_program(prog) -> np.ndarray:
    """Dispatch: pure LPs go to HiGHS, anything conic to the reference IPM."""
    is_lp = not prog.has_log_objective and all(
        cone.kind == "nonneg" for _, cone in prog.cones
    )
    if is_lp:
        bounds = [(None, None)] * prog.n
        for start, cone in prog.cones:
            for i in range(start, start + cone.dim):
                bounds[i] = (0.0, None)
        res = linprog(
            prog.c, A_eq=prog.Aeq, b_eq=prog.beq, bounds=bounds, method="highs"
        )
        if res.status != 0:
            raise ValueError(f"oracle LP failed: {res.message}")
        return np.asarray(res.x, dtype=float)
    rep = solve(prog, SolverOptions())
    if rep.status != "optimal":
        raise ValueError(f"oracle conic solve failed: {rep.status}")
    return rep.x


def certify_feasibility(
    sol: ShapedSolution,
    spb: StackedProblem,
    fam: UncertaintyFamily,
    probes: int = 10_000,
    seed: int = 0,
    tolerance: float = 1e-6,
) -> FeasibilityReport:
    """Check C u + D w <= d at shaped-set extreme points and random probes.

    The policy is evaluated in primitive coordinates (u = P s + p), which
    is exactly how the counterpart certifies it; analysis solutions are
    checked without an input term.
    """
    prim = fam.primitive
    N = spb.N

    def violation(s_stack: np.ndarray) -> tuple[float, np.ndarray]:
        w = np.concatenate(
            [sol.Y[k] @ s_stack[k] + sol.y[k] for k in range(N)]
        )
        lhs = spb.D @ w - spb.d
        if sol.P is not None:
            u = sol.P @ np.concatenate(s_stack) + sol.p
            lhs = lhs + spb.C @ u
        return float(lhs.max()), w

    worst = -np.inf
    worst_point = np.zeros(N * fam.n_w)
    count = 0
    if prim.extreme_points is not None:
        n_ext = prim.extreme_points.shape[0] ** N
        if n_ext <= EXTREME_CAP:
            for combo in itertools.product(prim.extreme_points, repeat=N):
                v, w = violation(np.array(combo))
                count += 1
                if v > worst:
                    worst, worst_point = v, w
    rng = np.random.default_rng(seed)
    samples = fam.sample_primitive(rng, probes * N).reshape(probes, N, fam.n_s)
    for s_stack in samples:
        v, w = violation(s_stack)
        count += 1
        if v > worst:
            worst, worst_point = v, w
    return FeasibilityReport(
        max_violation=worst,
        probe_count=count,
        worst_point=worst_point,
        verdict=worst <= tolerance,
        seed=seed,
        tolerance=tolerance,
    )


def polytope_volume_2d(vertices) -> float:
    """Area of the convex hull of 2-D points via the shoelace formula."""
    pts = np.atleast_2d(np.asarray(vertices, dtype=float))
    if pts.shape[1] != 2:
        raise ValueError("points must be 2-D")
    if pts.shape[0] < 3:
        raise ValueError("need at least 3 points")
    try:
        hull = ConvexHull(pts)
    except QhullError:
        return 0.0  # collinear input
    ordered = pts[hull.vertices]
    x, y = ordered[:, 0], ordered[:, 1]
    return 0.5 * abs(float(x @ np.roll(y, -1) - y @ np.roll(x, -1)))


def suboptimality_gap(affine_value: float, oracle: VertexOracleResult) -> float:
    """Relative gap (affine - exact) / |exact| of a minimization pair."""
    exact = oracle.value
    return (affine_value - exact) / max(abs(exact), 1e-12)


def shaped_extreme_points(fam: UncertaintyFamily, Y, y) -> np.ndarray:
    """Extreme points of one stage's shaped set Y S + y (polyhedral S)."""
    if fam.primitive.extreme_points is None:
        raise ValueError("primitive set has no stored extreme points")
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    return fam.primitive.extreme_points @ Y.T + y
