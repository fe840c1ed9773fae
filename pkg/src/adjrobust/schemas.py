"""Pydantic request/response models and problem-file interpretation.

The problem file is plain JSON: either an explicit system description or
an application preset.  Matrices are row-major nested arrays of finite
doubles; unknown keys are rejected everywhere.
"""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

SCHEMA_VERSION = 1

Matrix = list[list[float]]
Vector = list[float]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SystemSpec(StrictModel):
    A: Matrix
    B: Matrix
    E: Matrix


class ConstraintSpec(StrictModel):
    F_x: Matrix
    f_x: Vector
    F_u: Matrix
    f_u: Vector


class CostSpec(StrictModel):
    q: Optional[Vector] = None
    r: Optional[Vector] = None
    q_f: Optional[Vector] = None


class FamilySpec(StrictModel):
    template: Literal["rectangle", "ball", "ellipsoid", "polytope"]
    p: Optional[float | Literal["inf"]] = None  # ball norm
    weights: Optional[Vector] = None  # rectangle linear objective
    m: Optional[int] = None  # polytope vertex count
    anchors: Optional[Matrix] = None  # polytope anchor points
    anchor_radius: Optional[float] = None  # circle anchors shortcut
    objective: Optional[
        Literal["volume", "radius", "linear-weights", "vertex-pulling", "vertex-pushing"]
    ] = None
    offset: Literal["free", "zero", "box"] = "free"


class ReservePreset(StrictModel):
    name: Literal["reserve"]
    horizon: int = 24
    lam: float = 30.0
    prices: Optional[Vector] = None
    mode: Literal["symmetric", "asymmetric", "positive-only", "negative-only"] = (
        "symmetric"
    )
    decoupled: bool = False


class RobustnessPreset(StrictModel):
    name: Literal["robustness"]
    family: Literal["rectangle", "ellipsoid", "polytope"] = "rectangle"
    m: int = 30
    anchor_radius: float = 40.0


class ProblemFile(StrictModel):
    """Either a preset or a fully explicit problem description."""

    schema_version: int = SCHEMA_VERSION
    preset: Optional[ReservePreset | RobustnessPreset] = None
    system: Optional[SystemSpec] = None
    constraints: Optional[ConstraintSpec] = None
    horizon: Optional[int] = None
    x0: Optional[Vector] = None
    cost: Optional[CostSpec] = None
    v: Optional[Matrix] = None
    strictly_causal: bool = False
    family: Optional[FamilySpec] = None
    lam: float = Field(default=1.0, alias="lambda")

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @model_validator(mode="after")
    def _complete(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {self.schema_version}")
        if self.preset is None:
            missing = [
                name
                for name in ("system", "constraints", "horizon", "x0", "family")
                if getattr(self, name) is None
            ]
            if missing:
                raise ValueError(
                    "explicit problems need " + ", ".join(missing)
                )
        return self


class SolverFlags(StrictModel):
    tol: float = 1e-8
    backend: str = "builtin"


class SolveRequest(StrictModel):
    problem: ProblemFile
    tol: float = 1e-8
    backend: str = "builtin"


class ResidualInfo(StrictModel):
    primal: float
    dual: float
    gap: float
    iterations: int


class SolveResult(StrictModel):
    schema_version: int = SCHEMA_VERSION
    status: str
    message: str = ""
    objective: Optional[float] = None
    size_value: Optional[float] = None
    worst_case_cost: Optional[float] = None
    Y: Optional[list[Matrix]] = None  # one matrix per stage
    y: Optional[list[Vector]] = None
    P: Optional[Matrix] = None
    p: Optional[Vector] = None
    residuals: Optional[ResidualInfo] = None
    wall_time: float = 0.0
    backend: str = "builtin"


class VerifyRequest(StrictModel):
    problem: ProblemFile
    result: SolveResult
    probes: int = 10_000
    seed: int = 0
    tolerance: float = 1e-6


class VerifyResult(StrictModel):
    schema_version: int = SCHEMA_VERSION
    verdict: bool
    max_violation: float
    probe_count: int
    worst_point: Vector
    seed: int
    tolerance: float


class EvaluateRequest(StrictModel):
    problem: ProblemFile
    result: SolveResult
    w: Vector
    tolerance: float = 1e-6


class EvaluateResult(StrictModel):
    schema_version: int = SCHEMA_VERSION
    u: Vector
    stages: int
    mode: str  # affine-inverse | lifted-pwa


class DemoTableRow(StrictModel):
    family: str
    volume: float
    percent_of_best: float
    wall_time: float


class RobustnessDemo(StrictModel):
    schema_version: int = SCHEMA_VERSION
    table: list[DemoTableRow]
    sets: dict[str, dict]  # per-family set parameters (vertices or Y/y)
    containment_ok: bool


class ReserveDemo(StrictModel):
    schema_version: int = SCHEMA_VERSION
    lam_grid: Vector
    capacity_series: dict[str, Vector]  # per-lam stage-wise Y_k
    bid_curve_csv: str
    monotone: bool


class Capabilities(StrictModel):
    schema_version: int = SCHEMA_VERSION
    backends: list[str]
    families: list[str]
    version: str


class Health(StrictModel):
    status: str = "ok"
    version: str = "unknown"


# ---------------------------------------------------------------------------
# problem-file interpretation


def _families_from_spec(fs: FamilySpec, n_w: int):
    from .uncertainty import (
        SizeObjective,
        circle_anchors,
        make_ball,
        make_ellipsoid,
        make_polytope,
        make_rectangle,
    )

    if fs.template == "rectangle":
        if fs.objective == "volume" or (fs.objective is None and fs.weights is None):
            fam = make_rectangle(n_w)
        else:
            fam = make_rectangle(
                n_w, fs.weights if fs.weights is not None else [1.0] * n_w
            )
    elif fs.template == "ball":
        fam = make_ball(fs.p if fs.p is not None else 2, n_w)
    elif fs.template == "ellipsoid":
        fam = make_ellipsoid(n_w)
    else:
        if fs.anchors is not None:
            anchors = np.asarray(fs.anchors, dtype=float)
        elif fs.m is not None and fs.anchor_radius is not None:
            anchors = circle_anchors(fs.m, fs.anchor_radius)
        else:
            raise ValueError("polytope family needs anchors or m + anchor_radius")
        kind = fs.objective or "vertex-pulling"
        if kind not in ("vertex-pulling", "vertex-pushing"):
            raise ValueError("polytope objective must be vertex-pulling/pushing")
        fam = make_polytope(anchors.shape[1], anchors.shape[0], SizeObjective(kind, vectors=anchors))
    if fs.offset != "free":
        fam = fam.with_offset(fs.offset)
    return fam


def build_from_problem(pf: ProblemFile):
    """Interpret a problem file into (StackedProblem, family, lam)."""
    from .apps import (
        build_reserve,
        build_robustness,
        default_reserve,
        default_robustness,
    )
    from .model import LinearSystem, PolytopicSet, StageCost, build_stacked

    if pf.preset is not None:
        if pf.preset.name == "reserve":
            ps = pf.preset
            rp = default_reserve(
                N=ps.horizon,
                lam=ps.lam,
                prices=ps.prices,
                mode=ps.mode,
                decoupled=ps.decoupled,
            )
            return build_reserve(rp)
        ps = pf.preset
        rb = default_robustness(family=ps.family, m=ps.m, radius=ps.anchor_radius)
        return build_robustness(rb)

    sys = LinearSystem(pf.system.A, pf.system.B, pf.system.E)
    X = PolytopicSet(pf.constraints.F_x, pf.constraints.f_x)
    U = PolytopicSet(pf.constraints.F_u, pf.constraints.f_u)
    if pf.cost is None:
        cost = StageCost.zero(sys.n_x, sys.n_u)
    else:
        cost = StageCost(
            pf.cost.q if pf.cost.q is not None else np.zeros(sys.n_x),
            pf.cost.r if pf.cost.r is not None else np.zeros(sys.n_u),
            pf.cost.q_f if pf.cost.q_f is not None else np.zeros(sys.n_x),
        )
    spb = build_stacked(
        sys, X, U, cost, pf.x0, pf.horizon,
        v=pf.v, strictly_causal=pf.strictly_causal,
    )
    fam = _families_from_spec(pf.family, sys.n_w)
    return spb, fam, pf.lam


def solution_to_result(sol, backend: str = "builtin") -> SolveResult:
    """Serialize a ShapedSolution into the response model."""
    if not sol.ok:
        return SolveResult(
            status=sol.status,
            message=sol.report.message if sol.report is not None else "",
            wall_time=sol.report.wall_time if sol.report is not None else 0.0,
            backend=backend,
        )
    rep = sol.report
    return SolveResult(
        status=sol.status,
        message=rep.message if rep is not None else "",
        objective=float(sol.objective),
        size_value=float(sol.size_value),
        worst_case_cost=(
            float(sol.worst_case_cost) if sol.worst_case_cost is not None else None
        ),
        Y=[Yk.tolist() for Yk in sol.Y],
        y=[yk.tolist() for yk in sol.y],
        P=sol.P.tolist() if sol.P is not None else None,
        p=sol.p.tolist() if sol.p is not None else None,
        residuals=(
            ResidualInfo(
                primal=float(rep.primal_residual),
                dual=float(rep.dual_residual),
                gap=float(rep.gap),
                iterations=int(rep.iterations),
            )
            if rep is not None
            else None
        ),
        wall_time=rep.wall_time if rep is not None else 0.0,
        backend=backend,
    )


def solution_from_result(res: SolveResult, spb, fam):
    """Rebuild the in-memory solution pieces from a serialized result."""
    if res.Y is None:
        raise ValueError("result carries no solution")
    Ys = [np.asarray(Yk, dtype=float) for Yk in res.Y]
    ys = [np.asarray(yk, dtype=float) for yk in (res.y or [])]
    if not ys:
        ys = [np.zeros(fam.n_w) for _ in Ys]
    P = np.asarray(res.P, dtype=float) if res.P is not None else None
    p = np.asarray(res.p, dtype=float) if res.p is not None else None
    from .reformulate import ShapedSolution

    return ShapedSolution(
        status=res.status,
        objective=res.objective if res.objective is not None else float("nan"),
        size_value=res.size_value if res.size_value is not None else float("nan"),
        Y=Ys,
        y=ys,
        P=P,
        p=p,
        worst_case_cost=res.worst_case_cost,
    )
