"""FastAPI service exposing the solver over HTTP (or in-process ASGI).

Solver outcomes are always HTTP 200 with the status in the body; 4xx is
reserved for malformed requests and problem-file interpretation errors.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException

from . import __version__
from .conic.backends import available_backends
from .conic.solver import SolverOptions
from .policy import AffinePolicy, evaluate_recovered, recover
from .reformulate import build_synthesis, solve_counterpart
from .schemas import (
    Capabilities,
    DemoTableRow,
    EvaluateRequest,
    EvaluateResult,
    Health,
    ReserveDemo,
    RobustnessDemo,
    SolveRequest,
    SolveResult,
    VerifyRequest,
    VerifyResult,
    build_from_problem,
    solution_from_result,
    solution_to_result,
)
from .verify import certify_feasibility, polytope_volume_2d, shaped_extreme_points

app = FastAPI(title="adjrobust", version=__version__)


def _build_or_422(problem):
    try:
        return build_from_problem(problem)
    except (ValueError, KeyError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.get("/health", response_model=Health)
def health() -> Health:
    return Health(status="ok", version=__version__)


@app.get("/capabilities", response_model=Capabilities)
def capabilities() -> Capabilities:
    return Capabilities(
        backends=sorted(available_backends()),
        families=["rectangle", "ball", "ellipsoid", "polytope"],
        version=__version__,
    )


@app.post("/solve", response_model=SolveResult)
def solve_endpoint(req: SolveRequest) -> SolveResult:
    spb, fam, lam = _build_or_422(req.problem)
    opts = SolverOptions(tol_feas=req.tol, tol_gap=req.tol)
    try:
        sol = solve_counterpart(
            build_synthesis(spb, fam, lam), backend=req.backend, opts=opts
        )
    except KeyError as exc:
        raise HTTPException(status_code=422, detail=f"unknown backend {exc}") from exc
    return solution_to_result(sol, backend=req.backend)


@app.post("/verify", response_model=VerifyResult)
def verify_endpoint(req: VerifyRequest) -> VerifyResult:
    spb, fam, _ = _build_or_422(req.problem)
    try:
        sol = solution_from_result(req.result, spb, fam)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    report = certify_feasibility(
        sol, spb, fam, probes=req.probes, seed=req.seed, tolerance=req.tolerance
    )
    return VerifyResult(
        verdict=report.verdict,
        max_violation=float(report.max_violation),
        probe_count=report.probe_count,
        worst_point=[float(v) for v in report.worst_point],
        seed=report.seed,
        tolerance=report.tolerance,
    )


@app.post("/evaluate", response_model=EvaluateResult)
def evaluate_endpoint(req: EvaluateRequest) -> EvaluateResult:
    spb, fam, _ = _build_or_422(req.problem)
    try:
        sol = solution_from_result(req.result, spb, fam)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    if sol.P is None or sol.p is None:
        raise HTTPException(status_code=422, detail="result carries no policy")
    pol = AffinePolicy(P=sol.P, p=sol.p, causality=spb.causality, N=spb.N)
    rec = recover(pol, sol.Y, sol.y, fam)
    w = np.asarray(req.w, dtype=float)
    if w.shape[0] != spb.N * fam.n_w:
        raise HTTPException(
            status_code=422,
            detail=f"w must have length {spb.N * fam.n_w}, got {w.shape[0]}",
        )
    try:
        u = evaluate_recovered(rec, w, tol=req.tolerance)
    except ValueError as exc:
        # disturbance outside the shaped set
        raise HTTPException(status_code=409, detail=str(exc)) from exc
    return EvaluateResult(u=[float(v) for v in u], stages=spb.N, mode=rec.mode)


@app.get("/demo/robustness", response_model=RobustnessDemo)
def demo_robustness(m: int = 30, anchor_radius: float = 40.0) -> RobustnessDemo:
    from .apps import build_robustness, default_robustness

    table, sets, sols = [], {}, {}
    for family in ("rectangle", "ellipsoid", "polytope"):
        rb = default_robustness(family=family, m=m, radius=anchor_radius)
        sol = solve_counterpart(build_synthesis(*build_robustness(rb)))
        sols[family] = sol
        Y = sol.Y[0]
        if family == "rectangle":
            vol = 4.0 * Y[0, 0] * Y[1, 1]
            sets[family] = {"Y": Y.tolist(), "y": sol.y[0].tolist()}
        elif family == "ellipsoid":
            vol = float(np.pi * np.linalg.det(Y))
            sets[family] = {"Y": Y.tolist(), "y": sol.y[0].tolist()}
        else:
            vol = polytope_volume_2d(Y.T)
            sets[family] = {"vertices": Y.T.tolist()}
        table.append(
            DemoTableRow(
                family=family,
                volume=float(vol),
                percent_of_best=0.0,
                wall_time=sol.report.wall_time if sol.report else 0.0,
            )
        )
    best = max(row.volume for row in table)
    table = [
        row.model_copy(update={"percent_of_best": 100.0 * row.volume / best})
        for row in table
    ]
    # the optimal rectangle must sit inside the optimal polytope's hull
    from .uncertainty import _in_convex_hull, make_rectangle

    rect = sols["rectangle"]
    poly_pts = np.asarray(sets["polytope"]["vertices"], dtype=float)
    rect_corners = shaped_extreme_points(make_rectangle(2), rect.Y[0], rect.y[0])
    contain = all(
        _in_convex_hull(poly_pts, corner, tol=1e-6) for corner in rect_corners
    )
    return RobustnessDemo(table=table, sets=sets, containment_ok=bool(contain))


@app.get("/demo/reserve", response_model=ReserveDemo)
def demo_reserve(horizon: int = 24, lams: str = "20,30,40,50") -> ReserveDemo:
    from .apps import bid_curve, bid_curve_csv, default_reserve

    try:
        lam_grid = [float(v) for v in lams.split(",") if v.strip()]
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=f"bad lam grid: {exc}") from exc
    if not lam_grid:
        raise HTTPException(status_code=422, detail="lam grid must be nonempty")
    rp = default_reserve(N=horizon)
    rows = bid_curve(rp, lam_grid)
    series = {
        f"{row.lam:g}": [float(Yk[0, 0]) for Yk in row.solution.Y]
        for row in rows
        if row.solution is not None and row.solution.ok
    }
    totals = [row.total_reserve for row in rows if np.isfinite(row.total_reserve)]
    monotone = all(totals[i] <= totals[i + 1] + 1e-6 for i in range(len(totals) - 1))
    return ReserveDemo(
        lam_grid=[row.lam for row in rows],
        capacity_series=series,
        bid_curve_csv=bid_curve_csv(rows),
        monotone=bool(monotone),
    )
