"""Finite-dimensional convex counterparts of the robust design problems.

Two counterparts are built from a stacked problem and an uncertainty
family: the *analysis* form maximizes the size of a shaped disturbance
set subject to robust constraint satisfaction with the inputs fixed,
and the *synthesis* form additionally optimizes an affine disturbance
feedback policy and trades worst-case cost against set size with a
weight ``lam``.

Both are exact conic duals of the semi-infinite robust constraints: a
multiplier row per constraint row certifies feasibility over the whole
shaped set.  ``lower_to_conic`` flattens a counterpart into the solver
IR; ``solve_counterpart`` runs a backend and unpacks the shaped sets
and policy coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .conic.backends import solve_routed
from .conic.program import ConicProgram, ProgramBuilder
from .conic.solver import SolveReport, SolverOptions
from .model import StackedProblem
from .uncertainty import Cone, EPS_PSD, UncertaintyFamily, evaluate_objective

_SQRT2 = np.sqrt(2.0)


# ---------------------------------------------------------------------------
# shaping parameterizations: packed parameter vector theta -> blockdiag(Y_k)


def _theta_dim(fam: UncertaintyFamily, N: int) -> int:
    family = fam.shaping.family
    n_w, n_s = fam.n_w, fam.n_s
    if family == "scaled-identity":
        return N
    if family == "diagonal":
        return N * n_w
    if family == "symmetric-psd":
        return N * (n_w * (n_w + 1)) // 2
    return N * n_w * n_s  # free / free-columns-zero-offset


def _stage_entry_terms(fam: UncertaintyFamily, k: int):
    """Linear expansion of Y_k: list of ((i, q), theta_index, coeff)."""
    family = fam.shaping.family
    n_w, n_s = fam.n_w, fam.n_s
    terms = []
    if family == "scaled-identity":
        for i in range(n_w):
            terms.append(((i, i), k, 1.0))
    elif family == "diagonal":
        for i in range(n_w):
            terms.append(((i, i), k * n_w + i, 1.0))
    elif family == "symmetric-psd":
        per = (n_w * (n_w + 1)) // 2
        idx = 0
        for i in range(n_w):
            for q in range(i, n_w):
                t = k * per + idx
                terms.append(((i, q), t, 1.0))
                if q != i:
                    terms.append(((q, i), t, 1.0))
                idx += 1
    else:
        for i in range(n_w):
            for q in range(n_s):
                terms.append(((i, q), k * (n_w * n_s) + i * n_s + q, 1.0))
    return terms


def _unpack_Y(fam: UncertaintyFamily, N: int, theta: np.ndarray) -> list[np.ndarray]:
    """Per-stage shaping matrices from the packed parameter vector."""
    n_w, n_s = fam.n_w, fam.n_s
    Ys = []
    for k in range(N):
        Y = np.zeros((n_w, n_s))
        for (i, q), t, coeff in _stage_entry_terms(fam, k):
            Y[i, q] += coeff * theta[t]
        Ys.append(Y)
    return Ys


def _diag_map(fam: UncertaintyFamily, N: int) -> sp.csr_matrix:
    """Sparse map theta -> stacked diag(Y_k), shape (N*n_w, dim theta)."""
    n_w = fam.n_w
    rows, cols, vals = [], [], []
    for k in range(N):
        for (i, q), t, coeff in _stage_entry_terms(fam, k):
            if i == q:
                rows.append(k * n_w + i)
                cols.append(t)
                vals.append(coeff)
    return sp.coo_matrix(
        (vals, (rows, cols)), shape=(N * n_w, _theta_dim(fam, N))
    ).tocsr()


def _DY_map(D: np.ndarray, fam: UncertaintyFamily, N: int) -> sp.csr_matrix:
    """Sparse map theta -> vec(D @ blockdiag(Y_k)), row-major over (m, N*n_s)."""
    m = D.shape[0]
    n_w, n_s = fam.n_w, fam.n_s
    rows, cols, vals = [], [], []
    for k in range(N):
        for (i, q), t, coeff in _stage_entry_terms(fam, k):
            col_w = k * n_w + i
            nz = np.nonzero(D[:, col_w])[0]
            for r in nz:
                rows.append(r * (N * n_s) + k * n_s + q)
                cols.append(t)
                vals.append(coeff * D[r, col_w])
    return sp.coo_matrix(
        (vals, (rows, cols)), shape=(m * N * n_s, _theta_dim(fam, N))
    ).tocsr()


# ---------------------------------------------------------------------------
# multiplier maps


def _dual_segments(prim):
    """Per-stage dual multiplier layout and the coordinates pinned to zero.

    Orthant rows that encode an equality as two opposing inequalities
    admit the ray (e_i + e_j): adding it changes nothing, so no strictly
    complementary dual point exists and the central path degenerates.
    The pair is lowered to one free multiplier instead: coordinate i is
    freed, coordinate j pinned to zero.  Signed halves are recoverable as
    (max(nu, 0), max(-nu, 0)).
    """
    leads = {i for i, _ in prim.equality_pairs}
    pins = {j for _, j in prim.equality_pairs}
    segments = []
    pos = 0
    for cone in prim.cones:
        if cone.kind != "nonneg":
            segments.append(cone)
            pos += cone.dim
            continue
        run = 0
        for t in range(pos, pos + cone.dim):
            if t in leads or t in pins:
                if run:
                    segments.append(Cone("nonneg", run))
                    run = 0
                segments.append(1)
            else:
                run += 1
        if run:
            segments.append(Cone("nonneg", run))
        pos += cone.dim
    return segments, sorted(pins)


def _pin_rows(cols, block_dim: int) -> sp.csr_matrix:
    """Selector matrix picking the given coordinates of a block."""
    cols = np.asarray(cols, dtype=int)
    return sp.coo_matrix(
        (np.ones(cols.shape[0]), (np.arange(cols.shape[0]), cols)),
        shape=(cols.shape[0], block_dim),
    ).tocsr()


def _lambda_g_map(g: np.ndarray, m: int, N: int) -> sp.csr_matrix:
    """Map vec(Lambda) (row-major over rows, stages, cone coords) -> Lambda g."""
    l = g.shape[0]
    rows, cols, vals = [], [], []
    for r in range(m):
        for k in range(N):
            for t in range(l):
                if g[t] != 0.0:
                    rows.append(r)
                    cols.append(r * (N * l) + k * l + t)
                    vals.append(g[t])
    return sp.coo_matrix((vals, (rows, cols)), shape=(m, m * N * l)).tocsr()


def _lambda_G_map(G: np.ndarray, m: int, N: int) -> sp.csr_matrix:
    """Map vec(Lambda) -> vec(Lambda @ blockdiag(G)), row-major (m, N*n_s)."""
    l, n_s = G.shape
    rows, cols, vals = [], [], []
    tnz = [np.nonzero(G[:, q])[0] for q in range(n_s)]
    for r in range(m):
        for k in range(N):
            for q in range(n_s):
                for t in tnz[q]:
                    rows.append(r * (N * n_s) + k * n_s + q)
                    cols.append(r * (N * l) + k * l + t)
                    vals.append(G[t, q])
    return sp.coo_matrix(
        (vals, (rows, cols)), shape=(m * N * n_s, m * N * l)
    ).tocsr()


def _mu_G_map(G: np.ndarray, N: int) -> sp.csr_matrix:
    """Map mu (stacked per stage) -> blockdiag(G)' mu, shape (N*n_s, N*l)."""
    l, n_s = G.shape
    blocks = [sp.csr_matrix(G.T)] * N
    return sp.block_diag(blocks, format="csr")


def _packed_P_indices(spb: StackedProblem, n_s: int):
    """Allowed packed entries of P as parallel (row, col) index arrays.

    Entry (i, k*n_s + q) of P is a decision variable iff the causality
    mask allows input coordinate i to see the stage-k primitive block.
    """
    N = spb.N
    rows, cols = [], []
    for i in range(spb.N * spb.n_u):
        for k in range(N):
            if spb.causality[i, k]:
                for q in range(n_s):
                    rows.append(i)
                    cols.append(k * n_s + q)
    return np.array(rows, dtype=int), np.array(cols, dtype=int)


def _CP_map(C: np.ndarray, p_rows, p_cols, N: int, n_s: int) -> sp.csr_matrix:
    """Map packed P -> vec(C @ P), row-major over (m, N*n_s)."""
    m = C.shape[0]
    rows, cols, vals = [], [], []
    rnz = [np.nonzero(C[:, i])[0] for i in range(C.shape[1])]
    for j, (i, cq) in enumerate(zip(p_rows, p_cols)):
        for r in rnz[i]:
            rows.append(r * (N * n_s) + cq)
            cols.append(j)
            vals.append(C[r, i])
    return sp.coo_matrix(
        (vals, (rows, cols)), shape=(m * N * n_s, p_rows.shape[0])
    ).tocsr()


def _Pt_c_map(c: np.ndarray, p_rows, p_cols, N: int, n_s: int) -> sp.csr_matrix:
    """Map packed P -> P' c, shape (N*n_s, packed dim)."""
    rows, cols, vals = [], [], []
    for j, (i, cq) in enumerate(zip(p_rows, p_cols)):
        if c[i] != 0.0:
            rows.append(cq)
            cols.append(j)
            vals.append(c[i])
    return sp.coo_matrix(
        (vals, (rows, cols)), shape=(N * n_s, p_rows.shape[0])
    ).tocsr()


# ---------------------------------------------------------------------------
# counterparts


@dataclass(frozen=True)
class AnalysisCounterpart:
    """Set-maximization counterpart: variables (Y, y, Lambda)."""

    problem: StackedProblem
    family: UncertaintyFamily

    def census(self) -> dict:
        return _census(self, synthesis=False)

    def to_json(self) -> dict:
        return self.census()


@dataclass(frozen=True)
class SynthesisCounterpart:
    """Policy-and-set counterpart: variables (tau, P, p, Y, y, mu, Lambda)."""

    problem: StackedProblem
    family: UncertaintyFamily
    lam: float

    def census(self) -> dict:
        return _census(self, synthesis=True)

    def to_json(self) -> dict:
        return self.census()


def build_analysis(
    spb: StackedProblem, fam: UncertaintyFamily
) -> AnalysisCounterpart:
    """Counterpart that maximizes the set size with inputs pre-fixed.

    The stacked problem must have no free inputs: C is all zeros (inputs
    absorbed into d) because the inner maximization quantifies only over
    the disturbance.
    """
    _check_dims(spb, fam)
    if np.any(spb.C != 0.0):
        raise ValueError(
            "analysis requires inputs to be pre-fixed (C must be zero); "
            "fold known inputs into d or use build_synthesis"
        )
    return AnalysisCounterpart(problem=spb, family=fam)


def build_synthesis(
    spb: StackedProblem, fam: UncertaintyFamily, lam: float
) -> SynthesisCounterpart:
    """Counterpart minimizing worst-case cost minus lam * set size."""
    _check_dims(spb, fam)
    if lam < 0:
        raise ValueError("the size weight lam must be >= 0")
    return SynthesisCounterpart(problem=spb, family=fam, lam=float(lam))


def fix_inputs(spb: StackedProblem, u) -> StackedProblem:
    """Fold a known input sequence into the constraint offsets.

    Returns an equivalent stacked problem with C = 0, suitable for
    ``build_analysis``.
    """
    u = np.asarray(u, dtype=float).ravel()
    if u.shape[0] != spb.N * spb.n_u:
        raise ValueError("input vector length must be N * n_u")
    return StackedProblem(
        c=np.zeros_like(spb.c),
        C=np.zeros_like(spb.C),
        D=spb.D,
        d=spb.d - spb.C @ u,
        N=spb.N,
        n_u=spb.n_u,
        n_w=spb.n_w,
        causality=spb.causality,
        cost_offset=spb.cost_offset + float(spb.c @ u),
        row_labels=spb.row_labels,
    )


def _check_dims(spb: StackedProblem, fam: UncertaintyFamily) -> None:
    if fam.n_w != spb.n_w:
        raise ValueError(
            f"family disturbance dimension {fam.n_w} != problem n_w {spb.n_w}"
        )


def _census(cp, synthesis: bool) -> dict:
    prog = lower_to_conic(cp)
    blocks = {
        name: int(s.stop - s.start)
        for name, s in prog.var_map.items()
        if not name.startswith("_slack")
    }
    return {
        "kind": "synthesis" if synthesis else "analysis",
        "family": cp.family.template,
        "horizon": int(cp.problem.N),
        "variables": int(prog.n),
        "equality_rows": int(prog.n_eq),
        "cone_blocks": len(prog.cones),
        "blocks": blocks,
        "requires_sdp": bool(prog.requires_sdp),
    }


# ---------------------------------------------------------------------------
# lowering


def lower_to_conic(cp) -> ConicProgram:
    """Flatten a counterpart into the conic IR (minimization form)."""
    if isinstance(cp, SynthesisCounterpart):
        return _lower(cp.problem, cp.family, lam=cp.lam, synthesis=True)
    if isinstance(cp, AnalysisCounterpart):
        return _lower(cp.problem, cp.family, lam=1.0, synthesis=False)
    raise TypeError(f"not a counterpart: {type(cp).__name__}")


def _lower(
    spb: StackedProblem, fam: UncertaintyFamily, lam: float, synthesis: bool
) -> ConicProgram:
    N, m = spb.N, spb.n_rows
    prim = fam.primitive
    l, n_s = prim.l, prim.n_s
    b = ProgramBuilder()

    # shaping parameters
    theta_dim = _theta_dim(fam, N)
    family = fam.shaping.family
    if family in ("scaled-identity", "diagonal"):
        b.add_nonneg("theta", theta_dim)
    else:
        b.add_free("theta", theta_dim)

    # offsets
    has_y = fam.shaping.offset != "zero"
    if has_y:
        b.add_free("y", N * fam.n_w)

    # row-wise dual multipliers, one cone product per (row, stage)
    segments, pins = _dual_segments(prim)
    b.add_mixed_slack("Lam", segments * (m * N))
    if pins:
        lam_pins = np.array(
            [r * (N * l) + k * l + t for r in range(m) for k in range(N) for t in pins]
        )
        b.add_equality(
            {"Lam": _pin_rows(lam_pins, m * N * l)}, np.zeros(lam_pins.shape[0])
        )

    if synthesis:
        b.add_free("tau", 1)
        p_rows, p_cols = _packed_P_indices(spb, n_s)
        n_packed = int(p_rows.shape[0])
        if n_packed:
            b.add_free("P", n_packed)
        b.add_free("p", N * spb.n_u)
        b.add_mixed_slack("mu", segments * N)
        if pins:
            mu_pins = np.array([k * l + t for k in range(N) for t in pins])
            b.add_equality(
                {"mu": _pin_rows(mu_pins, N * l)}, np.zeros(mu_pins.shape[0])
            )

    # robust feasibility:  [C p] + D y + Lambda g <= d
    ineq = {"Lam": _lambda_g_map(prim.g, m, N)}
    if has_y:
        ineq["y"] = sp.csr_matrix(spb.D)
    if synthesis:
        ineq["p"] = sp.csr_matrix(spb.C)
    b.add_inequality(ineq, spb.d)

    # matching condition:  Lambda G = [C P] + D Y
    eq = {"Lam": _lambda_G_map(prim.G, m, N), "theta": -_DY_map(spb.D, fam, N)}
    if synthesis and n_packed:
        eq["P"] = -_CP_map(spb.C, p_rows, p_cols, N, n_s)
    b.add_equality(eq, np.zeros(m * N * n_s))

    if synthesis:
        # worst-case cost epigraph:  c'p + mu'g <= tau,  G'mu = P'c
        gbar = np.tile(prim.g, N)
        b.add_inequality(
            {"p": sp.csr_matrix(spb.c.reshape(1, -1)),
             "mu": sp.csr_matrix(gbar.reshape(1, -1)),
             "tau": -np.ones((1, 1))},
            np.zeros(1),
        )
        rhs = {"mu": _mu_G_map(prim.G, N)}
        if n_packed:
            rhs["P"] = -_Pt_c_map(spb.c, p_rows, p_cols, N, n_s)
        b.add_equality(rhs, np.zeros(N * n_s))
        b.add_linear_objective({"tau": np.ones(1)})
        b.add_offset(spb.cost_offset)

    # offset box coupling:  -diag(Y_k) <= y_k <= diag(Y_k)
    if fam.shaping.offset == "box":
        dm = _diag_map(fam, N)
        eye = sp.identity(N * fam.n_w, format="csr")
        b.add_inequality({"y": eye, "theta": -dm}, np.zeros(N * fam.n_w))
        b.add_inequality({"y": -eye, "theta": -dm}, np.zeros(N * fam.n_w))

    _add_size_objective(b, spb, fam, lam)

    b.set_metadata(
        requires_sdp=fam.requires_sdp,
        family=fam.template,
        kind="synthesis" if synthesis else "analysis",
        horizon=N,
    )
    if fam.requires_sdp:
        b.set_metadata(
            psd_note=(
                "shaping blocks Y_k (symmetric, packed upper-triangular in "
                "'theta') must additionally satisfy Y_k >= eps*I with a "
                "log-det size reward; needs a semidefinite-capable backend"
            )
        )
    return b.build()


def _add_size_objective(
    b: ProgramBuilder, spb: StackedProblem, fam: UncertaintyFamily, lam: float
) -> None:
    """Install -lam * size(Y, y) into the minimization objective."""
    N = spb.N
    obj = fam.objective
    weight = lam * obj.lam
    if weight == 0.0:
        # keep theta bounded when there is no incentive to grow the set
        return
    n_w, n_s = fam.n_w, fam.n_s
    theta_dim = b.dim("theta")

    if obj.kind == "radius":
        b.add_linear_objective({"theta": -weight * np.ones(theta_dim)})
        return
    if obj.kind == "log-det-diagonal":
        # theta is the stacked diagonal (diagonal shaping family)
        b.add_log_objective("theta", weight)
        return
    if obj.kind == "linear-weights":
        w = (
            obj.vectors.ravel()
            if obj.vectors is not None
            else np.ones(n_w)
        )
        b.add_linear_objective({"theta": -weight * np.tile(w, N)})
        return
    if obj.kind == "vertex-pushing":
        coeff = np.zeros(theta_dim)
        for k in range(N):
            for (i, q), t, cf in _stage_entry_terms(fam, k):
                coeff[t] += cf * obj.vectors[q][i]
        b.add_linear_objective({"theta": -weight * coeff})
        return
    if obj.kind == "vertex-pulling":
        # per-vertex squared-distance epigraphs: 2 u (1/2) >= ||d_q - Y_.q||^2
        for k in range(N):
            for q in range(n_s):
                name = f"pull_{k}_{q}"
                b.add_rsoc(name, 2 + n_w)
                pin = np.zeros((1, 2 + n_w))
                pin[0, 1] = 1.0
                b.add_equality({name: pin}, np.array([0.5]))
                # z + Y_.q = d_q
                zsel = np.zeros((n_w, 2 + n_w))
                zsel[:, 2:] = np.eye(n_w)
                ysel = sp.lil_matrix((n_w, b.dim("theta")))
                for (i, qq), t, cf in _stage_entry_terms(fam, k):
                    if qq == q:
                        ysel[i, t] += cf
                b.add_equality(
                    {name: zsel, "theta": ysel.tocsr()}, obj.vectors[q]
                )
                b.add_linear_objective(
                    {name: weight * np.eye(1, 2 + n_w, 0).ravel()}
                )
        return
    if obj.kind == "root-det-2x2":
        if fam.requires_sdp:
            return  # emitted symbolically; metadata carries the note
        per = (n_w * (n_w + 1)) // 2
        if n_w == 1:
            # det = Y_11; log reward directly, with Y_11 >= eps
            b.add_nonneg("tdet", N)
            sel = sp.identity(N, format="csr")
            b.add_equality({"tdet": sp.identity(N, format="csr"),
                            "theta": -sel}, np.zeros(N))
            b.add_inequality({"theta": -sp.identity(N, format="csr")},
                             -EPS_PSD * np.ones(N))
            b.add_log_objective("tdet", weight)
            return
        # n_w == 2, theta per stage = (a, b, c), Y = [[a, b], [b, c]]
        b.add_nonneg("tdet", N)
        for k in range(N):
            a_i, b_i, c_i = 3 * k, 3 * k + 1, 3 * k + 2
            # determinant epigraph: (a, c, sqrt2 t, sqrt2 b) in RSOC
            det = f"det_{k}"
            b.add_rsoc(det, 4)
            rows = sp.lil_matrix((4, b.dim("theta")))
            rows[0, a_i] = -1.0
            rows[1, c_i] = -1.0
            rows[3, b_i] = -_SQRT2
            tsel = sp.lil_matrix((4, N))
            tsel[2, k] = -_SQRT2
            b.add_equality(
                {det: np.eye(4), "theta": rows.tocsr(), "tdet": tsel.tocsr()},
                np.zeros(4),
            )
            # strict positivity: (a - eps, c - eps, sqrt2 b) in RSOC
            psd = f"psd_{k}"
            b.add_rsoc(psd, 3)
            rows = sp.lil_matrix((3, b.dim("theta")))
            rows[0, a_i] = -1.0
            rows[1, c_i] = -1.0
            rows[2, b_i] = -_SQRT2
            b.add_equality(
                {psd: np.eye(3), "theta": rows.tocsr()},
                np.array([-EPS_PSD, -EPS_PSD, 0.0]),
            )
        # log det Y_k = 2 log t_k
        b.add_log_objective("tdet", 2.0 * weight)
        return
    raise ValueError(f"unknown size objective {obj.kind!r}")


# ---------------------------------------------------------------------------
# solving and unpacking


@dataclass(frozen=True)
class ShapedSolution:
    """Unpacked optimum of a counterpart solve."""

    status: str
    objective: float
    size_value: float
    Y: list = field(default_factory=list)
    y: list = field(default_factory=list)
    P: np.ndarray | None = None
    p: np.ndarray | None = None
    tau: float | None = None
    worst_case_cost: float | None = None
    report: SolveReport | None = None

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def solve_counterpart(
    cp,
    backend: str = "builtin",
    opts: SolverOptions | None = None,
) -> ShapedSolution:
    """Lower, solve, and unpack a counterpart.

    For a synthesis counterpart the reported objective is
    tau - lam * size + cost offset; for analysis it is the (maximized)
    size value itself.
    """
    prog = lower_to_conic(cp)
    report = solve_routed(prog, backend=backend, opts=opts)
    if report.status != "optimal":
        return ShapedSolution(
            status=report.status,
            objective=float("nan"),
            size_value=float("nan"),
            report=report,
        )
    fam, spb = cp.family, cp.problem
    N = spb.N
    theta = report.value("theta")
    Ys = _unpack_Y(fam, N, theta)
    if fam.shaping.offset != "zero":
        yv = report.value("y")
        ys = [yv[k * fam.n_w : (k + 1) * fam.n_w] for k in range(N)]
    else:
        ys = [np.zeros(fam.n_w) for _ in range(N)]
    size = sum(
        evaluate_objective(fam.objective, Yk, yk) for Yk, yk in zip(Ys, ys)
    )
    if isinstance(cp, SynthesisCounterpart):
        tau = float(report.value("tau")[0])
        n_s = fam.n_s
        P = np.zeros((N * spb.n_u, N * n_s))
        if "P" in report.var_map:
            p_rows, p_cols = _packed_P_indices(spb, n_s)
            P[p_rows, p_cols] = report.value("P")
        p = report.value("p").copy()
        return ShapedSolution(
            status="optimal",
            objective=float(report.objective),
            size_value=float(size),
            Y=Ys,
            y=ys,
            P=P,
            p=p,
            tau=tau,
            worst_case_cost=tau + spb.cost_offset,
            report=report,
        )
    return ShapedSolution(
        status="optimal",
        objective=float(size),
        size_value=float(size),
        Y=Ys,
        y=ys,
        report=report,
    )
