"""Reference primal-dual interior-point solver.

Path-following with Nesterov-Todd scaling over products of nonnegative
orthants and second-order cones, Mehrotra predictor-corrector steps, and a
weighted central path that absorbs concave  sum_i w_i log(x_i)  objective
terms into the barrier: the complementarity target for a log-weighted
coordinate is  x_i z_i -> w_i  instead of 0.

Rotated second-order cone blocks are reduced to plain SOC blocks up front
through the orthogonal change of variables (u, v) -> ((u+v), (u-v))/sqrt(2).

The Newton step solves the regularized augmented system

    [ -(W^-2 + dI)   A' ] [dx]   [ rd - W^-1 gamma ]
    [      A         dI ] [dy] = [ rp              ]

with one sparse LU factorization per iteration (shared by predictor and
corrector) and iterative refinement against the unregularized matrix.
Iteration cost is dominated by this factorization; everything is dense at
desk scale and sparse LU keeps the horizon-stacked programs tractable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..uncertainty import Cone
from .program import ConicProgram

_DEBUG = False
_TINY = 1e-300


@dataclass
class SolverOptions:
    tol_feas: float = 1e-8
    tol_gap: float = 1e-8
    max_iter: int = 100
    step_scale: float = 0.99
    reg: float = 1e-9
    refine_steps: int = 5
    diverge_norm: float = 1e13


@dataclass
class SolveReport:
    status: str  # optimal | infeasible | unbounded | max-iterations | unsupported-cone
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    z: np.ndarray | None = None
    objective: float = float("nan")
    primal_residual: float = float("nan")
    dual_residual: float = float("nan")
    gap: float = float("nan")
    iterations: int = 0
    wall_time: float = 0.0
    message: str = ""
    var_map: dict = field(default_factory=dict)

    def value(self, name: str) -> np.ndarray:
        if self.x is None:
            raise ValueError("no primal solution available")
        return self.x[self.var_map[name]]


@dataclass
class KKTResiduals:
    primal: float
    primal_cone: float
    dual: float
    dual_cone: float
    complementarity: float

    @property
    def max_violation(self) -> float:
        vals = [self.primal, self.primal_cone]
        for v in (self.dual, self.dual_cone, self.complementarity):
            if not np.isnan(v):
                vals.append(v)
        return max(vals)


# ---------------------------------------------------------------------------
# rotated-SOC reduction


def _rsoc_transform(prog: ConicProgram) -> tuple[sp.csr_matrix | None, tuple]:
    """Orthogonal involution T mapping rsoc blocks to soc blocks; cones after."""
    pairs = []
    cones = []
    for start, cone in prog.cones:
        if cone.kind == "rsoc":
            pairs.append(start)
            cones.append((start, Cone("soc", cone.dim)))
        else:
            cones.append((start, cone))
    if not pairs:
        return None, tuple(cones)
    T = sp.lil_matrix(sp.identity(prog.n))
    r = 1.0 / np.sqrt(2.0)
    for s in pairs:
        T[s, s] = r
        T[s, s + 1] = r
        T[s + 1, s] = r
        T[s + 1, s + 1] = -r
    return T.tocsr(), tuple(cones)


# ---------------------------------------------------------------------------
# SOC block helpers


def _jdot(u, v):
    return u[0] * v[0] - u[1:] @ v[1:]


def _jprod(u, v):
    out = np.empty_like(u)
    out[0] = u @ v
    out[1:] = u[0] * v[1:] + v[0] * u[1:]
    return out


def _jinv(u):
    d = _jdot(u, u)
    out = -u / d
    out[0] = u[0] / d
    return out


def _soc_interior(u, margin=0.0) -> bool:
    return u[0] > margin and _jdot(u, u) > margin


def _soc_step_to_boundary(x, dx) -> float:
    """sup alpha with x + alpha dx in the SOC, for x strictly interior."""
    a = _jdot(dx, dx)
    b = _jdot(x, dx)
    c = _jdot(x, x)
    cands = []
    if abs(a) > 1e-300:
        disc = b * b - a * c
        if disc >= 0:
            sq = np.sqrt(disc)
            for r in ((-b - sq) / a, (-b + sq) / a):
                if r > 0:
                    cands.append(r)
    elif b < 0:
        cands.append(-c / (2 * b))
    if dx[0] < 0:
        cands.append(-x[0] / dx[0])
    if not cands:
        return np.inf
    alpha = min(cands)
    # guard against roots past an earlier exit through the cone wall
    lo = min(cands)
    return lo if lo > 0 else 0.0


class _Scaling:
    """Nesterov-Todd scaling for the current iterate (x, z)."""

    def __init__(self, nn_idx, soc_blocks, x, z):
        self.nn_idx = nn_idx
        self.soc_blocks = soc_blocks
        xi = np.maximum(x[nn_idx], _TINY)
        zi = np.maximum(z[nn_idx], _TINY)
        self.d_nn = np.sqrt(xi / zi)  # W on the orthant
        self.h_nn = zi / xi  # W^-2
        self.lmbda_nn = np.sqrt(xi * zi)
        self.soc = []
        for s, dim in soc_blocks:
            xb, zb = x[s : s + dim], z[s : s + dim]
            a = np.sqrt(max(_jdot(xb, xb), _TINY))
            b = np.sqrt(max(_jdot(zb, zb), _TINY))
            xh, zh = xb / a, zb / b
            gam = np.sqrt(max((1.0 + xh @ zh) / 2.0, _TINY))
            v = (xh + np.concatenate([[zh[0]], -zh[1:]])) / (2.0 * gam)
            beta = np.sqrt(a / b)
            # Jordan square root of v (jdet(v) = 1)
            w = np.empty_like(v)
            w[0] = np.sqrt((v[0] + 1.0) / 2.0)
            w[1:] = v[1:] / (2.0 * w[0])
            lam = beta * (2.0 * w * (w @ zb) - np.concatenate([[zb[0]], -zb[1:]]))
            self.soc.append((s, dim, beta, v, w, lam))

    def lmbda(self, n) -> np.ndarray:
        lam = np.zeros(n)
        lam[self.nn_idx] = self.lmbda_nn
        for s, dim, _, _, _, lb in self.soc:
            lam[s : s + dim] = lb
        return lam

    def apply_Winv(self, u) -> np.ndarray:
        out = np.zeros_like(u)
        out[self.nn_idx] = u[self.nn_idx] / self.d_nn
        for s, dim, beta, _, w, _ in self.soc:
            ub = u[s : s + dim]
            jw = np.concatenate([[w[0]], -w[1:]])
            ju = np.concatenate([[ub[0]], -ub[1:]])
            out[s : s + dim] = (2.0 * jw * (jw @ ub) - ju) / beta
        return out

    def apply_W(self, u) -> np.ndarray:
        out = np.zeros_like(u)
        out[self.nn_idx] = u[self.nn_idx] * self.d_nn
        for s, dim, beta, _, w, _ in self.soc:
            ub = u[s : s + dim]
            ju = np.concatenate([[ub[0]], -ub[1:]])
            out[s : s + dim] = beta * (2.0 * w * (w @ ub) - ju)
        return out

    def hessian(self, n) -> sp.csr_matrix:
        """W^-2 on cone coordinates, zero elsewhere, as a sparse matrix."""
        H = sp.lil_matrix((n, n))
        H[self.nn_idx, self.nn_idx] = self.h_nn
        for s, dim, beta, v, _, _ in self.soc:
            jv = np.concatenate([[v[0]], -v[1:]])
            J = np.diag(np.concatenate([[1.0], -np.ones(dim - 1)]))
            H[s : s + dim, s : s + dim] = (2.0 * np.outer(jv, jv) - J) / beta**2
        return H.tocsr()


# ---------------------------------------------------------------------------
# driver


def _init_point(A, b, c, nn_idx, soc_blocks, n):
    """Least-squares-ish initialization shifted into the cone interior."""
    p = A.shape[0]
    if p:
        eye_n = sp.identity(n, format="csr")
        K = sp.bmat(
            [[-eye_n, A.T], [A, 1e-8 * sp.identity(p, format="csr")]],
            format="csc",
        )
        lu = spla.splu(K)
        # primal: min ||x|| s.t. Ax = b   (via the same saddle system)
        sol = lu.solve(np.concatenate([np.zeros(n), b]))
        x = -sol[:n]
        # dual: min ||z|| s.t. A'y + z = c
        sol = lu.solve(np.concatenate([-c, np.zeros(p)]))
        y = sol[n:]
        z = c - A.T @ y
    else:
        x = np.zeros(n)
        y = np.zeros(0)
        z = c.copy()
    for v in (x, z):
        vi = v[nn_idx]
        shift = -vi.min() if nn_idx.size else 0.0
        if shift >= -0.1:
            v[nn_idx] = vi + shift + 1.0
        for s, dim in soc_blocks:
            blk = v[s : s + dim]
            gap = np.linalg.norm(blk[1:]) - blk[0]
            if gap >= -0.1:
                blk[0] += gap + 1.0
    return x, y, z


def solve(prog: ConicProgram, opts: SolverOptions | None = None) -> SolveReport:
    """Solve a conic program with the reference interior-point method."""
    opts = opts or SolverOptions()
    t0 = time.perf_counter()

    if prog.requires_sdp:
        return SolveReport(
            status="unsupported-cone",
            message="program requires an SDP-capable backend",
            var_map=dict(prog.var_map),
        )

    T, cones = _rsoc_transform(prog)
    A = prog.Aeq.tocsr()
    c = prog.c.copy()
    if T is not None:
        A = (A @ T).tocsr()
        c = T @ c
        if np.any(prog.log_weights[[s for s, cn in prog.cones if cn.kind == "rsoc"]]):
            raise ValueError("log weights on rotated-SOC leading coordinates")
    b = prog.beq.copy()
    n, p = prog.n, b.shape[0]
    w = prog.log_weights

    # row equilibration of the equalities (pure row scaling; solution unchanged)
    if p:
        row_norm = np.asarray(abs(A).max(axis=1).todense()).ravel()
        row_scale = 1.0 / np.maximum(row_norm, 1e-12)
        D = sp.diags(row_scale)
        A = (D @ A).tocsr()
        b = row_scale * b
    obj_scale = max(1.0, np.abs(c).max(initial=0.0), w.max(initial=0.0))
    c = c / obj_scale
    w = w / obj_scale

    nn_idx = []
    soc_blocks = []
    for start, cone in cones:
        if cone.kind == "nonneg":
            nn_idx.extend(range(start, start + cone.dim))
        else:
            soc_blocks.append((start, cone.dim))
    nn_idx = np.array(nn_idx, dtype=int)
    cone_mask = np.zeros(n, dtype=bool)
    cone_mask[nn_idx] = True
    for s, dim in soc_blocks:
        cone_mask[s : s + dim] = True
    deg = nn_idx.size + len(soc_blocks)
    w_sum = float(w.sum())

    At = A.T.tocsr()

    x, y, z = _init_point(A, b, c, nn_idx, soc_blocks, n)
    z[~cone_mask] = 0.0

    def shift_target(sigma_t):
        tgt = np.zeros(n)
        tgt[nn_idx] = w[nn_idx] + sigma_t
        for s, dim in soc_blocks:
            tgt[s] = sigma_t
        return tgt

    status = "max-iterations"
    message = ""
    it = 0
    pres = dres = sgap = np.nan
    best = None  # (score, x, y, z, pres, dres, sgap)
    stalls = 0
    reg = opts.reg
    for it in range(1, opts.max_iter + 1):
        rp = b - A @ x
        rd = c - (At @ y if p else np.zeros(n)) - z
        gap = float(x[cone_mask] @ z[cone_mask])
        sgap = gap - w_sum
        t_hat = max(sgap / max(deg, 1), _TINY)

        pres = np.linalg.norm(rp) / (1.0 + np.linalg.norm(b))
        dres = np.linalg.norm(rd) / (1.0 + np.linalg.norm(c))
        pobj = float(c @ x)
        relgap = abs(sgap) / max(1.0, abs(pobj))
        # per-coordinate complementarity, the same measure check_kkt reports;
        # it is the meaningful gap when the summed gap is dominated by the
        # sheer number of cone coordinates
        comp = float(np.abs(x[nn_idx] * z[nn_idx] - w[nn_idx]).max(initial=0.0))
        for s, dim in soc_blocks:
            comp = max(comp, abs(float(x[s : s + dim] @ z[s : s + dim])))
        relcomp = comp / (1.0 + abs(pobj))
        gap_meas = min(relgap, relcomp)
        score = max(pres, dres, gap_meas)
        if best is None or score < best[0]:
            best = (score, x.copy(), y.copy(), z.copy(), pres, dres, sgap, gap_meas)
        if pres <= opts.tol_feas and dres <= opts.tol_feas and (
            abs(sgap) <= opts.tol_gap or gap_meas <= opts.tol_gap
        ):
            status = "optimal"
            break
        if stalls >= 3:
            message = "step lengths collapsed; returning the best iterate"
            break
        if (
            np.linalg.norm(x) > opts.diverge_norm
            or np.linalg.norm(z) > opts.diverge_norm
            or np.linalg.norm(y) > opts.diverge_norm
        ):
            status = "infeasible"
            message = (
                "iterates diverged; the program is likely primal or dual "
                f"infeasible (pres={pres:.2e}, dres={dres:.2e})"
            )
            break

        # Farkas-style certificates.  A ray (y, z) with A'y + z ~ 0,
        # z in the dual cone and b'y > 0 proves primal infeasibility;
        # a ray x with Ax ~ 0, x in the cone and c'x < 0 proves the
        # primal is unbounded below.
        by = float(b @ y) if p else 0.0
        if by > 0.0 and np.linalg.norm(y) > 1e4:
            ray = np.linalg.norm((At @ y if p else 0.0) + z) / by
            if ray <= opts.tol_feas:
                status = "infeasible"
                message = "primal infeasibility certificate found"
                break
        cx = float(c @ x)
        if cx < 0.0 and w_sum == 0.0:
            ray = (np.linalg.norm(A @ x) if p else 0.0) / (-cx)
            if ray <= opts.tol_feas and np.linalg.norm(x) > 1e6:
                status = "unbounded"
                message = "dual infeasibility certificate found"
                break

        scal = _Scaling(nn_idx, soc_blocks, x, z)
        lam = scal.lmbda(n)
        H = scal.hessian(n)
        lu = None
        while lu is None:
            if p:
                Kreg = sp.bmat(
                    [
                        [-(H + reg * sp.identity(n)), At],
                        [A, reg * sp.identity(p)],
                    ],
                    format="csc",
                )
                K_true = sp.bmat(
                    [[-H, At], [A, sp.csr_matrix((p, p))]], format="csc"
                )
            else:
                Kreg = (-(H + reg * sp.identity(n))).tocsc()
                K_true = (-H).tocsc()
            try:
                lu = spla.splu(Kreg)
            except RuntimeError:
                reg *= 100.0
                if reg > 1e-2:
                    break
        if lu is None:
            message = "KKT factorization failed; returning the best iterate"
            break

        def kkt_solve(rhs):
            sol = lu.solve(rhs)
            for _ in range(opts.refine_steps):
                resid = rhs - K_true @ sol
                sol = sol + lu.solve(resid)
            return sol

        def direction(target, dxaff=None, dzaff=None):
            # gamma = lambda^-1 o (target - lambda o lambda), in scaled space
            gam = np.zeros(n)
            ll = lam[nn_idx] * lam[nn_idx]
            corr = np.zeros(n)
            if dxaff is not None:
                wx = scal.apply_Winv(dxaff)
                wz = scal.apply_W(dzaff)
                corr[nn_idx] = wx[nn_idx] * wz[nn_idx]
                for s, dim in soc_blocks:
                    corr[s : s + dim] = _jprod(wx[s : s + dim], wz[s : s + dim])
            gam[nn_idx] = (target[nn_idx] - ll - corr[nn_idx]) / np.maximum(
                lam[nn_idx], _TINY
            )
            for s, dim in soc_blocks:
                lb = lam[s : s + dim]
                rhs_b = target[s : s + dim].copy()
                rhs_b -= _jprod(lb, lb)
                rhs_b -= corr[s : s + dim]
                gam[s : s + dim] = _jprod(_jinv(lb), rhs_b)
            rhs = np.concatenate([rd - scal.apply_Winv(gam), rp])
            sol = kkt_solve(rhs)
            dx = sol[:n]
            dy = sol[n:]
            dz = rd - (At @ dy if p else np.zeros(n))
            dz[~cone_mask] = 0.0
            return dx, dy, dz

        def max_step(vx, dvx):
            alpha = np.inf
            vi, dvi = vx[nn_idx], dvx[nn_idx]
            neg = dvi < 0
            if neg.any():
                alpha = min(alpha, float(np.min(-vi[neg] / dvi[neg])))
            for s, dim in soc_blocks:
                alpha = min(alpha, _soc_step_to_boundary(vx[s : s + dim], dvx[s : s + dim]))
            return alpha

        # predictor: aim straight at the weighted-path endpoint
        dx_a, dy_a, dz_a = direction(shift_target(0.0))
        a_p = min(1.0, max_step(x, dx_a))
        a_d = min(1.0, max_step(z, dz_a))
        a_aff = min(a_p, a_d)
        gap_aff = float(
            (x + a_aff * dx_a)[cone_mask] @ (z + a_aff * dz_a)[cone_mask]
        ) - w_sum
        if sgap > 0 and gap_aff > 0:
            sigma = min(1.0, max(0.0, (gap_aff / sgap) ** 3))
        else:
            sigma = 0.5

        dx, dy, dz = direction(shift_target(sigma * t_hat), dx_a, dz_a)
        a_p = max_step(x, dx)
        a_d = max_step(z, dz)
        alpha = opts.step_scale * min(a_p, a_d, 1.0 / opts.step_scale)
        if _DEBUG:  # pragma: no cover - diagnostic trace
            print(
                f"it={it:3d} pres={pres:.2e} dres={dres:.2e} sgap={sgap:.2e} "
                f"sigma={sigma:.2f} alpha={alpha:.2e} |x|={np.linalg.norm(x):.2e} "
                f"|y|={np.linalg.norm(y):.2e} |z|={np.linalg.norm(z):.2e}"
            )
        stalls = stalls + 1 if alpha < 1e-9 else 0
        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz

    if status == "max-iterations" and best is not None and np.isfinite(best[0]):
        _, x, y, z, pres, dres, sgap, gap_meas = best
        if pres <= opts.tol_feas and dres <= opts.tol_feas and (
            abs(sgap) <= opts.tol_gap or gap_meas <= opts.tol_gap
        ):
            status = "optimal"

    wall = time.perf_counter() - t0
    # undo objective scaling on the duals
    y_out = y * obj_scale
    z_out = z * obj_scale
    x_out = x
    if T is not None:
        x_out = T @ x_out
        z_out = T @ z_out
    if p:
        y_out = row_scale * y_out
    obj = prog.objective_value(x_out) if status == "optimal" else float("nan")
    return SolveReport(
        status=status,
        x=x_out,
        y=y_out,
        z=z_out,
        objective=obj,
        primal_residual=float(pres),
        dual_residual=float(dres),
        gap=float(abs(sgap)) if np.isfinite(sgap) else np.nan,
        iterations=it,
        wall_time=wall,
        message=message,
        var_map=dict(prog.var_map),
    )


def check_kkt(prog: ConicProgram, x, y=None, z=None) -> KKTResiduals:
    """Pure-function KKT residual report at a (possibly suboptimal) point.

    Dual and complementarity residuals are NaN when duals are not supplied.
    The dual slack convention matches the solver: for log-weighted
    coordinates z_i is the folded multiplier, so stationarity reads
    c - A'y - z = 0 and complementarity x_i z_i = w_i.
    """
    x = np.asarray(x, dtype=float).ravel()
    A, b, c = prog.Aeq, prog.beq, prog.c
    pres = float(np.linalg.norm(A @ x - b, np.inf)) / (1.0 + float(np.abs(b).max(initial=0.0))) if b.size else 0.0

    def cone_violation(v, tol_sign=1.0):
        worst = 0.0
        for start, cone in prog.cones:
            blk = v[start : start + cone.dim]
            if cone.kind == "nonneg":
                worst = max(worst, float(np.maximum(-blk, 0.0).max(initial=0.0)))
            elif cone.kind == "soc":
                worst = max(worst, max(0.0, float(np.linalg.norm(blk[1:]) - blk[0])))
            else:
                worst = max(worst, max(0.0, -float(blk[0])), max(0.0, -float(blk[1])))
                worst = max(
                    worst,
                    max(0.0, float(blk[2:] @ blk[2:] - 2.0 * blk[0] * blk[1])),
                )
        return worst

    p_cone = cone_violation(x)
    if y is None or z is None:
        return KKTResiduals(pres, p_cone, np.nan, np.nan, np.nan)

    y = np.asarray(y, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    rd = c - (A.T @ y if b.size else 0.0) - z
    dres = float(np.abs(rd).max(initial=0.0)) / (1.0 + float(np.abs(c).max(initial=0.0)))
    d_cone = cone_violation(z)
    comp = 0.0
    w = prog.log_weights
    for start, cone in prog.cones:
        sl = slice(start, start + cone.dim)
        if cone.kind == "nonneg":
            comp = max(comp, float(np.abs(x[sl] * z[sl] - w[sl]).max(initial=0.0)))
        else:
            comp = max(comp, float(abs(x[sl] @ z[sl])))
    scale = 1.0 + abs(float(c @ x))
    return KKTResiduals(pres, p_cone, dres, d_cone, comp / scale)
