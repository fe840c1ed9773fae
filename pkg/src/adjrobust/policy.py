"""Affine policies over primitive coordinates and their recovery.

A synthesis counterpart returns a policy u = P s + p acting on the
primitive-set coordinates s, while at run time only the disturbance
w = Y s + y is measured.  Recovery inverts that map: exactly through
Y^-1 when the shaping matrix is square and well conditioned, and
otherwise through a stage-wise minimum-norm lifting L with
Y L(w) + y = w and L(w) in the primitive set, which makes the
recovered policy piecewise affine and continuous.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .uncertainty import PrimitiveSet, UncertaintyFamily

COND_LIMIT = 1e12


@dataclass(frozen=True)
class AffinePolicy:
    """u = P s + p with P lower-block-triangular per the causality mask."""

    P: np.ndarray
    p: np.ndarray
    causality: np.ndarray  # (N*n_u, N) stage-level mask
    N: int

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        p = np.asarray(self.p, dtype=float).ravel()
        mask = np.asarray(self.causality, dtype=bool)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "causality", mask)
        if P.shape[0] != p.shape[0]:
            raise ValueError("P row count must match len(p)")
        if P.shape[1] % self.N or P.shape[0] % self.N:
            raise ValueError("P dimensions must be divisible by the horizon")
        if mask.shape != (P.shape[0], self.N):
            raise ValueError("causality mask must be (N*n_u, N)")
        n_s = P.shape[1] // self.N
        for k in range(self.N):
            blocked = ~mask[:, k]
            if np.any(P[blocked, k * n_s : (k + 1) * n_s] != 0.0):
                raise ValueError("P has nonzero entries outside the causality mask")

    @property
    def n_u(self) -> int:
        return self.P.shape[0] // self.N

    @property
    def n_s(self) -> int:
        return self.P.shape[1] // self.N


def evaluate_primitive(
    pol: AffinePolicy, s, primitive: PrimitiveSet | None = None, tol: float = 1e-9
) -> np.ndarray:
    """Input sequence P s + p, optionally checking s stage-wise in S."""
    s = np.asarray(s, dtype=float).ravel()
    if s.shape[0] != pol.P.shape[1]:
        raise ValueError("primitive vector length mismatch")
    if primitive is not None:
        n_s = pol.n_s
        for k in range(pol.N):
            if not primitive.contains(s[k * n_s : (k + 1) * n_s], tol=tol):
                raise ValueError(f"stage-{k} primitive coordinates outside S")
    return pol.P @ s + pol.p


@dataclass(frozen=True)
class LiftingOperator:
    """Stage-wise minimum-2-norm lifting L_k(w) onto the primitive set.

    L_k(w) = argmin { ||z||^2 : Y_k z + y_k = w, z in S_k }.  Satisfies
    (P1) stage-wise structure, (P2) range in S, (P3) Y L(w) + y = w.
    """

    primitive: PrimitiveSet
    Y: tuple  # per-stage shaping matrices
    y: tuple  # per-stage offsets
    _inverses: tuple = field(default=(), compare=False)

    def __post_init__(self):
        Ys = tuple(np.atleast_2d(np.asarray(Yk, dtype=float)) for Yk in self.Y)
        ys = tuple(np.asarray(yk, dtype=float).ravel() for yk in self.y)
        object.__setattr__(self, "Y", Ys)
        object.__setattr__(self, "y", ys)
        invs = []
        for Yk in Ys:
            if Yk.shape[0] == Yk.shape[1] and np.linalg.cond(Yk) <= COND_LIMIT:
                invs.append(np.linalg.inv(Yk))
            else:
                invs.append(None)
        object.__setattr__(self, "_inverses", tuple(invs))

    @property
    def N(self) -> int:
        return len(self.Y)

    def lift_stage(self, k: int, w_k, tol: float = 1e-6) -> np.ndarray:
        """Minimum-norm primitive coordinates for one stage."""
        w_k = np.asarray(w_k, dtype=float).ravel()
        inv = self._inverses[k]
        if inv is not None:
            z = inv @ (w_k - self.y[k])
            if not self.primitive.contains(z, tol=tol):
                raise ValueError(f"stage-{k} disturbance outside the shaped set")
            return z
        z = _min_norm_lift(self.primitive, self.Y[k], self.y[k], w_k, tol)
        if z is None:
            raise ValueError(f"stage-{k} disturbance outside the shaped set")
        return z

    def lift(self, w, tol: float = 1e-6) -> np.ndarray:
        """Stacked lifting of a full disturbance sequence."""
        n_w = self.Y[0].shape[0]
        w = np.asarray(w, dtype=float).reshape(self.N, n_w)
        return np.concatenate(
            [self.lift_stage(k, w[k], tol=tol) for k in range(self.N)]
        )


def lift(lop: LiftingOperator, w, tol: float = 1e-6) -> np.ndarray:
    """Functional alias for :meth:`LiftingOperator.lift`."""
    return lop.lift(w, tol=tol)


def _min_norm_lift(
    prim: PrimitiveSet, Y: np.ndarray, y: np.ndarray, w: np.ndarray, tol: float
):
    """Solve  min ||z||^2  s.t.  Y z + y = w,  z in S;  None if infeasible.

    A diagonal fast path covers rank-deficient rectangles; the general
    case runs a small conic program with a rotated-SOC epigraph.
    """
    n_s = prim.n_s
    if (
        prim.is_polyhedral
        and Y.shape[0] == Y.shape[1]
        and np.allclose(Y, np.diag(np.diag(Y)))
        and np.allclose(prim.G, np.vstack([np.eye(n_s), -np.eye(n_s)]))
        and np.allclose(prim.g, 1.0)
    ):
        # box primitive with diagonal (possibly singular) Y: coordinates
        # decouple and the minimum-norm choice zeroes dead directions
        diag = np.diag(Y)
        resid = w - y
        z = np.zeros(n_s)
        live = np.abs(diag) > 0.0
        z[live] = resid[live] / diag[live]
        if np.any(np.abs(resid[~live]) > tol) or np.any(np.abs(z) > 1.0 + tol):
            return None
        return np.clip(z, -1.0, 1.0)

    from .conic.program import ProgramBuilder
    from .conic.solver import solve

    b = ProgramBuilder()
    b.add_rsoc("epi", 2 + n_s)  # (t, 1/2, z): t >= ||z||^2
    pin = np.zeros((1, 2 + n_s))
    pin[0, 1] = 1.0
    b.add_equality({"epi": pin}, np.array([0.5]))
    zsel = np.zeros((n_s, 2 + n_s))
    zsel[:, 2:] = np.eye(n_s)
    b.add_cone_slack("slack", prim.cones)
    b.add_equality(
        {"epi": prim.G @ zsel, "slack": np.eye(prim.l)}, prim.g
    )
    b.add_equality({"epi": Y @ zsel}, w - y)
    b.add_linear_objective({"epi": np.eye(1, 2 + n_s, 0).ravel()})
    rep = solve(b.build())
    if rep.status != "optimal":
        return None
    z = rep.value("epi")[2:]
    if np.linalg.norm(Y @ z + y - w, np.inf) > tol:
        return None
    return z


@dataclass(frozen=True)
class RecoveredPolicy:
    """Implementable policy in disturbance coordinates."""

    mode: str  # affine-inverse | lifted-pwa
    policy: AffinePolicy
    lifting: LiftingOperator
    family: str = ""

    @property
    def Y(self) -> tuple:
        return self.lifting.Y

    @property
    def y(self) -> tuple:
        return self.lifting.y


def recover(
    pol: AffinePolicy, Y, y, fam: UncertaintyFamily
) -> RecoveredPolicy:
    """Select the exact-inverse or lifted evaluation path for a policy."""
    Ys = [np.atleast_2d(np.asarray(Yk, dtype=float)) for Yk in Y]
    ys = [np.asarray(yk, dtype=float).ravel() for yk in y]
    lop = LiftingOperator(primitive=fam.primitive, Y=tuple(Ys), y=tuple(ys))
    invertible = all(inv is not None for inv in lop._inverses)
    return RecoveredPolicy(
        mode="affine-inverse" if invertible else "lifted-pwa",
        policy=pol,
        lifting=lop,
        family=fam.template,
    )


def evaluate_recovered(rp: RecoveredPolicy, w, tol: float = 1e-6) -> np.ndarray:
    """Input sequence pi(w) = P L(w) + p for a measured disturbance."""
    s = rp.lifting.lift(w, tol=tol)
    return rp.policy.P @ s + rp.policy.p


# ---------------------------------------------------------------------------
# serialization


def policy_to_json(rp: RecoveredPolicy) -> dict:
    return {
        "schema_version": 1,
        "mode": rp.mode,
        "family": rp.family,
        "horizon": rp.policy.N,
        "P": rp.policy.P.tolist(),
        "p": rp.policy.p.tolist(),
        "causality": rp.policy.causality.astype(int).tolist(),
        "Y": [Yk.tolist() for Yk in rp.Y],
        "y": [yk.tolist() for yk in rp.y],
    }


def policy_from_json(doc: dict, fam: UncertaintyFamily) -> RecoveredPolicy:
    if doc.get("schema_version") != 1:
        raise ValueError("unsupported policy schema version")
    pol = AffinePolicy(
        P=np.asarray(doc["P"], dtype=float),
        p=np.asarray(doc["p"], dtype=float),
        causality=np.asarray(doc["causality"], dtype=bool),
        N=int(doc["horizon"]),
    )
    return recover(pol, doc["Y"], doc["y"], fam)
