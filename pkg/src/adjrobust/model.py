"""LTI system description, polytopic constraints and horizon stacking.

The compact form produced here is

    min  c' u          s.t.  C u + D w <= d   for all admissible w,

where u and w are the horizon-stacked input/disturbance sequences.  All
state constraints for k = 1..N and input constraints for k = 0..N-1 are
folded into the rows of (C, D, d); the initial state and any known affine
terms are absorbed into d and the cost offset.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _as_matrix(M, name: str) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains nonfinite entries")
    return M


def _as_vector(v, name: str) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float)).ravel()
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains nonfinite entries")
    return v


@dataclass(frozen=True)
class LinearSystem:
    """Discrete-time system x+ = A x + B u + E w."""

    A: np.ndarray
    B: np.ndarray
    E: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", _as_matrix(self.A, "A"))
        object.__setattr__(self, "B", _as_matrix(self.B, "B"))
        object.__setattr__(self, "E", _as_matrix(self.E, "E"))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError("A must be square")
        if self.B.shape[0] != n or self.E.shape[0] != n:
            raise ValueError("B and E must have as many rows as A")

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    @property
    def n_w(self) -> int:
        return self.E.shape[1]


@dataclass(frozen=True)
class PolytopicSet:
    """Polytope {z : F z <= f}."""

    F: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "F", _as_matrix(self.F, "F"))
        object.__setattr__(self, "f", _as_vector(self.f, "f"))
        if self.F.shape[0] != self.f.shape[0]:
            raise ValueError("F and f must have the same number of rows")

    @property
    def dim(self) -> int:
        return self.F.shape[1]

    @property
    def n_rows(self) -> int:
        return self.F.shape[0]

    def contains(self, z, tol: float = 1e-9) -> bool:
        z = _as_vector(z, "z")
        return bool(np.all(self.F @ z <= self.f + tol))

    def is_nonempty(self) -> bool:
        """Check nonemptiness with an LP (Chebyshev-style feasibility)."""
        from scipy.optimize import linprog

        res = linprog(
            np.zeros(self.dim),
            A_ub=self.F,
            b_ub=self.f,
            bounds=[(None, None)] * self.dim,
            method="highs",
        )
        return res.status == 0

    @staticmethod
    def box(lo, hi) -> "PolytopicSet":
        lo = _as_vector(lo, "lo")
        hi = _as_vector(hi, "hi")
        n = lo.shape[0]
        eye = np.eye(n)
        return PolytopicSet(np.vstack([eye, -eye]), np.concatenate([hi, -lo]))


@dataclass(frozen=True)
class StageCost:
    """Linear cost  sum_k q' x_{k+1} + r' u_k  +  q_f' x_N."""

    q: np.ndarray
    r: np.ndarray
    q_f: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", _as_vector(self.q, "q"))
        object.__setattr__(self, "r", _as_vector(self.r, "r"))
        object.__setattr__(self, "q_f", _as_vector(self.q_f, "q_f"))

    @staticmethod
    def zero(n_x: int, n_u: int) -> "StageCost":
        return StageCost(np.zeros(n_x), np.zeros(n_u), np.zeros(n_x))

    @staticmethod
    def input_only(r) -> "StageCost":
        r = _as_vector(r, "r")
        return StageCost(np.zeros(0), r, np.zeros(0))


def causal_mask(N: int, n_u: int, strictly_causal: bool = False) -> np.ndarray:
    """Boolean (N*n_u, N) mask: input coordinate i may depend on stage j."""
    mask = np.zeros((N * n_u, N), dtype=bool)
    for k in range(N):
        limit = k if strictly_causal else k + 1
        mask[k * n_u : (k + 1) * n_u, :limit] = True
    return mask


@dataclass(frozen=True)
class StackedProblem:
    """Horizon-stacked robust OCP data (c, C, D, d) plus causality mask.

    ``causality[i, j]`` is True when stacked input coordinate i is allowed
    to depend on the stage-j disturbance/primitive block.  ``cost_offset``
    carries the affine cost terms absorbed from x0 and known inputs.
    """

    c: np.ndarray
    C: np.ndarray
    D: np.ndarray
    d: np.ndarray
    N: int
    n_u: int
    n_w: int
    causality: np.ndarray
    cost_offset: float = 0.0
    row_labels: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "c", _as_vector(self.c, "c"))
        object.__setattr__(self, "C", _as_matrix(self.C, "C"))
        object.__setattr__(self, "D", _as_matrix(self.D, "D"))
        object.__setattr__(self, "d", _as_vector(self.d, "d"))
        m = self.C.shape[0]
        if self.D.shape[0] != m or self.d.shape[0] != m:
            raise ValueError("C, D, d must have equal row counts")
        if self.C.shape[1] != self.N * self.n_u:
            raise ValueError("C column count inconsistent with N*n_u")
        if self.D.shape[1] != self.N * self.n_w:
            raise ValueError("D column count inconsistent with N*n_w")
        if self.c.shape[0] != self.N * self.n_u:
            raise ValueError("c length inconsistent with N*n_u")
        mask = np.asarray(self.causality, dtype=bool)
        if mask.shape != (self.N * self.n_u, self.N):
            raise ValueError("causality mask must be (N*n_u, N)")
        # causality must be lower-block-triangular at stage granularity
        for k in range(self.N):
            if mask[k * self.n_u : (k + 1) * self.n_u, k + 1 :].any():
                raise ValueError("causality mask is not lower-block-triangular")
        object.__setattr__(self, "causality", mask)

    @property
    def n_rows(self) -> int:
        return self.C.shape[0]

    def nominal_feasible(self) -> bool:
        """Feasibility of the zero-disturbance LP  min c'u s.t. Cu <= d."""
        from scipy.optimize import linprog

        res = linprog(
            np.zeros(self.C.shape[1]),
            A_ub=self.C,
            b_ub=self.d,
            bounds=[(None, None)] * self.C.shape[1],
            method="highs",
        )
        return res.status == 0


def simulate(sys: LinearSystem, x0, u, w) -> np.ndarray:
    """Exact forward recursion; returns the trajectory x_1..x_N as (N, n_x)."""
    x0 = _as_vector(x0, "x0")
    u = np.asarray(u, dtype=float).reshape(-1, sys.n_u)
    w = np.asarray(w, dtype=float).reshape(-1, sys.n_w)
    if u.shape[0] != w.shape[0]:
        raise ValueError("input and disturbance sequences must have equal length")
    xs = []
    x = x0
    for k in range(u.shape[0]):
        x = sys.A @ x + sys.B @ u[k] + sys.E @ w[k]
        xs.append(x)
    return np.array(xs)


def build_stacked(
    sys: LinearSystem,
    X: PolytopicSet,
    U: PolytopicSet,
    cost: StageCost,
    x0,
    N: int,
    v=None,
    strictly_causal: bool = False,
) -> StackedProblem:
    """Stack the N-step OCP into the compact (c, C, D, d) form.

    ``v`` optionally gives a known additive disturbance sequence (N, n_x)
    entering the dynamics as x+ = A x + B u + E w + v_k; it is folded into d.
    """
    if N < 1:
        raise ValueError("horizon must be >= 1")
    if X.dim != sys.n_x or U.dim != sys.n_u:
        raise ValueError("constraint set dimensions do not match the system")
    x0 = _as_vector(x0, "x0")
    if x0.shape[0] != sys.n_x:
        raise ValueError("x0 dimension mismatch")
    if v is None:
        v = np.zeros((N, sys.n_x))
    else:
        v = np.asarray(v, dtype=float).reshape(N, sys.n_x)

    n_x, n_u, n_w = sys.n_x, sys.n_u, sys.n_w

    # x_k = A^k x0 + sum_j A^(k-1-j) (B u_j + E w_j + v_j),  k = 1..N
    Apow = [np.eye(n_x)]
    for _ in range(N):
        Apow.append(sys.A @ Apow[-1])

    # Phi_u[k] maps stacked u to x_k, likewise Phi_w; aff[k] is the free term.
    Phi_u = np.zeros((N, n_x, N * n_u))
    Phi_w = np.zeros((N, n_x, N * n_w))
    aff = np.zeros((N, n_x))
    for k in range(1, N + 1):
        aff[k - 1] = Apow[k] @ x0
        for j in range(k):
            Phi_u[k - 1][:, j * n_u : (j + 1) * n_u] = Apow[k - 1 - j] @ sys.B
            Phi_w[k - 1][:, j * n_w : (j + 1) * n_w] = Apow[k - 1 - j] @ sys.E
            aff[k - 1] += Apow[k - 1 - j] @ v[j]

    n_f, n_g = X.n_rows, U.n_rows
    rows = N * (n_f + n_g)
    C = np.zeros((rows, N * n_u))
    D = np.zeros((rows, N * n_w))
    d = np.zeros(rows)
    labels = []
    r = 0
    for k in range(1, N + 1):
        C[r : r + n_f] = X.F @ Phi_u[k - 1]
        D[r : r + n_f] = X.F @ Phi_w[k - 1]
        d[r : r + n_f] = X.f - X.F @ aff[k - 1]
        labels.extend([("state", k, i) for i in range(n_f)])
        r += n_f
    for k in range(N):
        C[r : r + n_g, k * n_u : (k + 1) * n_u] = U.F
        d[r : r + n_g] = U.f
        labels.extend([("input", k, i) for i in range(n_g)])
        r += n_g

    # cost: J(u, 0) = c'u + offset
    q = cost.q if cost.q.size else np.zeros(n_x)
    q_f = cost.q_f if cost.q_f.size else np.zeros(n_x)
    r_vec = cost.r if cost.r.size else np.zeros(n_u)
    c = np.zeros(N * n_u)
    offset = 0.0
    for k in range(1, N + 1):
        qk = q + (q_f if k == N else 0.0)
        c += qk @ Phi_u[k - 1]
        offset += float(qk @ aff[k - 1])
    c += np.tile(r_vec, N)

    return StackedProblem(
        c=c,
        C=C,
        D=D,
        d=d,
        N=N,
        n_u=n_u,
        n_w=n_w,
        causality=causal_mask(N, n_u, strictly_causal=strictly_causal),
        cost_offset=offset,
        row_labels=tuple(labels),
    )
