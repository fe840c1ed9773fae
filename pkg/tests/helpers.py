"""Shared construction helpers for the test suite.

Random instances are built so that the robust counterpart is feasible by
construction (x0 = 0 interior to box constraints, nonzero disturbance
channel so the set size stays bounded).
"""

from __future__ import annotations

import numpy as np

from adjrobust.model import (
    LinearSystem,
    PolytopicSet,
    StackedProblem,
    StageCost,
    build_stacked,
    causal_mask,
)
from adjrobust.uncertainty import make_rectangle


def random_stable_system(
    rng: np.random.Generator, n_x: int, n_u: int, n_w: int, rho: float = 0.9
) -> LinearSystem:
    """Random system with spectral radius of A scaled to rho."""
    A = rng.normal(size=(n_x, n_x))
    radius = max(abs(np.linalg.eigvals(A)))
    if radius > 1e-9:
        A *= rho / radius
    B = rng.normal(size=(n_x, n_u))
    # keep the disturbance channel bounded away from zero so growing the
    # uncertainty set always tightens some constraint (bounded size)
    E = rng.uniform(0.5, 1.5, size=(n_x, n_w)) * rng.choice(
        (-1.0, 1.0), size=(n_x, n_w)
    )
    return LinearSystem(A, B, E)


def random_box_instance(rng: np.random.Generator, N: int | None = None):
    """Random synthesis instance with a 1-D box primitive.

    Returns (spb, fam, lam) sized for the enumeration oracle: N <= 3 and
    n_w = 1, so at most 2^3 = 8 scenarios.
    """
    N = int(rng.integers(1, 4)) if N is None else N
    n_x = int(rng.integers(1, 3))
    sys = random_stable_system(rng, n_x, 1, 1)
    X = PolytopicSet.box(-rng.uniform(1.0, 3.0, n_x), rng.uniform(1.0, 3.0, n_x))
    U = PolytopicSet.box([-rng.uniform(1.0, 4.0)], [rng.uniform(1.0, 4.0)])
    cost = StageCost.input_only(rng.uniform(-1.0, 1.0, 1))
    spb = build_stacked(sys, X, U, cost, np.zeros(n_x), N)
    fam = make_rectangle(1, weights=[1.0])
    lam = float(rng.uniform(0.1, 1.5))
    return spb, fam, lam


def analysis_problem(D: np.ndarray, d: np.ndarray, n_w: int) -> StackedProblem:
    """Input-free stacked problem (C = 0) with one stage, for analysis."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    d = np.asarray(d, dtype=float).ravel()
    return StackedProblem(
        c=np.zeros(1),
        C=np.zeros((D.shape[0], 1)),
        D=D,
        d=d,
        N=1,
        n_u=1,
        n_w=n_w,
        causality=causal_mask(1, 1),
    )


def random_cone_point(rng: np.random.Generator, kind: str, dim: int) -> np.ndarray:
    """Random member of the named self-dual cone."""
    if kind == "nonneg":
        return np.abs(rng.normal(size=dim))
    if kind == "soc":
        x = rng.normal(size=dim)
        x[0] = np.linalg.norm(x[1:]) * rng.uniform(1.0, 2.0)
        return x
    # rsoc: 2 u v >= ||z||^2
    u, v = np.abs(rng.normal(size=2)) + 1e-3
    z = rng.normal(size=dim - 2)
    norm = np.linalg.norm(z)
    if norm > 0:
        z *= np.sqrt(2.0 * u * v) * rng.uniform(0.0, 1.0) / norm
    return np.concatenate([[u, v], z])


def benchmark_problem_doc(family: str = "rectangle", **fam_extra) -> dict:
    """Explicit problem-file dictionary for the 2-state benchmark."""
    fam_doc = {"template": family}
    fam_doc.update(fam_extra)
    return {
        "schema_version": 1,
        "system": {
            "A": [[1.0, 0.0], [0.0, 1.0]],
            "B": [[1.0], [0.7]],
            "E": [[-1.0, 0.0], [0.0, -1.0]],
        },
        "constraints": {
            "F_x": [
                [1, 0], [-1, 0], [0, 1], [0, -1],
                [-1, 1], [1, -1], [1, 1], [-1, -1],
            ],
            "f_x": [10, 10, 10, 10, 15, 15, 15, 15],
            "F_u": [[1.0], [-1.0]],
            "f_u": [5.0, 5.0],
        },
        "horizon": 1,
        "x0": [0.0, 0.0],
        "family": fam_doc,
        "lambda": 1.0,
    }
