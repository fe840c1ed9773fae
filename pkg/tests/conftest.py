"""Session-scoped fixtures: the expensive benchmark solves run once."""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from adjrobust.apps import (
    build_reserve,
    build_robustness,
    default_reserve,
    default_robustness,
)
from adjrobust.reformulate import build_synthesis, solve_counterpart
from adjrobust.verify import polytope_volume_2d

TABLE1_TARGETS = {"rectangle": 260.4, "ellipsoid": 514.4, "polytope": 620.2}


def solve_benchmark(family: str):
    """Solve one set-maximization benchmark; returns (spb, fam, sol, secs)."""
    spb, fam, lam = build_robustness(default_robustness(family))
    t0 = time.perf_counter()
    sol = solve_counterpart(build_synthesis(spb, fam, lam))
    return spb, fam, sol, time.perf_counter() - t0


def benchmark_volume(family: str, sol) -> float:
    """Area of the one-step optimal set for each template."""
    Y = sol.Y[0]
    if family == "rectangle":
        return 4.0 * float(Y[0, 0] * Y[1, 1])
    if family == "ellipsoid":
        return math.pi * float(np.linalg.det(Y))
    return polytope_volume_2d(Y.T)


@pytest.fixture(scope="session")
def table1():
    """All three benchmark solves, keyed by family."""
    return {family: solve_benchmark(family) for family in TABLE1_TARGETS}


@pytest.fixture(scope="session")
def reserve24():
    """Full-day reserve synthesis on the surrogate building."""
    rp = default_reserve(N=24)
    spb, fam, lam = build_reserve(rp)
    t0 = time.perf_counter()
    sol = solve_counterpart(build_synthesis(spb, fam, lam))
    return rp, spb, fam, sol, time.perf_counter() - t0
