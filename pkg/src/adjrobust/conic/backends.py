"""Pluggable solver backends and the external file-exchange bridge.

The reference interior-point solver is always registered under the id
``"builtin"``.  Programs whose cones exceed its capability (currently:
anything flagged as needing a semidefinite cone) can be routed to an
external backend registered at runtime.  The exchange format is plain
JSON written to a file and read back, documented in the README.
"""

from __future__ import annotations

import json
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .program import ConicProgram
from .solver import SolveReport, SolverOptions, solve


@dataclass(frozen=True)
class BackendCapability:
    """What cones and objective terms a backend can handle."""

    cones: frozenset = frozenset({"nonneg", "soc", "rsoc"})
    supports_log_objective: bool = True
    supports_sdp: bool = False

    def accepts(self, prog: ConicProgram) -> bool:
        if prog.requires_sdp and not self.supports_sdp:
            return False
        if prog.has_log_objective and not self.supports_log_objective:
            return False
        return set(prog.cone_kinds()) <= set(self.cones)


BUILTIN_CAPABILITY = BackendCapability(
    cones=frozenset({"nonneg", "soc", "rsoc"}),
    supports_log_objective=True,
    supports_sdp=False,
)


def _vector_triplets(v: np.ndarray) -> list:
    """Sparse (index, value) pairs for a dense vector."""
    return [[int(i), float(v[i])] for i in np.nonzero(v)[0]]


def program_to_json(prog: ConicProgram) -> dict:
    """Serialize a program to the documented bridge dictionary.

    Matrices are stored as (row, col, value) triplets so the file stays
    readable and backend-language-neutral.
    """
    Aeq = sp.coo_matrix(prog.Aeq)
    return {
        "schema_version": 1,
        "n": int(prog.n),
        "objective": {
            "linear": _vector_triplets(prog.c),
            "log_weights": _vector_triplets(prog.log_weights),
            "offset": float(prog.offset),
        },
        "equalities": {
            "rows": int(Aeq.shape[0]),
            "triplets": [
                [int(i), int(j), float(v)]
                for i, j, v in zip(Aeq.row, Aeq.col, Aeq.data)
            ],
            "rhs": [float(v) for v in prog.beq],
        },
        "cones": [
            {"start": int(start), "dim": int(cone.dim), "kind": cone.kind}
            for start, cone in prog.cones
        ],
        "requires_sdp": bool(prog.requires_sdp),
        "metadata": dict(prog.metadata),
    }


def report_from_json(doc: dict, prog: ConicProgram) -> SolveReport:
    """Build a SolveReport from a bridge result dictionary."""
    status = str(doc.get("status", "max-iterations"))
    x = np.asarray(doc.get("primal", []), dtype=float)
    if status == "optimal" and x.size != prog.n:
        raise ValueError(
            f"backend returned {x.size} primal values, expected {prog.n}"
        )
    if x.size != prog.n:
        x = np.full(prog.n, np.nan)
    return SolveReport(
        status=status,
        x=x,
        y=np.zeros(len(prog.beq)),
        z=np.zeros(prog.n),
        objective=prog.objective_value(x) if status == "optimal" else np.nan,
        primal_residual=float(doc.get("primal_residual", np.nan)),
        dual_residual=float(doc.get("dual_residual", np.nan)),
        gap=float(doc.get("gap", np.nan)),
        iterations=int(doc.get("iterations", 0)),
        wall_time=float(doc.get("wall_time", 0.0)),
        message=str(doc.get("message", "")),
        var_map=prog.var_map,
    )


class FileBridge:
    """Run an external solver process over a JSON file exchange.

    The handle is either a callable ``f(problem_dict) -> result_dict``
    (useful in-process, e.g. for tests) or an argv list; in the latter
    case the command is invoked as ``argv + [in_path, out_path]``.
    """

    def __init__(self, handle, timeout: float = 300.0):
        self.handle = handle
        self.timeout = timeout

    def solve(self, prog: ConicProgram) -> SolveReport:
        doc = program_to_json(prog)
        start = time.perf_counter()
        if callable(self.handle):
            result = self.handle(doc)
        else:
            with tempfile.TemporaryDirectory() as tmp:
                in_path = Path(tmp) / "problem.json"
                out_path = Path(tmp) / "result.json"
                in_path.write_text(json.dumps(doc, sort_keys=True))
                subprocess.run(
                    list(self.handle) + [str(in_path), str(out_path)],
                    check=True,
                    timeout=self.timeout,
                )
                result = json.loads(out_path.read_text())
        report = report_from_json(result, prog)
        if report.wall_time == 0.0:
            object.__setattr__(report, "wall_time", time.perf_counter() - start)
        return report


@dataclass
class _Registry:
    backends: dict = field(default_factory=dict)

    def register(self, backend_id: str, cap: BackendCapability, handle) -> str:
        if backend_id in self.backends:
            raise ValueError(f"duplicate backend id {backend_id!r}")
        self.backends[backend_id] = (cap, handle)
        return backend_id

    def capability(self, backend_id: str) -> BackendCapability:
        return self.backends[backend_id][0]


_REGISTRY = _Registry()
_REGISTRY.backends["builtin"] = (BUILTIN_CAPABILITY, None)


def register_backend(backend_id: str, cap: BackendCapability, handle) -> str:
    """Register an external backend; returns its id.

    The handle is passed to :class:`FileBridge` unless it already is one.
    """
    bridge = handle if isinstance(handle, FileBridge) else FileBridge(handle)
    return _REGISTRY.register(backend_id, cap, bridge)


def unregister_backend(backend_id: str) -> None:
    if backend_id == "builtin":
        raise ValueError("the builtin backend cannot be removed")
    _REGISTRY.backends.pop(backend_id, None)


def available_backends() -> dict:
    """Map of backend id to its capability flags."""
    return {name: cap for name, (cap, _) in _REGISTRY.backends.items()}


def solve_routed(
    prog: ConicProgram,
    backend: str = "builtin",
    opts: SolverOptions | None = None,
) -> SolveReport:
    """Solve with the named backend, refusing unsupported cones.

    With the builtin backend, a program flagged as needing a semidefinite
    cone yields status ``unsupported-cone`` rather than an exception so
    callers can surface the routing advice uniformly.
    """
    if backend not in _REGISTRY.backends:
        raise KeyError(f"unknown backend {backend!r}")
    cap, bridge = _REGISTRY.backends[backend]
    if backend == "builtin":
        return solve(prog, opts)
    if not cap.accepts(prog):
        return solve(prog, opts) if BUILTIN_CAPABILITY.accepts(prog) else _refuse(prog)
    return bridge.solve(prog)


def _refuse(prog: ConicProgram) -> SolveReport:
    return SolveReport(
        status="unsupported-cone",
        x=np.full(prog.n, np.nan),
        y=np.zeros(len(prog.beq)),
        z=np.zeros(prog.n),
        objective=np.nan,
        primal_residual=np.nan,
        dual_residual=np.nan,
        gap=np.nan,
        iterations=0,
        wall_time=0.0,
        message="program needs a semidefinite cone; register a capable backend",
        var_map=prog.var_map,
    )
