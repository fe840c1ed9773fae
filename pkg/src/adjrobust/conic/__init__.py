"""Conic-program IR, reference interior-point solver, and backends."""

from .program import ConicProgram, ProgramBuilder
from .solver import KKTResiduals, SolveReport, SolverOptions, check_kkt, solve
