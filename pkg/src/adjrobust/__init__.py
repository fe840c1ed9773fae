"""Robust finite-horizon optimal control with adjustable uncertainty sets.

Model a constrained linear system whose disturbance set is itself a
decision variable, reformulate the robust problem into a single conic
program over a chosen set family, solve it with the bundled interior
point method (or a registered external backend), recover an
implementable disturbance-feedback policy, and certify the result
against an exact enumeration oracle.
"""

__version__ = "0.1.0"

from .model import (
    LinearSystem,
    PolytopicSet,
    StackedProblem,
    StageCost,
    build_stacked,
    causal_mask,
    simulate,
)
from .policy import (
    AffinePolicy,
    LiftingOperator,
    RecoveredPolicy,
    evaluate_recovered,
    policy_from_json,
    policy_to_json,
    recover,
)
from .reformulate import (
    AnalysisCounterpart,
    ShapedSolution,
    SynthesisCounterpart,
    build_analysis,
    build_synthesis,
    fix_inputs,
    lower_to_conic,
    solve_counterpart,
)
from .uncertainty import (
    Cone,
    PrimitiveSet,
    ShapingStructure,
    SizeObjective,
    UncertaintyFamily,
    circle_anchors,
    evaluate_objective,
    make_ball,
    make_ellipsoid,
    make_polytope,
    make_rectangle,
)
from .verify import (
    FeasibilityReport,
    VertexOracleResult,
    certify_feasibility,
    exact_solve_enumeration,
    polytope_volume_2d,
    suboptimality_gap,
)

__all__ = [
    "__version__",
    "AffinePolicy",
    "AnalysisCounterpart",
    "Cone",
    "FeasibilityReport",
    "LiftingOperator",
    "LinearSystem",
    "PolytopicSet",
    "PrimitiveSet",
    "RecoveredPolicy",
    "ShapedSolution",
    "ShapingStructure",
    "SizeObjective",
    "StackedProblem",
    "StageCost",
    "SynthesisCounterpart",
    "UncertaintyFamily",
    "VertexOracleResult",
    "build_analysis",
    "build_stacked",
    "build_synthesis",
    "causal_mask",
    "certify_feasibility",
    "circle_anchors",
    "evaluate_objective",
    "evaluate_recovered",
    "exact_solve_enumeration",
    "fix_inputs",
    "lower_to_conic",
    "make_ball",
    "make_ellipsoid",
    "make_polytope",
    "make_rectangle",
    "policy_from_json",
    "policy_to_json",
    "polytope_volume_2d",
    "recover",
    "simulate",
    "solve_counterpart",
    "suboptimality_gap",
]
