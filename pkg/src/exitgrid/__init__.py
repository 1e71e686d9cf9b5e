"""exitgrid: solvers, simulation, and numerical certification for
undiscounted exit-time optimal control on grids."""

from .problems import (
    ControlProblem,
    ControlSet,
    TargetSet,
    MalformedProblemError,
    InvariantViolation,
    eval_dynamics,
    eval_lagrangian,
    enumerate_controls,
    sample_problem_invariants,
)
from .grids import Grid, ValueField, interpolate, TARGET, INTERIOR, OUTFLOW, LARGE, OutOfGridError
from .dynamics import (
    BlowupError,
    ControlSignal,
    Trajectory,
    concat,
    constant_signal,
    feedback_signal,
    fuller_closed_loop,
    fuller_feedback,
    fuller_switch_constant,
    integrate,
    piecewise_signal,
    time_signal,
)
from .solvers import (
    EmptyTargetError,
    FastMarchingSolver,
    NonpositiveRHSError,
    NotConvergedError,
    SemiLagrangianSolver,
    SolverParams,
    solve_fast_marching,
    solve_value_iteration,
)
from .verify import (
    ResidualReport,
    check_side_condition,
    hjb_residual,
    pointwise_viscosity_probe,
    trajectory_inequality_check,
)
from .hypotheses import (
    H5Report,
    H6Report,
    barbalat_diagnostic,
    check_h5_sampled,
    check_h6_escape,
)
from . import catalog, io

__version__ = "0.1.0"

__all__ = [
    "ControlProblem",
    "ControlSet",
    "TargetSet",
    "Grid",
    "ValueField",
    "Trajectory",
    "ControlSignal",
    "SolverParams",
    "SemiLagrangianSolver",
    "FastMarchingSolver",
    "ResidualReport",
    "H5Report",
    "H6Report",
    "interpolate",
    "integrate",
    "concat",
    "constant_signal",
    "piecewise_signal",
    "feedback_signal",
    "time_signal",
    "fuller_feedback",
    "fuller_switch_constant",
    "fuller_closed_loop",
    "solve_value_iteration",
    "solve_fast_marching",
    "hjb_residual",
    "check_side_condition",
    "pointwise_viscosity_probe",
    "trajectory_inequality_check",
    "check_h5_sampled",
    "check_h6_escape",
    "barbalat_diagnostic",
    "sample_problem_invariants",
    "eval_dynamics",
    "eval_lagrangian",
    "enumerate_controls",
    "catalog",
    "io",
    "TARGET",
    "INTERIOR",
    "OUTFLOW",
    "LARGE",
    "OutOfGridError",
    "BlowupError",
    "EmptyTargetError",
    "NotConvergedError",
    "NonpositiveRHSError",
    "MalformedProblemError",
    "InvariantViolation",
]
