"""flexclf: classical and flexible control-Lyapunov-function controllers
for constrained discrete-time input-affine plants."""

__version__ = "0.1.0"

from ._kernels import BACKEND, HAVE_NUMBA
from .clf import (
    ConeParams,
    ContractionReport,
    QuadraticCLF,
    default_rho,
    lyapunov_solve,
    synthesize_dare,
    verify_local_contraction,
)
from .controller import (
    ClassicalController,
    ControlDecision,
    EnvelopeSchedule,
    FlexibleController,
    best_effort_step,
    certified_bound,
    default_alpha,
)
from .model import (
    ActuatorParams,
    BuckBoostParams,
    Equilibrium,
    PlantModel,
    actuator,
    buck_boost,
    compute_equilibrium,
    integrator_chain,
)
from .sim import (
    FeasibilityMap,
    GridSpec,
    LatencySummary,
    RunSummary,
    Scenario,
    TrajectoryLog,
    feasibility_map,
    run_closed_loop,
    timing_stats,
)
from .solver import (
    OneStepProblem,
    SolveResult,
    Status,
    grid_oracle,
    min_constraint_over_box,
    solve_one_step,
)

__all__ = [
    "BACKEND",
    "HAVE_NUMBA",
    "ActuatorParams",
    "BuckBoostParams",
    "ClassicalController",
    "ConeParams",
    "ContractionReport",
    "ControlDecision",
    "EnvelopeSchedule",
    "Equilibrium",
    "FeasibilityMap",
    "FlexibleController",
    "GridSpec",
    "LatencySummary",
    "OneStepProblem",
    "PlantModel",
    "QuadraticCLF",
    "RunSummary",
    "Scenario",
    "SolveResult",
    "Status",
    "TrajectoryLog",
    "actuator",
    "best_effort_step",
    "buck_boost",
    "certified_bound",
    "compute_equilibrium",
    "default_alpha",
    "default_rho",
    "feasibility_map",
    "grid_oracle",
    "integrator_chain",
    "lyapunov_solve",
    "min_constraint_over_box",
    "run_closed_loop",
    "solve_one_step",
    "synthesize_dare",
    "timing_stats",
    "verify_local_contraction",
]
