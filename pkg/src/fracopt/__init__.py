"""Nonsmooth fractional-order optimal control toolkit.

Forward mild-solution marching for Caputo-type Volterra dynamics with
piecewise-linear (or smooth) activations, exact directional sensitivities,
the transpose adjoint of the discrete scheme, a smoothing homotopy optimizer
over H1 controls with nodal box constraints, and first-order stationarity
audits of candidate optima.
"""

from .activation import Activation, MollifiedActivation, bump, bump_cdf
from .adjoint import (
    AdjointPair,
    Defect,
    adjoint_residual,
    lr_norm,
    multiplier_pairing,
    solve_adjoint_smoothed,
)
from .control_space import (
    BoxConstraint,
    ControlPair,
    cone_directions,
    h1_inner,
    h1_norm,
    pairing_density,
    project_box,
    riesz_lift,
)
from .errors import (
    ConfigError,
    ContractionFailure,
    FracoptError,
    LineSearchFailure,
    MittagLefflerRangeError,
    NonFiniteError,
    ProjectionFailure,
)
from .frac_kernel import (
    GridFunction,
    TimeGrid,
    diagnostic_exponent,
    left_frac_integral,
    mittag_leffler,
    operator_norm_bound,
    right_frac_integral,
)
from .optimizer import (
    HomotopyConfig,
    HomotopyResult,
    StageRecord,
    TerminalCost,
    default_start,
    quadratic_tracking,
    reduced_gradient,
    reduced_objective,
    run_homotopy,
    solve_stage,
)
from .sensitivity import smoothed_sensitivity, solve_sensitivity
from .state_solver import (
    compatibility_check,
    difference_quotient_diagnostic,
    lipschitz_probe,
    nodal_arguments,
    solve_state,
)
from .stationarity import (
    BStationarityResult,
    CqResult,
    GradientSystemResult,
    InclusionResult,
    StationarityReport,
    Tolerances,
    assemble_report,
    check_b_stationarity,
    check_cq,
    check_gradient_system,
    check_inclusion,
    directional_stationarity_value,
)

__version__ = "0.1.0"

__all__ = [
    "Activation",
    "AdjointPair",
    "BStationarityResult",
    "BoxConstraint",
    "ConfigError",
    "ContractionFailure",
    "ControlPair",
    "CqResult",
    "Defect",
    "FracoptError",
    "GradientSystemResult",
    "GridFunction",
    "HomotopyConfig",
    "HomotopyResult",
    "InclusionResult",
    "LineSearchFailure",
    "MittagLefflerRangeError",
    "MollifiedActivation",
    "NonFiniteError",
    "ProjectionFailure",
    "StageRecord",
    "StationarityReport",
    "TerminalCost",
    "TimeGrid",
    "Tolerances",
    "adjoint_residual",
    "assemble_report",
    "bump",
    "bump_cdf",
    "check_b_stationarity",
    "check_cq",
    "check_gradient_system",
    "check_inclusion",
    "compatibility_check",
    "cone_directions",
    "default_start",
    "diagnostic_exponent",
    "difference_quotient_diagnostic",
    "directional_stationarity_value",
    "h1_inner",
    "h1_norm",
    "left_frac_integral",
    "lipschitz_probe",
    "lr_norm",
    "mittag_leffler",
    "multiplier_pairing",
    "nodal_arguments",
    "operator_norm_bound",
    "pairing_density",
    "project_box",
    "quadratic_tracking",
    "reduced_gradient",
    "reduced_objective",
    "riesz_lift",
    "right_frac_integral",
    "run_homotopy",
    "smoothed_sensitivity",
    "solve_adjoint_smoothed",
    "solve_sensitivity",
    "solve_stage",
    "solve_state",
    "__version__",
]
