"""Kernel nonnegative garrote: sparse scaling of predictors inside a kernel machine.

The pipeline is: standardize data, build a per-predictor distance stack,
estimate the smoothing parameter of a least-squares kernel machine, walk a
penalized coordinate-descent path over the nonnegative per-predictor scales,
and pick a point on the path by BIC.  Screening, resampling stability
reports, and recovery-condition diagnostics sit around that core.
"""

__version__ = "0.1.0"

from .bench import ExperimentSummary, SimDesign, generate, make_design, run_experiment
from .data import (
    Dataset,
    DistanceStack,
    Standardization,
    build_distance_stack,
    load_dataset,
    standardize_dataset,
)
from .diagnostics import (
    IncoherenceReport,
    kernel_incoherence,
    kkt_residuals,
    lasso_incoherence,
    recovery_bound,
)
from .errors import DataError, GarroteError, NumericalError
from .kernel import (
    KernelMachineFit,
    KernelMatrix,
    concentrated_objective,
    estimate_smoothing,
    fit_kernel_machine,
    kernel_derivative,
    kernel_matrix,
    variance_components,
)
from .path import PathConfig, PathPoint, SolutionPath, coordinate_update, max_penalty, solve_path
from .resampling import ResamplePlan, SelectionReport, bootstrap_select, permutation_select
from .screening import ScreenResult, marginal_screen
from .selection import (
    SelectionCriterion,
    SelectionMetrics,
    score_point,
    select_min_bic,
    selection_metrics,
    window_select,
)

__all__ = [
    "__version__",
    "Dataset",
    "DistanceStack",
    "Standardization",
    "build_distance_stack",
    "load_dataset",
    "standardize_dataset",
    "KernelMatrix",
    "KernelMachineFit",
    "kernel_matrix",
    "kernel_derivative",
    "fit_kernel_machine",
    "variance_components",
    "estimate_smoothing",
    "concentrated_objective",
    "PathConfig",
    "PathPoint",
    "SolutionPath",
    "coordinate_update",
    "max_penalty",
    "solve_path",
    "SelectionCriterion",
    "SelectionMetrics",
    "score_point",
    "select_min_bic",
    "window_select",
    "selection_metrics",
    "ScreenResult",
    "marginal_screen",
    "ResamplePlan",
    "SelectionReport",
    "bootstrap_select",
    "permutation_select",
    "IncoherenceReport",
    "kernel_incoherence",
    "lasso_incoherence",
    "kkt_residuals",
    "recovery_bound",
    "SimDesign",
    "ExperimentSummary",
    "make_design",
    "generate",
    "run_experiment",
    "GarroteError",
    "DataError",
    "NumericalError",
]
