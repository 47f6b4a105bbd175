"""Discovery and inversion of 1D (visco)elastic wave equations from sparse,
noisy, low-resolution wavefield measurements.

Sparse regression over a 60-term candidate dictionary proposes the governing
equation; a differentiable finite-difference recurrence with hand-embedded
boundary conditions then optimizes the coefficient fields against the
measurements by discrete-adjoint gradients (Adam followed by L-BFGS), and the
two phases alternate.
"""

__version__ = "0.1.0"

from .core import (
    BoundarySpec,
    Dirichlet,
    Grid1D,
    MediumSpec,
    Mtf,
    Neumann,
    SourceSpec,
    cfl_margin,
    ricker_profile,
)
from .embedding import DiscoveredEquation, OptimizerConfig, filter_terms, gradient, loss, optimize, rollout
from .library import TERMS, RegressionProblem, TermDescriptor, build_system, enumerate_terms
from .pipeline import ExperimentConfig, Report, emit_report, load_config, run_case
from .regression import SparseSolution, pareto_gamma, ridge, stridge
from .sampling import MeasurementSet, add_noise, downsample, rel_l2
from .simulator import SimConfig, SimulationDiverged, simulate

__all__ = [
    "__version__",
    "BoundarySpec",
    "Dirichlet",
    "Grid1D",
    "MediumSpec",
    "Mtf",
    "Neumann",
    "SourceSpec",
    "cfl_margin",
    "ricker_profile",
    "DiscoveredEquation",
    "OptimizerConfig",
    "filter_terms",
    "gradient",
    "loss",
    "optimize",
    "rollout",
    "TERMS",
    "RegressionProblem",
    "TermDescriptor",
    "build_system",
    "enumerate_terms",
    "ExperimentConfig",
    "Report",
    "emit_report",
    "load_config",
    "run_case",
    "SparseSolution",
    "pareto_gamma",
    "ridge",
    "stridge",
    "MeasurementSet",
    "add_noise",
    "downsample",
    "rel_l2",
    "SimConfig",
    "SimulationDiverged",
    "simulate",
]
