"""Truncated Fourier-series simulation and estimate checks for critical dissipative SQG."""
__version__ = "0.1.0"

from .errors import SQGError
from .spectral import (
    NormReport,
    SpectralField,
    VectorField,
    fractional_laplacian,
    gevrey_apply,
    l2_norm,
    make_field,
    multiplier_apply,
    norm_report,
    random_field,
    semigroup_apply,
    x_norm,
)
from .nonlinear import convolve, convolve_direct, convolve_fast, riesz_velocity, transport_term
from .solver import (
    InitRecipe,
    SolverConfig,
    TimeGrid,
    Trajectory,
    picard_map,
    picard_solve,
    simulate,
)
from .analysis import CheckResult
from .experiments import ExperimentSpec, parse_config, run_experiment
