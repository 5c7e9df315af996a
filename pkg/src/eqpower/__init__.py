"""Wiener-filter estimation MSE and power allocation for sampled WSS processes."""

from .acf import (
    AcfModel,
    BandlimitedSinc,
    Exponential,
    Jakes,
    SamplingGrid,
    Tabulated,
    acf_sequence,
    eval_acf,
    nyquist_rate,
)
from .errors import (
    ConstraintViolationError,
    DiagnosticFailure,
    InfeasibleConstraintsError,
    NonPositiveEigenvalueError,
    NumericalError,
    PositiveDefinitenessError,
)
from .estimation import (
    EstimationProblem,
    MseReport,
    check_allocation,
    equal_allocation,
    error_covariance,
    mse,
    mse_equiv,
)
from .optimizer import OptimizationResult, OptimizerConfig, convergence_gap, mse_gradient, optimize

__version__ = "0.1.0"
