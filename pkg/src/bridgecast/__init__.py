"""Brownian-bridge diffusion forecaster for multivariate time series.

The reverse chain starts from a linear prior forecast instead of pure noise.
With a zero reverse variance it is deterministic (point forecasts); with a
positive variance it yields sample ensembles.
"""

from .bridge import BridgeModel, BridgeProcess, ForecastResult, corrupt, forward_marginal, reverse_step, sample, training_step
from .errors import (
    BridgecastError,
    DataError,
    DegenerateStep,
    InvalidArgument,
    InvalidState,
    NumericDomainError,
    NumericError,
    VerificationFailure,
)
from .kernels import BACKEND
from .schedule import (
    POINT,
    PROB,
    BridgeSchedule,
    GeneralizedSchedule,
    ReverseCoefficients,
    VariancePolicy,
    beta_hat,
    framework_instance,
    general_reverse_coefficients,
    make_linear_bridge,
    reverse_coefficients,
    sigma2,
)

__version__ = "0.1.0"
