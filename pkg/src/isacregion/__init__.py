"""Rate-exponent regions of Gaussian ISAC with variable-length feedback coding."""

from .channel import (
    BinaryPam,
    ChannelParams,
    Gaussian,
    GaussianMixture,
    SignedChi,
    avg_error_exact,
    chernoff_avg_error,
    detect_state,
    sufficient_statistic,
)
from .errors import AccuracyError, ConvergenceError, DomainError
from .regions import (
    RatePoint,
    RegionCurve,
    Scheme,
    corner_comm,
    corner_sensing,
    sweep_region,
    theorem1_point,
    theorem2_point,
)
from .specfun import QuadratureConfig

__version__ = "0.1.0"
