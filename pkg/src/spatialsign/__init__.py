"""Scalar-invariant spatial-sign test for high-dimensional one-sample location problems."""

from .errors import (
    DegenerateColumnError,
    InsufficientSampleError,
    InvalidInputError,
    InvalidParameterError,
    NumericalFailureError,
    SpatialSignError,
)
from .signcore import (
    DataMatrix,
    EstimationConfig,
    HrFit,
    TestOutcome,
    hr_estimate,
    r_n_statistic,
    spatial_sign,
    ss_test,
    trace_r2_hat,
)

__version__ = "0.1.0"

__all__ = [
    "DataMatrix",
    "DegenerateColumnError",
    "EstimationConfig",
    "HrFit",
    "InsufficientSampleError",
    "InvalidInputError",
    "InvalidParameterError",
    "NumericalFailureError",
    "SpatialSignError",
    "TestOutcome",
    "hr_estimate",
    "r_n_statistic",
    "spatial_sign",
    "ss_test",
    "trace_r2_hat",
]
