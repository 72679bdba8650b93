"""Prediction intervals for local linear regression."""

from ._bopi import (
    DataError,
    Model,
    coverage,
    egsd,
    friedman,
    min_gamma_floor,
    ols_intervals,
    paired_t_test,
    prediction_factor,
    select_bandwidth,
    simulate,
    tolerance_factor,
    tolerance_prediction_ratio,
    wilson_critical,
)

__all__ = [
    "DataError",
    "Model",
    "coverage",
    "egsd",
    "friedman",
    "min_gamma_floor",
    "ols_intervals",
    "paired_t_test",
    "prediction_factor",
    "select_bandwidth",
    "simulate",
    "tolerance_factor",
    "tolerance_prediction_ratio",
    "wilson_critical",
]
