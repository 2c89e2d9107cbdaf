"""Implicit quantile BART: conditional quantile functions from one tree ensemble."""

from ._iqbart import (
    Error,
    InputError,
    NumericError,
    QuantileModel,
    __version__,
    check_loss,
    crps,
    interval_score,
    kde_critical_bandwidth,
    msis,
    posterior_mean_quantile,
    rearrange,
    sample_quantile,
    simulate,
    true_quantiles,
    wasserstein,
)

__all__ = [
    "Error",
    "InputError",
    "NumericError",
    "QuantileModel",
    "__version__",
    "check_loss",
    "crps",
    "interval_score",
    "kde_critical_bandwidth",
    "msis",
    "posterior_mean_quantile",
    "rearrange",
    "sample_quantile",
    "simulate",
    "true_quantiles",
    "wasserstein",
]
