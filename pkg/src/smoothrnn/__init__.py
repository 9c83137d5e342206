"""Exponentially smoothed recurrent networks for multi-step time-series
forecasting, with a from-scratch reverse-mode gradient engine, classical
diagnostics, synthetic generators, and a variational-Bayes layer."""

from .cells import (
    ARCHITECTURES,
    CellParams,
    CellState,
    forward_sequence,
    half_life,
    init_params,
)
from .diagnostics import acf, adf_test, decompose, pacf
from .errors import (
    DataError,
    SmoothRnnError,
    StateMismatchError,
    TrainingError,
    UsageError,
)
from .forecasting import forecast_direct, forecast_rolling, make_windows, metrics
from .synthetic import generate_alpha_rnn, generate_llm
from .training import TrainConfig, cross_validate, fit

__version__ = "0.1.0"

__all__ = [
    "ARCHITECTURES",
    "CellParams",
    "CellState",
    "TrainConfig",
    "SmoothRnnError",
    "UsageError",
    "DataError",
    "StateMismatchError",
    "TrainingError",
    "acf",
    "adf_test",
    "cross_validate",
    "decompose",
    "fit",
    "forecast_direct",
    "forecast_rolling",
    "forward_sequence",
    "generate_alpha_rnn",
    "generate_llm",
    "half_life",
    "init_params",
    "make_windows",
    "metrics",
    "pacf",
    "__version__",
]
