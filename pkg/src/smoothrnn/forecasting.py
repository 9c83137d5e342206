"""Window construction, train-moment normalization, direct and rolling
multi-step forecasts, and error metrics.

The window at position t pairs the lagged rows t-p+1..t with the target at
row t+m. Splits are contiguous in time (train, then validation, then test)
and normalization moments come from the training rows only, so nothing in a
model input or scale can postdate the quantity being predicted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cells import CellParams, forward_batch
from .errors import DataError, UsageError

__all__ = [
    "WindowedDataset",
    "ForecastResult",
    "make_windows",
    "forecast_direct",
    "forecast_rolling",
    "persistence_forecast",
    "metrics",
]


@dataclass
class WindowedDataset:
    """Supervised (window, target) pairs plus everything needed to undo the
    normalization and to roll forecasts forward."""

    inputs: np.ndarray  # (N_w, p, d), normalized
    targets: np.ndarray  # (N_w,), normalized
    target_rows: np.ndarray  # (N_w,) absolute row index of each target
    n_train: int
    n_val: int
    p: int
    m: int
    feature_mean: np.ndarray  # (d,)
    feature_std: np.ndarray  # (d,)
    target_mean: float
    target_std: float
    series: np.ndarray  # raw (N, d)
    raw_targets: np.ndarray  # raw (N,)
    normalized_series: np.ndarray  # (N, d)
    endogenous: bool
    train_rows: int
    val_rows: int

    @property
    def n_test(self) -> int:
        return len(self.targets) - self.n_train - self.n_val

    @property
    def input_size(self) -> int:
        return self.inputs.shape[2]

    def denormalize_target(self, z: np.ndarray) -> np.ndarray:
        return z * self.target_std + self.target_mean

    def normalize_target(self, y: np.ndarray) -> np.ndarray:
        return (y - self.target_mean) / self.target_std

    def test_slice(self) -> slice:
        return slice(self.n_train + self.n_val, len(self.targets))


@dataclass
class ForecastResult:
    """Point forecasts against observations, in original units."""

    target_rows: np.ndarray
    predictions: np.ndarray
    observed: np.ndarray
    errors: np.ndarray
    steps: np.ndarray  # position within a rolling block, 1..m (all 1 for direct)
    mode: str

    @property
    def mse(self) -> float:
        return float(np.mean(self.errors**2))

    @property
    def mae(self) -> float:
        return float(np.mean(np.abs(self.errors)))

    @property
    def rmse(self) -> float:
        return float(np.sqrt(self.mse))


def make_windows(
    series,
    targets,
    p: int,
    m: int,
    splits: tuple[float, float] = (0.7, 0.15),
) -> WindowedDataset:
    """Build the supervised dataset.

    ``series`` is (N, d) feature rows (or (N,) for a single feature),
    ``targets`` the N target scalars. ``splits`` gives the train and
    validation fractions of the N rows; the rest is test. Windows are
    assigned to a block by the row of their target.
    """
    series = np.asarray(series, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    if series.ndim == 1:
        series = series[:, None]
    n_rows = series.shape[0]
    if targets.shape[0] != n_rows:
        raise UsageError("series and targets must have the same number of rows")
    if p < 1 or m < 1:
        raise UsageError("p and m must be >= 1")
    if n_rows < p + m:
        raise UsageError(f"need at least p + m = {p + m} rows, got {n_rows}")
    train_frac, val_frac = splits
    if train_frac <= 0 or val_frac < 0 or train_frac + val_frac > 1.0 + 1e-12:
        raise UsageError("split fractions must be positive and sum to at most 1")

    train_rows = int(round(n_rows * train_frac))
    val_rows = int(round(n_rows * val_frac))
    train_rows = min(max(train_rows, p + m), n_rows)

    feature_mean = series[:train_rows].mean(axis=0)
    feature_std = series[:train_rows].std(axis=0)
    if np.any(feature_std == 0.0):
        bad = int(np.flatnonzero(feature_std == 0.0)[0])
        raise DataError(f"feature column {bad} is constant on the training rows")
    target_mean = float(targets[:train_rows].mean())
    target_std = float(targets[:train_rows].std())
    if target_std == 0.0:
        raise DataError("target column is constant on the training rows")

    z_series = (series - feature_mean) / feature_std
    z_targets = (targets - target_mean) / target_std

    ends = np.arange(p - 1, n_rows - m)  # window end rows t
    target_rows = ends + m
    n_windows = len(ends)
    d = series.shape[1]
    inputs = np.empty((n_windows, p, d))
    for j, t in enumerate(ends):
        inputs[j] = z_series[t - p + 1 : t + 1]
    window_targets = z_targets[target_rows]

    n_train = int(np.sum(target_rows < train_rows))
    n_val = int(np.sum((target_rows >= train_rows) & (target_rows < train_rows + val_rows)))

    endogenous = d == 1 and np.array_equal(series[:, 0], targets)
    return WindowedDataset(
        inputs=inputs,
        targets=window_targets,
        target_rows=target_rows,
        n_train=n_train,
        n_val=n_val,
        p=p,
        m=m,
        feature_mean=feature_mean,
        feature_std=feature_std,
        target_mean=target_mean,
        target_std=target_std,
        series=series,
        raw_targets=targets,
        normalized_series=z_series,
        endogenous=endogenous,
        train_rows=train_rows,
        val_rows=val_rows,
    )


def _check_model_data(model: CellParams, data: WindowedDataset) -> None:
    if model.p != data.p:
        raise UsageError(f"model sequence length p={model.p} != dataset p={data.p}")
    if model.input_size != data.input_size:
        raise UsageError(
            f"model input size {model.input_size} != dataset feature count {data.input_size}"
        )


def forecast_direct(model: CellParams, data: WindowedDataset) -> ForecastResult:
    """One forward pass per test window; predictions are de-normalized."""
    _check_model_data(model, data)
    if model.m != data.m:
        raise UsageError(f"model trained for horizon m={model.m}, dataset has m={data.m}")
    sl = data.test_slice()
    windows = data.inputs[sl]
    if windows.shape[0] == 0:
        raise UsageError("dataset has no test windows")
    xs = [np.ascontiguousarray(windows[:, s, :].T) for s in range(data.p)]
    z_pred = forward_batch(model, xs).reshape(-1)
    predictions = data.denormalize_target(z_pred)
    rows = data.target_rows[sl]
    observed = data.raw_targets[rows]
    return ForecastResult(
        target_rows=rows,
        predictions=predictions,
        observed=observed,
        errors=predictions - observed,
        steps=np.ones(len(rows), dtype=int),
        mode="direct",
    )


def forecast_rolling(model: CellParams, data: WindowedDataset, m: int) -> ForecastResult:
    """Iterate one-step forecasts out to horizon m, feeding each prediction
    back as the newest lag; the input is reset with observed data every m
    steps. Requires a one-step-ahead model on an endogenous series."""
    _check_model_data(model, data)
    if model.m != 1 or data.m != 1:
        raise UsageError("rolling forecasts need a one-step-ahead model and dataset (m=1)")
    if m < 1:
        raise UsageError("rolling horizon must be >= 1")
    if not data.endogenous:
        raise UsageError(
            "rolling forecasts need an endogenous series: exogenous features have no future values"
        )
    if m == 1:
        # degenerate case: every step starts from observed data, which is
        # exactly one direct pass per window (bit-identical by construction)
        direct = forecast_direct(model, data)
        direct.mode = "rolling"
        return direct
    sl = data.test_slice()
    rows = data.target_rows[sl]
    if len(rows) == 0:
        raise UsageError("dataset has no test windows")
    z = data.normalized_series[:, 0]
    p = data.p
    predictions = np.empty(len(rows))
    steps = np.empty(len(rows), dtype=int)
    for block_start in range(0, len(rows), m):
        first_row = rows[block_start]
        buffer = z[first_row - p : first_row].copy()
        for k in range(min(m, len(rows) - block_start)):
            xs = [buffer[s].reshape(1, 1) for s in range(p)]
            z_hat = float(forward_batch(model, xs).reshape(()))
            predictions[block_start + k] = z_hat
            steps[block_start + k] = k + 1
            buffer = np.append(buffer[1:], z_hat)
    predictions = data.denormalize_target(predictions)
    observed = data.raw_targets[rows]
    return ForecastResult(
        target_rows=rows,
        predictions=predictions,
        observed=observed,
        errors=predictions - observed,
        steps=steps,
        mode="rolling",
    )


def persistence_forecast(data: WindowedDataset) -> ForecastResult:
    """Naive last-value baseline: predict the final lag of each test window."""
    sl = data.test_slice()
    rows = data.target_rows[sl]
    last_rows = rows - data.m
    predictions = data.raw_targets[last_rows]
    observed = data.raw_targets[rows]
    return ForecastResult(
        target_rows=rows,
        predictions=predictions,
        observed=observed,
        errors=predictions - observed,
        steps=np.ones(len(rows), dtype=int),
        mode="persistence",
    )


def metrics(result: ForecastResult) -> tuple[float, float, float]:
    """(MSE, MAE, RMSE) on de-normalized values."""
    if len(result.errors) == 0:
        raise UsageError("empty forecast result")
    return result.mse, result.mae, result.rmse
