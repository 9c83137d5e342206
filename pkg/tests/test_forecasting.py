import numpy as np
import pytest

from smoothrnn import cells
from smoothrnn.errors import DataError, UsageError
from smoothrnn.forecasting import (
    ForecastResult,
    forecast_direct,
    forecast_rolling,
    make_windows,
    metrics,
    persistence_forecast,
)
from smoothrnn.initializers import make_rng
from smoothrnn.training import TrainConfig, fit


def _ar1_series(n, phi=0.8, noise=0.1, seed=0, mean=0.0):
    rng = make_rng(seed)
    y = np.zeros(n)
    for t in range(1, n):
        y[t] = mean + phi * (y[t - 1] - mean) + rng.normal(0.0, noise)
    return y


# -- window construction --------------------------------------------------------


def test_window_count_small_case():
    data = make_windows(np.arange(5.0), np.arange(5.0) + 0.1 * make_rng(0).standard_normal(5),
                        p=2, m=1, splits=(0.6, 0.2))
    assert len(data.targets) == 3  # N - p - m + 1


def test_one_lag_supervised_pairs():
    y = _ar1_series(30)
    data = make_windows(y, y, p=1, m=1, splits=(0.7, 0.1))
    assert len(data.targets) == 29
    # each window is exactly the previous observation
    np.testing.assert_allclose(
        data.inputs[:, 0, 0] * data.feature_std[0] + data.feature_mean[0], y[:-1], atol=1e-12
    )


def test_normalization_on_training_rows_only():
    y = _ar1_series(200, seed=1)
    data = make_windows(y, y, p=3, m=2, splits=(0.5, 0.25))
    train_block = data.normalized_series[: data.train_rows, 0]
    assert abs(train_block.mean()) < 1e-12
    assert abs(train_block.std() - 1.0) < 1e-12
    # moments computed from the training rows alone
    assert data.feature_mean[0] == pytest.approx(y[: data.train_rows].mean())


def test_denormalize_round_trip():
    y = _ar1_series(100, seed=2)
    data = make_windows(y, y, p=2, m=1, splits=(0.7, 0.15))
    z = data.normalize_target(y)
    np.testing.assert_allclose(data.denormalize_target(z), y, atol=1e-12)


def test_no_window_input_postdates_target():
    y = _ar1_series(60, seed=3)
    data = make_windows(y, y, p=4, m=3, splits=(0.6, 0.2))
    for j, target_row in enumerate(data.target_rows):
        last_input_row = target_row - data.m
        assert last_input_row < target_row
        raw_window = data.inputs[j, :, 0] * data.feature_std[0] + data.feature_mean[0]
        np.testing.assert_allclose(
            raw_window, y[last_input_row - data.p + 1 : last_input_row + 1], atol=1e-10
        )


def test_make_windows_too_small():
    with pytest.raises(UsageError):
        make_windows(np.arange(4.0), np.arange(4.0), p=3, m=2, splits=(0.5, 0.25))


def test_make_windows_bad_fractions():
    y = _ar1_series(50)
    with pytest.raises(UsageError):
        make_windows(y, y, p=2, m=1, splits=(0.8, 0.4))


def test_constant_column_is_data_error():
    y = np.ones(50)
    with pytest.raises(DataError):
        make_windows(y, y, p=2, m=1, splits=(0.7, 0.15))


# -- metrics ----------------------------------------------------------------------


def _result_from_errors(errors):
    errors = np.asarray(errors, dtype=np.float64)
    observed = np.zeros_like(errors)
    return ForecastResult(
        target_rows=np.arange(len(errors)),
        predictions=errors,
        observed=observed,
        errors=errors,
        steps=np.ones(len(errors), dtype=int),
        mode="direct",
    )


def test_metrics_zero_errors():
    assert metrics(_result_from_errors([0.0, 0.0])) == (0.0, 0.0, 0.0)


def test_metrics_hand_values():
    mse, mae, rmse = metrics(_result_from_errors([3.0, -4.0]))
    assert mse == pytest.approx(12.5)
    assert mae == pytest.approx(3.5)
    assert rmse == pytest.approx(np.sqrt(12.5))


def test_metrics_rmse_squared_is_mse():
    rng = make_rng(4)
    mse, _, rmse = metrics(_result_from_errors(rng.standard_normal(37)))
    assert rmse**2 == pytest.approx(mse, rel=1e-12)


def test_metrics_empty_is_error():
    with pytest.raises(UsageError):
        metrics(_result_from_errors([]))


# -- forecast procedures ------------------------------------------------------------


def _ar1_cell(phi: float) -> cells.CellParams:
    """Exact linear AR(1) model in normalized coordinates."""
    cell = cells.init_params("rnn", 1, 1, 1, 1, activation="identity")
    cell.W_h[:] = phi
    cell.U_h[:] = 0.0
    cell.b_h[:] = 0.0
    cell.W_y[:] = 1.0
    cell.b_y[:] = 0.0
    return cell


def test_rolling_m1_equals_direct_exactly():
    y = _ar1_series(300, seed=5)
    data = make_windows(y, y, p=2, m=1, splits=(0.6, 0.2))
    cell = cells.init_params("alpha_rnn", 1, 3, 1, 2, seed=6)
    direct = forecast_direct(cell, data)
    rolling = forecast_rolling(cell, data, m=1)
    np.testing.assert_array_equal(direct.predictions, rolling.predictions)
    np.testing.assert_array_equal(direct.observed, rolling.observed)


def test_rolling_ar1_matches_closed_form():
    phi = 0.8
    y = _ar1_series(400, phi=phi, seed=7, mean=3.0)
    data = make_windows(y, y, p=1, m=1, splits=(0.7, 0.1))
    cell = _ar1_cell(phi)
    m = 5
    result = forecast_rolling(cell, data, m=m)
    # closed-form oracle: z_hat_{t+k} = phi^k z_t in normalized space
    z = data.normalized_series[:, 0]
    for i, row in enumerate(result.target_rows):
        k = result.steps[i]
        anchor = row - k  # last observed row of this block
        expected = data.denormalize_target(phi**k * z[anchor])
        assert result.predictions[i] == pytest.approx(expected, abs=1e-10)


def test_direct_horizon_mismatch_is_usage_error():
    y = _ar1_series(200, seed=8)
    data = make_windows(y, y, p=2, m=3, splits=(0.7, 0.15))
    cell = cells.init_params("rnn", 1, 2, 1, 2, seed=8)  # trained for m=1
    with pytest.raises(UsageError):
        forecast_direct(cell, data)


def test_rolling_requires_one_step_model():
    y = _ar1_series(200, seed=9)
    data = make_windows(y, y, p=2, m=1, splits=(0.7, 0.15))
    cell = cells.init_params("rnn", 1, 2, 1, 2, m=5, seed=9)
    with pytest.raises(UsageError):
        forecast_rolling(cell, data, m=5)


def test_rolling_rejects_exogenous_features():
    rng = make_rng(10)
    y = _ar1_series(150, seed=10)
    exog = np.column_stack([y, rng.standard_normal(150)])
    data = make_windows(exog, y, p=2, m=1, splits=(0.7, 0.15))
    cell = cells.init_params("rnn", 2, 2, 1, 2, seed=10)
    with pytest.raises(UsageError):
        forecast_rolling(cell, data, m=3)


def test_direct_seasonal_beats_persistence_smoke():
    """Ten-step direct forecast on seasonal data must beat the naive
    last-value forecast."""
    rng = make_rng(11)
    n, period, m = 1200, 24, 10
    t = np.arange(n)
    y = 10.0 * np.sin(2 * np.pi * t / period) + rng.normal(0.0, 0.5, n)
    data = make_windows(y, y, p=24, m=m, splits=(0.7, 0.1))
    cell = cells.init_params("alpha_t_rnn", 1, 6, 1, 24, m=m, seed=11)
    cfg = TrainConfig(max_epochs=150, batch_size=1000, learning_rate=5e-3,
                      patience=50, min_delta=1e-8, seed=11)
    fit(cell, data, cfg)
    model_result = forecast_direct(cell, data)
    naive = persistence_forecast(data)
    assert model_result.mse < naive.mse


def test_rolling_blocks_reset_with_observations():
    y = _ar1_series(300, seed=12)
    data = make_windows(y, y, p=2, m=1, splits=(0.6, 0.2))
    cell = cells.init_params("rnn", 1, 3, 1, 2, seed=12)
    m = 4
    result = forecast_rolling(cell, data, m=m)
    # step index cycles 1..m over the test block
    expected = np.resize(np.arange(1, m + 1), len(result.steps))
    np.testing.assert_array_equal(result.steps, expected)
    # block starts use observed data only: they equal the direct one-step forecast
    direct = forecast_direct(cell, data)
    starts = result.steps == 1
    np.testing.assert_allclose(result.predictions[starts], direct.predictions[starts],
                               atol=1e-12)
