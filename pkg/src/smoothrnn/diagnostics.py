"""Classical time-series diagnostics that guide architecture choice:
autocorrelations, partial autocorrelations via Durbin-Levinson, an augmented
Dickey-Fuller unit-root test, classical additive seasonal decomposition, a
least-squares AR(p) baseline, and the scalar impulse-response experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cells import CellParams, stateful_trajectory
from .errors import DataError, UsageError

__all__ = [
    "PacfResult",
    "default_adf_max_lag",
    "AdfResult",
    "Decomposition",
    "ImpulseConfig",
    "ImpulseResponses",
    "ADF_CRITICAL_VALUES",
    "acf",
    "pacf",
    "adf_test",
    "decompose",
    "ar_baseline_fit",
    "ar_baseline_forecast",
    "scalar_cell",
    "impulse_response",
]

# constant-only specification, large-sample critical values
ADF_CRITICAL_VALUES = {0.01: -3.431, 0.05: -2.862, 0.10: -2.567}


def default_adf_max_lag(n_obs: int) -> int:
    """Schwert's rule 12 * (N/100)^(1/4); the window must reach any seasonal
    period present or the test over-rejects on seasonal data."""
    return max(1, int(12.0 * (n_obs / 100.0) ** 0.25))


def _as_series(series) -> np.ndarray:
    out = np.asarray(series, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(out)):
        raise DataError("series contains non-finite values")
    return out


def acf(series, h_max: int) -> np.ndarray:
    """Autocorrelations tau_0..tau_h_max with the biased (1/N) autocovariance
    estimator, which keeps the Toeplitz system positive semidefinite."""
    y = _as_series(series)
    n = len(y)
    if n <= h_max:
        raise UsageError(f"need more than h_max={h_max} observations, got {n}")
    centered = y - y.mean()
    gamma0 = float(np.dot(centered, centered)) / n
    if gamma0 == 0.0:
        raise DataError("degenerate series: variance is zero")
    taus = np.empty(h_max + 1)
    taus[0] = 1.0
    for j in range(1, h_max + 1):
        taus[j] = float(np.dot(centered[j:], centered[:-j])) / n / gamma0
    return taus


@dataclass
class PacfResult:
    """Estimated partial autocorrelations at lags 1..h_max with the
    +-1.96/sqrt(N) confidence half-width."""

    lags: np.ndarray
    estimates: np.ndarray
    band: float
    n_obs: int

    def significant_lags(self) -> np.ndarray:
        return self.lags[np.abs(self.estimates) > self.band]


def pacf(series, h_max: int) -> PacfResult:
    """Durbin-Levinson recursion on the estimated autocorrelations."""
    y = _as_series(series)
    n = len(y)
    if n <= h_max + 1:
        raise UsageError(f"need more than h_max + 1 = {h_max + 1} observations, got {n}")
    taus = acf(y, h_max)
    phi_prev = np.zeros(0)
    estimates = np.empty(h_max)
    for h in range(1, h_max + 1):
        if h == 1:
            phi_hh = taus[1]
            phi = np.array([phi_hh])
        else:
            num = taus[h] - float(np.dot(phi_prev, taus[h - 1 : 0 : -1]))
            den = 1.0 - float(np.dot(phi_prev, taus[1:h]))
            if den == 0.0:
                raise DataError("degenerate autocorrelation structure in Durbin-Levinson")
            phi_hh = num / den
            phi = np.empty(h)
            phi[: h - 1] = phi_prev - phi_hh * phi_prev[::-1]
            phi[h - 1] = phi_hh
        estimates[h - 1] = phi_hh
        phi_prev = phi
    return PacfResult(
        lags=np.arange(1, h_max + 1),
        estimates=estimates,
        band=1.96 / np.sqrt(n),
        n_obs=n,
    )


@dataclass
class AdfResult:
    """Augmented Dickey-Fuller outcome (constant-only specification; linear
    trends are not removed, which callers must keep in mind for trending data)."""

    statistic: float
    lag_order: int
    n_obs: int
    rejects: dict[float, bool]
    critical_values: dict[float, float] = field(default_factory=lambda: dict(ADF_CRITICAL_VALUES))
    specification: str = "constant"

    def is_stationary(self, level: float = 0.05) -> bool:
        return self.rejects[level]


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float, np.ndarray]:
    coeffs, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    if rank < x.shape[1]:
        raise DataError("singular regression design")
    resid = y - x @ coeffs
    ssr = float(resid @ resid)
    return coeffs, ssr, resid


def _adf_design(y: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    dy = np.diff(y)
    rows = len(dy) - k
    x = np.empty((rows, k + 2))
    x[:, 0] = 1.0
    x[:, 1] = y[k:-1]
    for j in range(1, k + 1):
        x[:, 1 + j] = dy[k - j : len(dy) - j]
    return x, dy[k:]


def adf_test(series, max_lag: int) -> AdfResult:
    """Regress the first difference on the lagged level and lagged differences
    (constant included); the t-statistic on the level coefficient is compared
    to the fixed critical-value table. Lag order minimizes AIC over 0..max_lag
    on a common sample, then the chosen model is refit on all usable rows."""
    y = _as_series(series)
    n = len(y)
    if n <= max_lag + 10:
        raise UsageError(f"need more than max_lag + 10 = {max_lag + 10} observations, got {n}")
    if np.all(y == y[0]):
        raise DataError("degenerate series: variance is zero")

    # select the lag on the sample aligned at max_lag so AICs are comparable
    base_x, base_dy = _adf_design(y, max_lag)
    rows = len(base_dy)
    best = None
    for k in range(0, max_lag + 1):
        cols = [0, 1] + [1 + j for j in range(1, k + 1)]
        x = base_x[:, cols]
        _, ssr, _ = _ols(x, base_dy)
        aic = rows * np.log(ssr / rows) + 2.0 * (k + 2)
        if best is None or aic < best[0]:
            best = (aic, k)
    k = best[1]

    x, dy = _adf_design(y, k)
    coeffs, ssr, _ = _ols(x, dy)
    dof = len(dy) - x.shape[1]
    sigma2 = ssr / dof
    xtx_inv = np.linalg.inv(x.T @ x)
    se = float(np.sqrt(sigma2 * xtx_inv[1, 1]))
    stat = float(coeffs[1] / se)
    rejects = {level: stat < cv for level, cv in ADF_CRITICAL_VALUES.items()}
    return AdfResult(statistic=stat, lag_order=k, n_obs=len(dy), rejects=rejects)


@dataclass
class Decomposition:
    """Classical additive decomposition; trend + seasonal + residual equals the
    observed series exactly, and the seasonal component sums to zero over any
    full period."""

    trend: np.ndarray
    seasonal: np.ndarray
    residual: np.ndarray
    period: int
    interior: slice  # rows where the moving average is properly defined


def decompose(series, period: int) -> Decomposition:
    """Centered moving-average trend (the 2xs average for even periods),
    per-phase means of the detrended interior recentered to zero-sum, residual
    as the remainder. Endpoints carry the nearest defined trend value."""
    y = _as_series(series)
    n = len(y)
    if period < 2:
        raise UsageError("seasonal period must be >= 2")
    if n < 2 * period:
        raise UsageError(f"need at least 2 * period = {2 * period} observations, got {n}")

    if period % 2 == 0:
        half = period // 2
        weights = np.full(period + 1, 1.0 / period)
        weights[0] = weights[-1] = 0.5 / period
    else:
        half = (period - 1) // 2
        weights = np.full(period, 1.0 / period)
    core = np.convolve(y, weights, mode="valid")
    trend = np.empty(n)
    trend[half : half + len(core)] = core
    trend[:half] = core[0]
    trend[half + len(core):] = core[-1]
    interior = slice(half, half + len(core))

    detrended = y - trend
    phase_means = np.zeros(period)
    phase_counts = np.zeros(period)
    idx = np.arange(n) % period
    np.add.at(phase_means, idx[interior], detrended[interior])
    np.add.at(phase_counts, idx[interior], 1.0)
    phase_means /= np.maximum(phase_counts, 1.0)
    phase_means -= phase_means.mean()
    seasonal = phase_means[idx]
    residual = y - trend - seasonal
    return Decomposition(trend=trend, seasonal=seasonal, residual=residual,
                         period=period, interior=interior)


def ar_baseline_fit(series, p: int) -> tuple[float, np.ndarray]:
    """Least-squares fit of y_t on p lags plus an intercept.

    Returns (intercept, coefficients ordered lag 1..p). p = 0 fits the mean.
    """
    y = _as_series(series)
    n = len(y)
    if p < 0:
        raise UsageError("AR order must be >= 0")
    if n <= p + 1:
        raise UsageError(f"need more than p + 1 = {p + 1} observations, got {n}")
    if p == 0:
        return float(y.mean()), np.zeros(0)
    x = np.empty((n - p, p + 1))
    x[:, 0] = 1.0
    for j in range(1, p + 1):
        x[:, j] = y[p - j : n - j]
    coeffs, _, _ = _ols(x, y[p:])
    return float(coeffs[0]), coeffs[1:]


def ar_baseline_forecast(
    intercept: float, coeffs: np.ndarray, history, m: int, rolling: bool = True
):
    """m-step forecast by iterated substitution of intermediate predictions.

    With ``rolling`` the full path of m forecasts is returned; otherwise only
    the m-step-ahead value (for a linear AR the iterated conditional mean is
    the direct m-step forecast).
    """
    coeffs = np.asarray(coeffs, dtype=np.float64).reshape(-1)
    hist = _as_series(history)
    p = len(coeffs)
    if m < 1:
        raise UsageError("forecast horizon must be >= 1")
    if len(hist) < p:
        raise UsageError(f"history must contain at least p = {p} observations")
    buffer = list(hist[len(hist) - p :])
    path = np.empty(m)
    for k in range(m):
        value = intercept + sum(c * buffer[-1 - j] for j, c in enumerate(coeffs))
        path[k] = value
        buffer.append(value)
    return path if rolling else float(path[-1])


# -- scalar impulse-response experiment -----------------------------------------


@dataclass
class ImpulseConfig:
    """Scalar configuration: H = 1, all weights one, biases zero, tanh."""

    order: int = 3  # sequence length p
    alpha: float = 0.5
    weight: float = 1.0
    horizon: int = 20
    impulse_times: tuple[int, ...] = (2, 12)


@dataclass
class ImpulseResponses:
    inputs: np.ndarray
    responses: dict[str, np.ndarray]
    zero_responses: dict[str, np.ndarray]


def scalar_cell(arch: str, p: int, weight: float = 1.0, alpha: float = 0.5) -> CellParams:
    """H = d = n = 1 cell with every weight set to ``weight`` and zero biases."""
    w = np.array([[float(weight)]])
    params = CellParams(
        arch=arch, p=p, m=1,
        W_h=w.copy(), U_h=w.copy(), b_h=np.zeros(1),
        W_y=np.array([[1.0]]), b_y=np.zeros(1),
    )
    if arch in ("es_rnn", "alpha_rnn"):
        if not (0.0 < alpha <= 1.0):
            raise UsageError("alpha must lie in (0, 1]")
        # logit(alpha); alpha = 1 needs a saturating raw value
        params.alpha_raw = np.array(
            [[60.0 if alpha == 1.0 else float(np.log(alpha / (1.0 - alpha)))]]
        )
    if arch == "alpha_t_rnn":
        params.W_a, params.U_a, params.b_a = w.copy(), w.copy(), np.zeros(1)
    if arch in ("gru", "lstm"):
        raise UsageError("the impulse experiment covers rnn, es_rnn, alpha_rnn, alpha_t_rnn")
    return params


def impulse_response(cfg: ImpulseConfig) -> ImpulseResponses:
    """Hidden-state trajectories of the plain RNN, the alpha-RNN, and the
    dynamic cell driven by unit impulses at ``impulse_times``, plus the
    zero-input trajectories they are compared against.

    The plain RNN forgets an isolated impulse after ``order`` lags exactly;
    the smoothed cells carry it in the smoothed state indefinitely.
    """
    if cfg.horizon < cfg.order + 1:
        raise UsageError("horizon must exceed the sequence length")
    x = np.zeros(cfg.horizon)
    for t in cfg.impulse_times:
        if not (0 <= t < cfg.horizon):
            raise UsageError(f"impulse time {t} outside the horizon")
        x[t] = 1.0
    zeros = np.zeros(cfg.horizon)
    responses: dict[str, np.ndarray] = {}
    zero_responses: dict[str, np.ndarray] = {}
    for arch in ("rnn", "alpha_rnn", "alpha_t_rnn"):
        cell = scalar_cell(arch, cfg.order, weight=cfg.weight, alpha=cfg.alpha)
        responses[arch] = stateful_trajectory(cell, x).states[:, 0]
        zero_responses[arch] = stateful_trajectory(cell, zeros).states[:, 0]
    return ImpulseResponses(inputs=x, responses=responses, zero_responses=zero_responses)
