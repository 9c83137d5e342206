"""Data-generating processes: the additive local level model with daily
seasonality, and the noisy scalar alpha-RNN(3) generator used to exercise the
partial-autocorrelation cutoff."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .initializers import make_rng

__all__ = [
    "LlmConfig",
    "LlmSeries",
    "AlphaRnnDgpConfig",
    "generate_llm",
    "generate_alpha_rnn",
]


@dataclass
class LlmConfig:
    """Local level model: y_t = mu_t + gamma_t + eps_t with a random-walk level
    and a zero-sum seasonal recurrence of period s."""

    period: int = 24
    n_obs: int = 10000
    noise_var: float = 300.0  # observation noise variance
    level_var: float = 1.0  # random-walk increment variance
    seasonal_var: float = 1.0  # seasonal innovation variance
    seed: int = 0

    def validate(self) -> None:
        if self.period < 2 or self.n_obs <= self.period:
            raise UsageError("need period >= 2 and n_obs > period")
        if min(self.noise_var, self.level_var, self.seasonal_var) < 0:
            raise UsageError("variances must be >= 0")


@dataclass
class LlmSeries:
    observed: np.ndarray
    level: np.ndarray
    seasonal: np.ndarray
    noise: np.ndarray

    def __len__(self) -> int:
        return len(self.observed)


def generate_llm(cfg: LlmConfig) -> LlmSeries:
    """Simulate the local level model and return the latent components too.

    The first period - 1 seasonal states are i.i.d. Gaussian draws recentered
    to sum to zero, so gamma_t + sum of the previous s-1 seasonal states equals
    the seasonal innovation exactly for every later t. The level starts at 0.
    """
    cfg.validate()
    rng = make_rng(cfg.seed)
    s, n = cfg.period, cfg.n_obs
    sd_noise = math.sqrt(cfg.noise_var)
    sd_level = math.sqrt(cfg.level_var)
    sd_seasonal = math.sqrt(cfg.seasonal_var)

    seasonal = np.zeros(n)
    init = rng.normal(0.0, sd_seasonal, size=s - 1)
    seasonal[: s - 1] = init - init.mean()
    for t in range(s - 1, n):
        seasonal[t] = -seasonal[t - s + 1 : t].sum() + rng.normal(0.0, sd_seasonal)

    level = np.cumsum(rng.normal(0.0, sd_level, size=n))
    noise = rng.normal(0.0, sd_noise, size=n)
    observed = level + seasonal + noise
    return LlmSeries(observed=observed, level=level, seasonal=seasonal, noise=noise)


@dataclass
class AlphaRnnDgpConfig:
    """Scalar alpha-RNN(order) iterated over its own noisy outputs."""

    order: int = 3
    alpha: float = 1.0
    weight: float = 0.5  # shared input/recurrence weight
    noise_std: float = 0.1
    n_obs: int = 10000
    seed: int = 0

    def validate(self) -> None:
        if self.order < 1:
            raise UsageError("order must be >= 1")
        if not (0.0 < self.alpha <= 1.0):
            raise UsageError("alpha must lie in (0, 1]")
        if self.noise_std < 0 or self.n_obs <= self.order:
            raise UsageError("need noise_std >= 0 and n_obs > order")


def generate_alpha_rnn(cfg: AlphaRnnDgpConfig) -> np.ndarray:
    """Iterate the scalar smoothed recurrence over its own noisy outputs.

    Each prediction runs a window over the last ``order`` observations with
    the hidden update reset at the window start; the smoothed state is carried
    across windows (the window ending at time t starts smoothing from the
    state recorded at time t - order). With alpha = 1 the carry cancels and
    the series is a pure NAR(order) process, so its partial autocorrelations
    cut off after ``order`` lags; with alpha < 1 they do not.

    Matches ``cells.stateful_trajectory`` on an alpha-RNN cell built by
    ``diagnostics.scalar_cell`` with the same weight, up to observation noise.
    """
    cfg.validate()
    rng = make_rng(cfg.seed)
    p, a, w = cfg.order, cfg.alpha, cfg.weight
    n = cfg.n_obs
    eps = rng.normal(0.0, cfg.noise_std, size=n) if cfg.noise_std > 0 else np.zeros(n)

    y = np.zeros(n)
    y[0] = eps[0]
    smoothed = np.zeros(n)  # smoothed state recorded at each window-end time
    for tau in range(n - 1):
        carry = smoothed[tau - p] if tau >= p else 0.0
        h_tilde = carry
        for s in range(p):
            idx = tau - p + 1 + s
            v = y[idx] if idx >= 0 else 0.0  # windows before the start are zero-padded
            pre = w * v if s == 0 else w * h_tilde + w * v
            h_hat = math.tanh(pre)
            h_tilde = a * h_hat + (1.0 - a) * h_tilde
        smoothed[tau] = h_tilde
        y[tau + 1] = h_tilde + eps[tau + 1]
    return y
