import numpy as np
import pytest

from smoothrnn.cells import stateful_trajectory
from smoothrnn.diagnostics import adf_test, pacf, scalar_cell
from smoothrnn.errors import UsageError
from smoothrnn.initializers import make_rng
from smoothrnn.synthetic import (
    AlphaRnnDgpConfig,
    LlmConfig,
    generate_alpha_rnn,
    generate_llm,
)


# -- local level model ---------------------------------------------------------


def test_llm_zero_variances_zero_series():
    cfg = LlmConfig(n_obs=200, noise_var=0.0, level_var=0.0, seasonal_var=0.0, seed=0)
    sim = generate_llm(cfg)
    assert np.array_equal(sim.observed, np.zeros(200))


def test_llm_seasonal_recurrence_identity():
    cfg = LlmConfig(n_obs=2000, seed=1)
    sim = generate_llm(cfg)
    s = cfg.period
    # gamma_t + sum of previous s-1 seasonal states is the innovation omega_t,
    # so the rolling s-sum over seasonal states is white with variance ~ 1
    sums = np.array([sim.seasonal[t - s + 1 : t + 1].sum() for t in range(s - 1, 2000)])
    assert abs(sums.mean()) < 0.15
    assert abs(sums.var() - cfg.seasonal_var) < 0.15
    # and exactly zero-sum at the initial block by construction
    assert abs(sim.seasonal[: s - 1].sum()) < 1e-12


def test_llm_reproducible():
    a = generate_llm(LlmConfig(n_obs=500, seed=7))
    b = generate_llm(LlmConfig(n_obs=500, seed=7))
    assert np.array_equal(a.observed, b.observed)
    assert not np.array_equal(a.observed, generate_llm(LlmConfig(n_obs=500, seed=8)).observed)


def test_llm_components_add_up():
    sim = generate_llm(LlmConfig(n_obs=300, seed=2))
    np.testing.assert_allclose(sim.observed, sim.level + sim.seasonal + sim.noise, atol=1e-12)


def test_llm_default_fails_unit_root_rejection():
    """Majority of seeds: ADF cannot reject the unit root on the raw series.

    The lag window must cover the seasonal period, otherwise the seasonal
    recurrence masquerades as mean reversion and the test spuriously rejects.
    """
    fails = 0
    for seed in range(5):
        sim = generate_llm(LlmConfig(seed=seed))
        fails += not adf_test(sim.observed, 30).rejects[0.05]
    assert fails >= 3


def test_llm_seasonal_pacf_spike_at_period():
    hits = 0
    for seed in range(5):
        sim = generate_llm(LlmConfig(seed=seed))
        result = pacf(sim.observed, 26)
        hits += abs(result.estimates[23]) > result.band
    assert hits >= 3


def test_llm_validates_config():
    with pytest.raises(UsageError):
        generate_llm(LlmConfig(n_obs=10, period=24))
    with pytest.raises(UsageError):
        generate_llm(LlmConfig(noise_var=-1.0))


# -- alpha-RNN generator ---------------------------------------------------------


def test_dgp_zero_noise_zero_series():
    y = generate_alpha_rnn(AlphaRnnDgpConfig(noise_std=0.0, n_obs=100, seed=0))
    assert np.array_equal(y, np.zeros(100))


def test_dgp_reproducible():
    a = generate_alpha_rnn(AlphaRnnDgpConfig(n_obs=400, seed=3))
    b = generate_alpha_rnn(AlphaRnnDgpConfig(n_obs=400, seed=3))
    assert np.array_equal(a, b)


def test_dgp_matches_stateful_cell_trajectory():
    """The generator is the scalar smoothed cell driven statefully: removing
    the observation noise recovers the cell's one-step predictions."""
    cfg = AlphaRnnDgpConfig(alpha=0.4, weight=0.6, noise_std=0.2, n_obs=60, seed=4)
    y = generate_alpha_rnn(cfg)
    eps = make_rng(cfg.seed).normal(0.0, cfg.noise_std, size=cfg.n_obs)
    cell = scalar_cell("alpha_rnn", cfg.order, weight=cfg.weight, alpha=cfg.alpha)
    traj = stateful_trajectory(cell, y)
    np.testing.assert_allclose(y[1:], traj.predictions[:-1, 0] + eps[1:], atol=1e-12)


def test_dgp_alpha_one_pacf_cutoff_single_seed():
    y = generate_alpha_rnn(AlphaRnnDgpConfig(alpha=1.0, n_obs=10000, seed=120))
    result = pacf(y, 10)
    assert np.all(np.abs(result.estimates[:3]) > result.band)  # lags 1..3 significant
    assert np.all(np.abs(result.estimates[3:]) < result.band)  # cutoff after 3


def test_dgp_alpha_quarter_long_memory_single_seed():
    y = generate_alpha_rnn(AlphaRnnDgpConfig(alpha=0.25, n_obs=10000, seed=120))
    result = pacf(y, 10)
    assert np.any(np.abs(result.estimates[3:]) > result.band)


def test_dgp_validates_config():
    with pytest.raises(UsageError):
        generate_alpha_rnn(AlphaRnnDgpConfig(alpha=0.0))
    with pytest.raises(UsageError):
        generate_alpha_rnn(AlphaRnnDgpConfig(alpha=1.2))
