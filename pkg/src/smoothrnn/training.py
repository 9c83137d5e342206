"""Loss, Adam, mini-batch fitting with patience-based early stopping, and
contiguous time-series cross-validation.

Mini-batches are consecutive slices of the training windows, never shuffled,
so data order is preserved and a fixed seed makes every run bit-reproducible.
Patience counts consecutive mini-batch loss evaluations whose change falls
below ``min_delta``.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from . import tape as T
from .cells import CellParams, forward_batch, half_life, init_params, wrap_params
from .errors import TrainingError, UsageError
from .forecasting import WindowedDataset
from .initializers import spawn_rng

__all__ = [
    "TrainConfig",
    "FitReport",
    "AdamState",
    "CvGrid",
    "CvResult",
    "loss_value",
    "penalty_value",
    "adam_init",
    "adam_step",
    "fit",
    "fit_arrays",
    "cross_validate",
]


@dataclass
class TrainConfig:
    max_epochs: int = 2000
    batch_size: int = 1000
    patience: int = 50
    min_delta: float = 1e-6
    learning_rate: float = 1e-3
    lambda1: float = 0.0
    loss: str = "mse"  # or "mae"
    seed: int = 0
    clip_norm: float | None = 5.0

    def validate(self) -> None:
        if self.max_epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise UsageError("max_epochs, batch_size and patience must be >= 1")
        if self.min_delta <= 0 or self.learning_rate <= 0:
            raise UsageError("min_delta and learning_rate must be positive")
        if self.lambda1 < 0:
            raise UsageError("lambda1 must be >= 0")
        if self.loss not in ("mse", "mae"):
            raise UsageError(f"unknown loss kind {self.loss!r}")


@dataclass
class FitReport:
    """Training record: per-epoch loss trace, stopping point, timing, and the
    fitted smoothing scalar where the architecture has one."""

    loss_trace: list[float]
    stopping_epoch: int
    train_seconds: float
    params: CellParams
    batch_updates: int
    alpha: float | None = None
    alpha_half_life: float | None = None
    checkpoint_path: str | None = None


def _data_term(pred, target, kind: str):
    diff = pred - target
    if kind == "mse":
        return T.vmean(T.square(diff))
    return T.vmean(T.vabs(diff))


def penalty_value(params_view, names, lambda1: float):
    """lambda1 times the L1 norm of the weight matrices (biases excluded)."""
    if lambda1 == 0.0 or not names:
        return 0.0
    total = None
    for name in names:
        term = T.vsum(T.vabs(getattr(params_view, name)))
        total = term if total is None else total + term
    return lambda1 * total


def loss_value(pred, target, params: CellParams | None = None,
               lambda1: float = 0.0, kind: str = "mse"):
    """Mean squared or absolute error plus the L1 weight penalty."""
    pred_v, target_v = T.value_of(pred), T.value_of(target)
    if pred_v.shape != target_v.shape:
        raise UsageError(f"prediction shape {pred_v.shape} != target shape {target_v.shape}")
    if kind not in ("mse", "mae"):
        raise UsageError(f"unknown loss kind {kind!r}")
    out = _data_term(pred, target, kind)
    if params is not None and lambda1 > 0.0:
        out = out + penalty_value(params, params.weight_matrix_names(), lambda1)
    return out


@dataclass
class AdamState:
    """First/second moment accumulators with bias correction, default
    beta1=0.9, beta2=0.999, eps=1e-8."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(arrays: dict[str, np.ndarray]) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(a) for k, a in arrays.items()},
        v={k: np.zeros_like(a) for k, a in arrays.items()},
    )


def adam_step(
    state: AdamState,
    arrays: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    lr: float,
) -> dict[str, np.ndarray]:
    """One Adam update; returns new arrays, leaves inputs untouched."""
    missing = set(arrays) - set(grads)
    if missing:
        raise UsageError(f"gradient map missing parameters: {sorted(missing)}")
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {name!r}")
    state.t += 1
    b1, b2, eps = state.beta1, state.beta2, state.eps
    out = {}
    for name, value in arrays.items():
        g = grads[name]
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = state.m[name] / (1.0 - b1**state.t)
        v_hat = state.v[name] / (1.0 - b2**state.t)
        out[name] = value - lr * m_hat / (np.sqrt(v_hat) + eps)
    return out


def _clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> dict[str, np.ndarray]:
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total <= max_norm or total == 0.0:
        return grads
    scale = max_norm / total
    return {k: g * scale for k, g in grads.items()}


def _batch_columns(inputs: np.ndarray) -> list[np.ndarray]:
    # (B, p, d) -> p contiguous (d, B) columns
    return [np.ascontiguousarray(inputs[:, s, :].T) for s in range(inputs.shape[1])]


def fit_arrays(
    cell: CellParams,
    inputs: np.ndarray,
    targets: np.ndarray,
    cfg: TrainConfig,
) -> FitReport:
    """Fit ``cell`` in place on (B, p, d) windows and (B,) or (B, n) targets."""
    cfg.validate()
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if targets.ndim == 1:
        targets = targets[:, None]
    n_windows = inputs.shape[0]
    if n_windows == 0:
        raise UsageError("no training windows")
    if inputs.shape[1] != cell.p or inputs.shape[2] != cell.input_size:
        raise UsageError(
            f"window shape {inputs.shape[1:]} incompatible with cell (p={cell.p}, d={cell.input_size})"
        )

    batches = []
    for start in range(0, n_windows, cfg.batch_size):
        stop = min(start + cfg.batch_size, n_windows)
        batches.append(
            (_batch_columns(inputs[start:stop]), np.ascontiguousarray(targets[start:stop].T))
        )

    arrays = dict(cell.named_arrays())
    adam = adam_init(arrays)
    weight_names = cell.weight_matrix_names()

    started = time.perf_counter()
    trace: list[float] = []
    prev_loss: float | None = None
    calm_updates = 0
    n_updates = 0
    stop = False
    epoch = 0
    while epoch < cfg.max_epochs and not stop:
        epoch += 1
        epoch_losses = []
        for xs, ys in batches:
            tp = T.Tape()
            view, varmap = wrap_params(tp, cell)
            pred = forward_batch(view, xs)
            loss = _data_term(pred, ys, cfg.loss) + penalty_value(view, weight_names, cfg.lambda1)
            loss_scalar = float(T.value_of(loss))
            if not np.isfinite(loss_scalar):
                raise TrainingError(f"training diverged: non-finite loss at epoch {epoch}")
            grad_map = tp.backward(loss)
            grads = {name: grad_map[var] for name, var in varmap.items()}
            if cfg.clip_norm is not None:
                grads = _clip_gradients(grads, cfg.clip_norm)
            arrays = adam_step(adam, arrays, grads, cfg.learning_rate)
            for name, arr in arrays.items():
                setattr(cell, name, arr)
            epoch_losses.append(loss_scalar)
            n_updates += 1
            if prev_loss is not None and abs(loss_scalar - prev_loss) < cfg.min_delta:
                calm_updates += 1
            else:
                calm_updates = 0
            prev_loss = loss_scalar
            if calm_updates >= cfg.patience:
                stop = True
                break
        trace.append(float(np.mean(epoch_losses)))
    elapsed = time.perf_counter() - started

    alpha = alpha_hl = None
    if cell.alpha_raw is not None:
        alpha = cell.alpha
        if 0.0 < alpha < 1.0:
            alpha_hl = half_life(alpha)
    return FitReport(
        loss_trace=trace,
        stopping_epoch=epoch,
        train_seconds=elapsed,
        params=cell,
        batch_updates=n_updates,
        alpha=alpha,
        alpha_half_life=alpha_hl,
    )


def fit(cell: CellParams, data: WindowedDataset, cfg: TrainConfig) -> FitReport:
    """Fit on the training windows of ``data`` (already normalized)."""
    if data.n_train == 0:
        raise UsageError("dataset has no training windows")
    if cell.p != data.p:
        raise UsageError(f"cell p={cell.p} != dataset p={data.p}")
    if cell.m != data.m:
        raise UsageError(f"cell horizon m={cell.m} != dataset m={data.m}")
    return fit_arrays(cell, data.inputs[: data.n_train], data.targets[: data.n_train], cfg)


# -- time-series cross-validation ----------------------------------------------


@dataclass
class CvGrid:
    hidden_sizes: tuple[int, ...] = (5, 10, 20)
    lambda1_values: tuple[float, ...] = (0.0, 1e-3, 1e-2)
    folds: int = 5

    def validate(self) -> None:
        if not self.hidden_sizes or not self.lambda1_values:
            raise UsageError("cross-validation grid must be non-empty")
        if self.folds < 2:
            raise UsageError("need at least 2 folds")


@dataclass
class CvResult:
    best_hidden: int
    best_lambda1: float
    mean_scores: dict[tuple[int, float], float]
    fold_scores: dict[tuple[int, float], list[float]]
    fold_bounds: list[tuple[int, int]] = field(default_factory=list)


def _fold_segments(n_windows: int, folds: int) -> list[tuple[int, int]]:
    """Split [0, n) into folds+1 contiguous segments; fold i trains on
    segments 0..i and validates on segment i+1, so every validation block
    lies strictly after its training block."""
    if n_windows < folds + 1:
        raise UsageError(
            f"{n_windows} training windows cannot support {folds}-fold time-series CV"
        )
    edges = np.linspace(0, n_windows, folds + 2).astype(int)
    return [(int(edges[i]), int(edges[i + 1])) for i in range(folds + 1)]


def cross_validate(
    arch: str,
    data: WindowedDataset,
    grid: CvGrid,
    cfg: TrainConfig,
) -> CvResult:
    """Grid-search (H, lambda1) with contiguous, time-ordered folds.

    Ties go to the smaller hidden size, then the smaller lambda1. Per-fit
    seeds derive from (cfg.seed, grid index, fold index).
    """
    grid.validate()
    cfg.validate()
    n_train = data.n_train
    segments = _fold_segments(n_train, grid.folds)
    inputs, targets = data.inputs, data.targets

    fold_scores: dict[tuple[int, float], list[float]] = {}
    mean_scores: dict[tuple[int, float], float] = {}
    candidates = list(itertools.product(grid.hidden_sizes, grid.lambda1_values))
    for gi, (hidden, lam) in enumerate(candidates):
        scores = []
        for fi in range(grid.folds):
            train_stop = segments[fi][1]
            val_start, val_stop = segments[fi + 1]
            seed = int(spawn_rng(cfg.seed, gi, fi).integers(0, 2**63 - 1))
            cell = init_params(
                arch, data.input_size, hidden, 1, data.p, m=data.m, seed=seed
            )
            fold_cfg = TrainConfig(**{**cfg.__dict__, "lambda1": lam, "seed": seed})
            fit_arrays(cell, inputs[:train_stop], targets[:train_stop], fold_cfg)
            val_pred = forward_batch(cell, _batch_columns(inputs[val_start:val_stop]))
            val_loss = float(
                T.value_of(_data_term(val_pred, targets[val_start:val_stop].reshape(1, -1), cfg.loss))
            )
            scores.append(val_loss)
        fold_scores[(hidden, lam)] = scores
        mean_scores[(hidden, lam)] = float(np.mean(scores))

    best = None
    for hidden, lam in sorted(candidates, key=lambda c: (c[0], c[1])):
        score = mean_scores[(hidden, lam)]
        if best is None or score < best[0]:
            best = (score, hidden, lam)
    return CvResult(
        best_hidden=best[1],
        best_lambda1=best[2],
        mean_scores=mean_scores,
        fold_scores=fold_scores,
        fold_bounds=segments,
    )
