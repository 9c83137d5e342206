"""Run configuration: a flat INI-style file with sections, every key
overridable from the command line."""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field

from .bayes import BayesConfig, MixturePrior
from .errors import UsageError
from .training import CvGrid, TrainConfig

__all__ = ["RunConfig", "load_run_config", "OUTPUT_DIR_ENV"]

OUTPUT_DIR_ENV = "SMOOTHRNN_OUTDIR"


@dataclass
class RunConfig:
    data_path: str = ""
    target_column: str = "value"
    feature_columns: list[str] = field(default_factory=list)  # empty: target only
    arch: str = "alpha_rnn"
    p: int = 10
    m: int = 1
    hidden_size: int = 5
    readout: str = "smoothed"
    activation: str = "tanh"
    mode: str = "direct"  # or "rolling"
    rolling_horizon: int | None = None
    train_frac: float = 0.7
    val_frac: float = 0.15
    train: TrainConfig = field(default_factory=TrainConfig)
    cv: CvGrid | None = None
    bayes: BayesConfig = field(default_factory=BayesConfig)
    n_draws: int = 10
    level: float = 0.95
    include_observation_noise: bool = True
    seed: int = 0
    output_dir: str = "."

    def validate(self) -> None:
        if self.mode not in ("direct", "rolling"):
            raise UsageError(f"unknown forecast mode {self.mode!r}")
        if self.train_frac <= 0 or self.val_frac < 0 or self.train_frac + self.val_frac > 1.0:
            raise UsageError("split fractions must be positive and sum to at most 1")
        if self.p < 1 or self.m < 1 or self.hidden_size < 1:
            raise UsageError("p, m and hidden size must be >= 1")
        self.train.validate()
        if self.cv is not None:
            self.cv.validate()


def _parse_list(text: str, cast):
    return [cast(tok.strip()) for tok in text.split(",") if tok.strip()]


def _get(parser, section, key, cast, default):
    if parser.has_option(section, key):
        raw = parser.get(section, key)
        try:
            if cast is bool:
                return raw.strip().lower() in ("1", "true", "yes", "on")
            return cast(raw)
        except ValueError as exc:
            raise UsageError(f"config [{section}] {key}: bad value {raw!r}") from exc
    return default


def load_run_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an INI file plus CLI overrides.

    ``overrides`` maps dotted keys (e.g. "model.arch", "train.seed") to values
    already of the right type; every flag wins over its config key.
    """
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            with open(path, "r", encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config file {path}: {exc}") from exc
        except configparser.Error as exc:
            raise UsageError(f"malformed config file {path}: {exc}") from exc

        cfg.data_path = _get(parser, "data", "path", str, cfg.data_path)
        cfg.target_column = _get(parser, "data", "target", str, cfg.target_column)
        if parser.has_option("data", "features"):
            cfg.feature_columns = _parse_list(parser.get("data", "features"), str)

        cfg.arch = _get(parser, "model", "arch", str, cfg.arch)
        cfg.p = _get(parser, "model", "p", int, cfg.p)
        cfg.m = _get(parser, "model", "m", int, cfg.m)
        cfg.hidden_size = _get(parser, "model", "hidden", int, cfg.hidden_size)
        cfg.readout = _get(parser, "model", "readout", str, cfg.readout)
        cfg.activation = _get(parser, "model", "activation", str, cfg.activation)
        cfg.mode = _get(parser, "model", "mode", str, cfg.mode)
        cfg.rolling_horizon = _get(parser, "model", "rolling_horizon", int, cfg.rolling_horizon)

        cfg.train_frac = _get(parser, "split", "train", float, cfg.train_frac)
        cfg.val_frac = _get(parser, "split", "val", float, cfg.val_frac)

        tr = cfg.train
        tr.max_epochs = _get(parser, "train", "max_epochs", int, tr.max_epochs)
        tr.batch_size = _get(parser, "train", "batch_size", int, tr.batch_size)
        tr.patience = _get(parser, "train", "patience", int, tr.patience)
        tr.min_delta = _get(parser, "train", "min_delta", float, tr.min_delta)
        tr.learning_rate = _get(parser, "train", "learning_rate", float, tr.learning_rate)
        tr.lambda1 = _get(parser, "train", "lambda1", float, tr.lambda1)
        tr.loss = _get(parser, "train", "loss", str, tr.loss)
        cfg.seed = _get(parser, "train", "seed", int, cfg.seed)

        if parser.has_section("cv"):
            grid = CvGrid()
            if parser.has_option("cv", "hidden"):
                grid.hidden_sizes = tuple(_parse_list(parser.get("cv", "hidden"), int))
            if parser.has_option("cv", "lambda1"):
                grid.lambda1_values = tuple(_parse_list(parser.get("cv", "lambda1"), float))
            grid.folds = _get(parser, "cv", "folds", int, grid.folds)
            cfg.cv = grid

        by = cfg.bayes
        by.n_elbo_samples = _get(parser, "bayes", "n_elbo_samples", int, by.n_elbo_samples)
        by.max_epochs = _get(parser, "bayes", "max_epochs", int, by.max_epochs)
        by.patience = _get(parser, "bayes", "patience", int, by.patience)
        by.learning_rate = _get(parser, "bayes", "learning_rate", float, by.learning_rate)
        by.batch_size = _get(parser, "bayes", "batch_size", int, by.batch_size)
        by.init_posterior_std = _get(parser, "bayes", "init_posterior_std", float, by.init_posterior_std)
        by.warm_epochs = _get(parser, "bayes", "warm_epochs", int, by.warm_epochs)
        by.obs_std = _get(parser, "bayes", "obs_std", float, by.obs_std)
        by.prior = MixturePrior(
            pi=_get(parser, "bayes", "pi", float, by.prior.pi),
            sigma1=_get(parser, "bayes", "sigma1", float, by.prior.sigma1),
            sigma2=_get(parser, "bayes", "sigma2", float, by.prior.sigma2),
        )
        cfg.n_draws = _get(parser, "bayes", "n_draws", int, cfg.n_draws)
        cfg.level = _get(parser, "bayes", "level", float, cfg.level)
        cfg.include_observation_noise = _get(
            parser, "bayes", "include_observation_noise", bool, cfg.include_observation_noise
        )

        cfg.output_dir = _get(parser, "output", "dir", str, cfg.output_dir)

    env_dir = os.environ.get(OUTPUT_DIR_ENV)
    if env_dir and cfg.output_dir == ".":
        cfg.output_dir = env_dir

    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        section, key = dotted.split(".", 1)
        if section == "data":
            setattr(cfg, {"path": "data_path", "target": "target_column"}[key], value)
        elif section == "model":
            attr = {"arch": "arch", "p": "p", "m": "m", "hidden": "hidden_size",
                    "readout": "readout", "activation": "activation", "mode": "mode",
                    "rolling_horizon": "rolling_horizon"}[key]
            setattr(cfg, attr, value)
        elif section == "split":
            setattr(cfg, {"train": "train_frac", "val": "val_frac"}[key], value)
        elif section == "train":
            if key == "seed":
                cfg.seed = value
            else:
                setattr(cfg.train, key, value)
        elif section == "bayes":
            if key in ("n_draws", "level", "include_observation_noise"):
                setattr(cfg, key, value)
            else:
                setattr(cfg.bayes, key, value)
        elif section == "output":
            cfg.output_dir = value
        else:
            raise UsageError(f"unknown override {dotted!r}")

    cfg.train.seed = cfg.seed
    cfg.bayes.seed = cfg.seed
    cfg.bayes.hidden_size = cfg.hidden_size
    cfg.validate()
    return cfg
