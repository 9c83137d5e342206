"""Batch command-line front end.

Subcommands: simulate, diagnose, train, forecast, evaluate, bayes-train,
bayes-forecast. Every flag overrides its config-file key; the environment
variable SMOOTHRNN_OUTDIR supplies the default output directory. Exit codes:
0 success, 1 usage, 2 I/O or parse, 3 state mismatch, 4 training divergence.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .bayes import bayes_fit, bayes_predict
from .cells import init_params
from .checkpoint import load_params, load_variational, save_params, save_variational
from .config import RunConfig, load_run_config
from .dataio import (
    read_forecast_csv,
    read_series_csv,
    write_correlogram_csv,
    write_fit_report,
    write_forecast_csv,
    write_metrics_summary,
    write_predictive_csv,
    write_predictive_summary,
    write_series_csv,
)
from .diagnostics import acf, adf_test, default_adf_max_lag, pacf
from .errors import (
    DataError,
    SmoothRnnError,
    StateMismatchError,
    TrainingError,
    UsageError,
)
from .forecasting import forecast_direct, forecast_rolling, make_windows
from .synthetic import AlphaRnnDgpConfig, LlmConfig, generate_alpha_rnn, generate_llm
from .training import cross_validate, fit

EXIT_CODES = {UsageError: 1, DataError: 2, StateMismatchError: 3, TrainingError: 4}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; usage errors are 1
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="smoothrnn", description=__doc__)
    parser.add_argument("--version", action="version", version=f"smoothrnn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic series CSV")
    sim.add_argument("kind", choices=["llm", "alpha-rnn-dgp"])
    sim.add_argument("--out", required=True)
    sim.add_argument("--n", type=int, default=None)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--period", type=int, default=24)
    sim.add_argument("--noise-var", type=float, default=300.0)
    sim.add_argument("--level-var", type=float, default=1.0)
    sim.add_argument("--seasonal-var", type=float, default=1.0)
    sim.add_argument("--order", type=int, default=3)
    sim.add_argument("--alpha", type=float, default=1.0)
    sim.add_argument("--weight", type=float, default=0.5)
    sim.add_argument("--noise-std", type=float, default=0.1)

    diag = sub.add_parser("diagnose", help="ACF/PACF/ADF report and a suggested sequence length")
    diag.add_argument("--data", required=True)
    diag.add_argument("--column", default=None, help="default: first data column")
    diag.add_argument("--max-lag", type=int, default=40)
    diag.add_argument("--adf-max-lag", type=int, default=None,
                      help="default: Schwert rule 12*(N/100)^0.25")
    diag.add_argument("--max-p", type=int, default=30, help="cap on the recommended sequence length")
    diag.add_argument("--out-dir", default=None)

    def add_run_flags(p, with_train=True):
        p.add_argument("--config", default=None)
        p.add_argument("--data", default=None)
        p.add_argument("--target", default=None)
        p.add_argument("--arch", default=None)
        p.add_argument("--p", type=int, default=None)
        p.add_argument("--m", type=int, default=None)
        p.add_argument("--hidden", type=int, default=None)
        p.add_argument("--mode", choices=["direct", "rolling"], default=None)
        p.add_argument("--train-frac", type=float, default=None)
        p.add_argument("--val-frac", type=float, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out-dir", default=None)
        if with_train:
            p.add_argument("--max-epochs", type=int, default=None)
            p.add_argument("--batch-size", type=int, default=None)
            p.add_argument("--patience", type=int, default=None)
            p.add_argument("--learning-rate", type=float, default=None)
            p.add_argument("--lambda1", type=float, default=None)
            p.add_argument("--loss", choices=["mse", "mae"], default=None)

    tr = sub.add_parser("train", help="optional cross-validation, final fit, checkpoint + report")
    add_run_flags(tr)
    tr.add_argument("--checkpoint-out", default=None)

    fc = sub.add_parser("forecast", help="forecast from a checkpoint")
    add_run_flags(fc, with_train=False)
    fc.add_argument("--checkpoint", required=True)
    fc.add_argument("--horizon", type=int, default=None, help="rolling horizon (default: model m)")
    fc.add_argument("--out", default=None)

    ev = sub.add_parser("evaluate", help="merge forecast CSVs into one summary table")
    ev.add_argument("--out", required=True)
    ev.add_argument("inputs", nargs="+", metavar="LABEL=FORECAST_CSV")

    bt = sub.add_parser("bayes-train", help="variational fit, writes a posterior checkpoint")
    add_run_flags(bt)
    bt.add_argument("--checkpoint-out", default=None)
    bt.add_argument("--elbo-samples", type=int, default=None)

    bf = sub.add_parser("bayes-forecast", help="posterior-draw forecasts with intervals")
    add_run_flags(bf, with_train=False)
    bf.add_argument("--checkpoint", required=True)
    bf.add_argument("--n-draws", type=int, default=None)
    bf.add_argument("--level", type=float, default=None)
    bf.add_argument("--horizon", type=int, default=None)
    bf.add_argument("--out", default=None)
    return parser


def _run_overrides(args, with_train=True) -> dict:
    over = {
        "data.path": args.data,
        "data.target": args.target,
        "model.arch": args.arch,
        "model.p": args.p,
        "model.m": args.m,
        "model.hidden": args.hidden,
        "model.mode": args.mode,
        "split.train": args.train_frac,
        "split.val": args.val_frac,
        "train.seed": args.seed,
        "output.dir": args.out_dir,
    }
    if with_train:
        over |= {
            "train.max_epochs": args.max_epochs,
            "train.batch_size": args.batch_size,
            "train.patience": args.patience,
            "train.learning_rate": args.learning_rate,
            "train.lambda1": args.lambda1,
            "train.loss": args.loss,
        }
    return over


def _load_dataset(cfg: RunConfig, m: int | None = None):
    if not cfg.data_path:
        raise UsageError("no data path given (flag --data or config [data] path)")
    table = read_series_csv(cfg.data_path)
    if cfg.target_column not in table.columns:
        raise UsageError(
            f"target column {cfg.target_column!r} not in {sorted(table.columns)}"
        )
    features = cfg.feature_columns or [cfg.target_column]
    for name in features:
        if name not in table.columns:
            raise UsageError(f"feature column {name!r} not in {sorted(table.columns)}")
    series = np.column_stack([table.columns[name] for name in features])
    targets = table.columns[cfg.target_column]
    return make_windows(series, targets, cfg.p, m if m is not None else cfg.m,
                        splits=(cfg.train_frac, cfg.val_frac))


def _outdir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _cmd_simulate(args) -> int:
    if args.kind == "llm":
        cfg = LlmConfig(period=args.period, n_obs=args.n or 10000, noise_var=args.noise_var,
                        level_var=args.level_var, seasonal_var=args.seasonal_var, seed=args.seed)
        sim = generate_llm(cfg)
        columns = {"value": sim.observed, "level": sim.level,
                   "seasonal": sim.seasonal, "noise": sim.noise}
        comment = (f"generator=llm seed={args.seed} period={cfg.period} n={cfg.n_obs} "
                   f"noise_var={cfg.noise_var} level_var={cfg.level_var} "
                   f"seasonal_var={cfg.seasonal_var}")
    else:
        cfg = AlphaRnnDgpConfig(order=args.order, alpha=args.alpha, weight=args.weight,
                                noise_std=args.noise_std, n_obs=args.n or 10000, seed=args.seed)
        y = generate_alpha_rnn(cfg)
        columns = {"value": y}
        comment = (f"generator=alpha-rnn-dgp seed={args.seed} order={cfg.order} "
                   f"alpha={cfg.alpha} weight={cfg.weight} noise_std={cfg.noise_std} "
                   f"n={cfg.n_obs}")
    try:
        write_series_csv(args.out, columns, comment=comment)
    except OSError as exc:
        raise DataError(f"cannot write {args.out}: {exc}") from exc
    print(f"wrote {args.out} ({len(next(iter(columns.values())))} rows)")
    return 0


def _cmd_diagnose(args) -> int:
    table = read_series_csv(args.data)
    column = args.column or next(iter(table.columns))
    if column not in table.columns:
        raise UsageError(f"column {column!r} not in {sorted(table.columns)}")
    y = table.columns[column]
    out_dir = _outdir(args.out_dir or os.environ.get("SMOOTHRNN_OUTDIR", "."))

    taus = acf(y, args.max_lag)
    pr = pacf(y, args.max_lag)
    adf = adf_test(y, args.adf_max_lag or default_adf_max_lag(len(y)))
    write_correlogram_csv(os.path.join(out_dir, "acf.csv"),
                          np.arange(args.max_lag + 1), taus, pr.band)
    write_correlogram_csv(os.path.join(out_dir, "pacf.csv"), pr.lags, pr.estimates, pr.band)

    significant = pr.significant_lags()
    recommended = int(min(significant.max(), args.max_p)) if len(significant) else 1
    verdict = "stationary" if adf.is_stationary(0.05) else "non-stationary"
    with open(os.path.join(out_dir, "adf.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"statistic={repr(adf.statistic)}\n")
        fh.write(f"lag_order={adf.lag_order}\n")
        fh.write(f"specification={adf.specification}\n")
        for level, cv in adf.critical_values.items():
            fh.write(f"reject_at_{level}={adf.rejects[level]} (critical {cv})\n")
        fh.write(f"verdict={verdict}\n")
        fh.write(f"recommended_p={recommended}\n")
    print(f"ADF statistic {adf.statistic:.3f} (lags {adf.lag_order}): {verdict}")
    print(f"significant PACF lags: {list(map(int, significant))[:12]}"
          + (" ..." if len(significant) > 12 else ""))
    print(f"recommended sequence length p = {recommended}")
    return 0


def _cmd_train(args) -> int:
    cfg = load_run_config(args.config, _run_overrides(args))
    data = _load_dataset(cfg)
    out_dir = _outdir(cfg.output_dir)

    hidden, lam = cfg.hidden_size, cfg.train.lambda1
    if cfg.cv is not None:
        cv = cross_validate(cfg.arch, data, cfg.cv, cfg.train)
        hidden, lam = cv.best_hidden, cv.best_lambda1
        print(f"cross-validation selected H={hidden}, lambda1={lam}")
    cell = init_params(cfg.arch, data.input_size, hidden, 1, cfg.p, m=cfg.m,
                       seed=cfg.seed, readout=cfg.readout, activation=cfg.activation)
    train_cfg = cfg.train
    train_cfg.lambda1 = lam
    report = fit(cell, data, train_cfg)

    ckpt_path = args.checkpoint_out or os.path.join(out_dir, f"{cfg.arch}_checkpoint.txt")
    save_params(cell, ckpt_path)
    report.checkpoint_path = ckpt_path
    report_path = os.path.join(out_dir, f"{cfg.arch}_fit_report.txt")
    write_fit_report(report, report_path)
    line = (f"trained {cfg.arch}: epochs={report.stopping_epoch} "
            f"final_loss={report.loss_trace[-1]:.6g} time={report.train_seconds:.2f}s")
    if report.alpha is not None:
        line += f" alpha={report.alpha:.4f} half_life={report.alpha_half_life:.3f}"
    print(line)
    print(f"wrote {ckpt_path} and {report_path}")
    return 0


def _cmd_forecast(args) -> int:
    cfg = load_run_config(args.config, _run_overrides(args, with_train=False))
    cell = load_params(args.checkpoint)
    if args.arch and cell.arch != args.arch:
        raise StateMismatchError(
            f"checkpoint holds a {cell.arch!r} model but {args.arch!r} was requested"
        )
    cfg.p = cell.p
    data = _load_dataset(cfg, m=cell.m if cfg.mode == "direct" else 1)
    if cfg.mode == "rolling":
        horizon = args.horizon or cfg.rolling_horizon or cell.m
        result = forecast_rolling(cell, data, horizon)
    else:
        result = forecast_direct(cell, data)
    out_dir = _outdir(cfg.output_dir)
    out_path = args.out or os.path.join(out_dir, f"{cell.arch}_forecast.csv")
    write_forecast_csv(result, out_path)
    write_metrics_summary(result, out_path.replace(".csv", "_metrics.csv"))
    print(f"{cell.arch} {result.mode}: mse={result.mse:.6g} mae={result.mae:.6g} "
          f"rmse={result.rmse:.6g} over {len(result.errors)} points")
    print(f"wrote {out_path}")
    return 0


def _cmd_evaluate(args) -> int:
    rows = []
    for item in args.inputs:
        if "=" not in item:
            raise UsageError(f"expected LABEL=FORECAST_CSV, got {item!r}")
        label, path = item.split("=", 1)
        _, observed, predicted = read_forecast_csv(path)
        err = predicted - observed
        rows.append((label, float(np.mean(err**2)), float(np.mean(np.abs(err))),
                     float(np.sqrt(np.mean(err**2))), len(err)))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("architecture,mse,mae,rmse,n\n")
        for label, mse, mae, rmse, n in rows:
            fh.write(f"{label},{repr(mse)},{repr(mae)},{repr(rmse)},{n}\n")
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def _cmd_bayes_train(args) -> int:
    cfg = load_run_config(args.config, _run_overrides(args))
    if args.elbo_samples is not None:
        cfg.bayes.n_elbo_samples = args.elbo_samples
    if cfg.bayes.n_elbo_samples < 1:
        raise UsageError("need at least one ELBO sample")
    data = _load_dataset(cfg, m=cfg.m)
    out_dir = _outdir(cfg.output_dir)
    vp, report = bayes_fit(cfg.arch, data, cfg.bayes)
    ckpt_path = args.checkpoint_out or os.path.join(out_dir, f"{cfg.arch}_bayes_checkpoint.txt")
    save_variational(vp, ckpt_path)
    write_fit_report(report, os.path.join(out_dir, f"{cfg.arch}_bayes_fit_report.txt"))
    print(f"bayes-trained {cfg.arch}: epochs={report.stopping_epoch} "
          f"final_elbo={report.elbo_trace[-1]:.6g} obs_std={report.obs_std:.6g} "
          f"time={report.train_seconds:.2f}s")
    print(f"wrote {ckpt_path}")
    return 0


def _cmd_bayes_forecast(args) -> int:
    cfg = load_run_config(args.config, _run_overrides(args, with_train=False))
    if args.n_draws is not None:
        cfg.n_draws = args.n_draws
    if args.level is not None:
        cfg.level = args.level
    if cfg.n_draws < 2:
        raise UsageError("need at least 2 posterior draws")
    vp = load_variational(args.checkpoint)
    if args.arch and vp.template.arch != args.arch:
        raise StateMismatchError(
            f"checkpoint holds a {vp.template.arch!r} model but {args.arch!r} was requested"
        )
    cfg.p = vp.template.p
    data = _load_dataset(cfg, m=vp.template.m if cfg.mode == "direct" else 1)
    result = bayes_predict(
        vp, data, n_draws=cfg.n_draws, horizon=args.horizon, mode=cfg.mode,
        level=cfg.level, include_observation_noise=cfg.include_observation_noise,
        seed=cfg.seed,
    )
    out_dir = _outdir(cfg.output_dir)
    out_path = args.out or os.path.join(out_dir, f"{vp.template.arch}_bayes_forecast.csv")
    write_predictive_csv(result, out_path)
    write_predictive_summary(result, out_path.replace(".csv", "_summary.csv"))
    print(f"{vp.template.arch} bayes {result.mode}: coverage={result.coverage:.3f} "
          f"rmse={result.rmse:.6g} mae={result.mae:.6g} at level {result.level}")
    print(f"wrote {out_path}")
    return 0


_HANDLERS = {
    "simulate": _cmd_simulate,
    "diagnose": _cmd_diagnose,
    "train": _cmd_train,
    "forecast": _cmd_forecast,
    "evaluate": _cmd_evaluate,
    "bayes-train": _cmd_bayes_train,
    "bayes-forecast": _cmd_bayes_forecast,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _HANDLERS[args.command](args)
    except SmoothRnnError as exc:
        code = next((c for t, c in EXIT_CODES.items() if isinstance(exc, t)), 1)
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
