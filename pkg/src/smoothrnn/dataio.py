"""CSV interchange and plain-text report files.

One tabular format everywhere: '#' comment lines, then a header row, then
rows whose first column may be a timestamp (ISO-8601 or an integer index) with
every other column numeric. Floats are written with ``repr`` so identical runs
produce byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .forecasting import ForecastResult

__all__ = [
    "TableData",
    "read_series_csv",
    "write_series_csv",
    "write_forecast_csv",
    "read_forecast_csv",
    "write_metrics_summary",
    "write_correlogram_csv",
    "write_fit_report",
    "write_predictive_csv",
    "write_predictive_summary",
]

_TIMESTAMP_NAMES = {"timestamp", "time", "date", "datetime", "index", "t"}


def _fmt(value: float) -> str:
    return repr(float(value))


@dataclass
class TableData:
    timestamps: list[str] | None
    columns: dict[str, np.ndarray]

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values())))


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def read_series_csv(path) -> TableData:
    """Parse a data CSV; raises DataError with a row/column diagnostic."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw_lines = fh.readlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    lines = [(i + 1, ln.rstrip("\n")) for i, ln in enumerate(raw_lines)]
    lines = [(no, ln) for no, ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise DataError(f"{path}: no header row found")
    header_no, header = lines[0]
    names = [c.strip() for c in header.split(",")]
    if len(names) < 1 or any(not n for n in names):
        raise DataError(f"{path}: line {header_no}: malformed header row")
    body = lines[1:]
    if not body:
        raise DataError(f"{path}: no data rows")

    first_fields = body[0][1].split(",")
    if len(first_fields) != len(names):
        raise DataError(
            f"{path}: line {body[0][0]}: expected {len(names)} fields, got {len(first_fields)}"
        )
    has_timestamp = names[0].lower() in _TIMESTAMP_NAMES or not _is_number(first_fields[0])

    timestamps: list[str] | None = [] if has_timestamp else None
    data_names = names[1:] if has_timestamp else names
    values = {name: [] for name in data_names}
    for line_no, row in body:
        fields = [f.strip() for f in row.split(",")]
        if len(fields) != len(names):
            raise DataError(
                f"{path}: line {line_no}: expected {len(names)} fields, got {len(fields)}"
            )
        if has_timestamp:
            timestamps.append(fields[0])
            fields = fields[1:]
        for name, token in zip(data_names, fields):
            try:
                values[name].append(float(token))
            except ValueError as exc:
                raise DataError(
                    f"{path}: line {line_no}: column {name!r}: not a number: {token!r}"
                ) from exc
    return TableData(
        timestamps=timestamps,
        columns={name: np.asarray(v, dtype=np.float64) for name, v in values.items()},
    )


def write_series_csv(path, columns: dict, timestamps=None, comment: str | None = None) -> None:
    names = list(columns)
    arrays = [np.asarray(columns[n], dtype=np.float64) for n in names]
    n = len(arrays[0])
    if timestamps is None:
        timestamps = range(n)
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write("timestamp," + ",".join(names) + "\n")
        for i, ts in enumerate(timestamps):
            fh.write(str(ts) + "," + ",".join(_fmt(a[i]) for a in arrays) + "\n")


def write_forecast_csv(result: ForecastResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("timestamp,observed,predicted,error\n")
        for i in range(len(result.predictions)):
            fh.write(
                f"{int(result.target_rows[i])},{_fmt(result.observed[i])},"
                f"{_fmt(result.predictions[i])},{_fmt(result.errors[i])}\n"
            )


def read_forecast_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    table = read_series_csv(path)
    for needed in ("observed", "predicted"):
        if needed not in table.columns:
            raise DataError(f"{path}: missing column {needed!r}")
    observed = table.columns["observed"]
    predicted = table.columns["predicted"]
    rows = np.asarray([int(float(t)) for t in table.timestamps or range(len(observed))])
    return rows, observed, predicted


def write_metrics_summary(result: ForecastResult, path, extra: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("metric,value\n")
        fh.write(f"mse,{_fmt(result.mse)}\n")
        fh.write(f"mae,{_fmt(result.mae)}\n")
        fh.write(f"rmse,{_fmt(result.rmse)}\n")
        fh.write(f"n,{len(result.errors)}\n")
        for key, value in (extra or {}).items():
            fh.write(f"{key},{_fmt(value) if isinstance(value, float) else value}\n")


def write_correlogram_csv(path, lags, estimates, band: float) -> None:
    """Lag/estimate/band rows for plotting ACF or PACF output."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("lag,estimate,band\n")
        for lag, est in zip(lags, estimates):
            fh.write(f"{int(lag)},{_fmt(est)},{_fmt(band)}\n")


def write_fit_report(report, path) -> None:
    """Key-value header plus a CSV loss trace.

    Wall-clock time is deliberately omitted so identical runs produce
    byte-identical files; it is available on the in-memory report.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"stopping_epoch={report.stopping_epoch}\n")
        fh.write(f"batch_updates={report.batch_updates}\n")
        if getattr(report, "alpha", None) is not None:
            fh.write(f"alpha={_fmt(report.alpha)}\n")
        if getattr(report, "alpha_half_life", None) is not None:
            fh.write(f"alpha_half_life={_fmt(report.alpha_half_life)}\n")
        if getattr(report, "checkpoint_path", None):
            fh.write(f"checkpoint={report.checkpoint_path}\n")
        fh.write("epoch,loss\n")
        trace = getattr(report, "loss_trace", None) or getattr(report, "elbo_trace")
        for i, loss in enumerate(trace, start=1):
            fh.write(f"{i},{_fmt(loss)}\n")


def write_predictive_csv(result, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("timestamp,observed,mean,std,lower,upper,inside\n")
        inside = (result.observed >= result.lower) & (result.observed <= result.upper)
        for i in range(len(result.mean)):
            fh.write(
                f"{int(result.target_rows[i])},{_fmt(result.observed[i])},"
                f"{_fmt(result.mean[i])},{_fmt(result.total_std[i])},"
                f"{_fmt(result.lower[i])},{_fmt(result.upper[i])},{int(inside[i])}\n"
            )


def write_predictive_summary(result, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("metric,value\n")
        fh.write(f"level,{_fmt(result.level)}\n")
        fh.write(f"coverage,{_fmt(result.coverage)}\n")
        fh.write(f"rmse,{_fmt(result.rmse)}\n")
        fh.write(f"mae,{_fmt(result.mae)}\n")
        fh.write(f"mean_predictive_std,{_fmt(result.mean_predictive_std)}\n")
        fh.write(f"n,{len(result.mean)}\n")
