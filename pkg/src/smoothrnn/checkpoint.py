"""Versioned plain-text parameter checkpoints.

Layout::

    smoothrnn-checkpoint v1
    arch=alpha_rnn d=1 H=5 n=1 p=30 m=1 readout=smoothed activation=tanh
    W_h 5 1
    <one row per line, values separated by single spaces>
    ...

Values are written with ``repr`` (shortest float64 round-trip), so a
save/load cycle is bit-exact.
"""

from __future__ import annotations

import numpy as np

from .cells import ARCHITECTURES, CellParams
from .errors import DataError, StateMismatchError

__all__ = ["save_params", "load_params", "params_to_text", "params_from_text"]

_MAGIC = "smoothrnn-checkpoint v1"


def _format_block(name: str, arr: np.ndarray) -> list[str]:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        lines = [f"{name} {arr.shape[0]}"]
        lines.append(" ".join(repr(float(v)) for v in arr))
    else:
        lines = [f"{name} {arr.shape[0]} {arr.shape[1]}"]
        for row in arr:
            lines.append(" ".join(repr(float(v)) for v in row))
    return lines


def params_to_text(params: CellParams) -> str:
    header = (
        f"arch={params.arch} d={params.input_size} H={params.hidden_size} "
        f"n={params.output_size} p={params.p} m={params.m} "
        f"readout={params.readout} activation={params.activation}"
    )
    lines = [_MAGIC, header]
    for name, arr in params.named_arrays():
        lines.extend(_format_block(name, arr))
    return "\n".join(lines) + "\n"


def params_from_text(text: str) -> CellParams:
    lines = text.splitlines()
    if not lines or lines[0].strip() != _MAGIC:
        raise StateMismatchError("not a smoothrnn checkpoint (bad magic line)")
    try:
        fields = dict(part.split("=", 1) for part in lines[1].split())
        arch = fields["arch"]
        d, H, n = int(fields["d"]), int(fields["H"]), int(fields["n"])
        p, m = int(fields["p"]), int(fields["m"])
        readout = fields.get("readout", "smoothed")
        activation = fields.get("activation", "tanh")
    except (KeyError, ValueError, IndexError) as exc:
        raise StateMismatchError(f"malformed checkpoint header: {exc}") from exc
    if arch not in ARCHITECTURES:
        raise StateMismatchError(f"checkpoint declares unknown architecture {arch!r}")

    arrays: dict[str, np.ndarray] = {}
    i = 2
    while i < len(lines):
        head = lines[i].split()
        if not head:
            i += 1
            continue
        name = head[0]
        try:
            if len(head) == 2:
                length = int(head[1])
                arr = np.array([float(v) for v in lines[i + 1].split()])
                if arr.shape != (length,):
                    raise ValueError(f"expected {length} values for {name}")
                i += 2
            elif len(head) == 3:
                rows, cols = int(head[1]), int(head[2])
                arr = np.array(
                    [[float(v) for v in lines[i + 1 + r].split()] for r in range(rows)]
                )
                if arr.shape != (rows, cols):
                    raise ValueError(f"expected {rows}x{cols} values for {name}")
                i += 1 + rows
            else:
                raise ValueError(f"malformed block header {lines[i]!r}")
        except (ValueError, IndexError) as exc:
            raise StateMismatchError(f"malformed checkpoint block {name!r}: {exc}") from exc
        arrays[name] = arr

    required = {"W_h", "U_h", "b_h", "W_y", "b_y"}
    missing = required - set(arrays)
    if missing:
        raise StateMismatchError(f"checkpoint missing arrays: {sorted(missing)}")
    params = CellParams(
        arch=arch, p=p, m=m, readout=readout, activation=activation,
        W_h=arrays.pop("W_h"), U_h=arrays.pop("U_h"), b_h=arrays.pop("b_h"),
        W_y=arrays.pop("W_y"), b_y=arrays.pop("b_y"),
    )
    for name, arr in arrays.items():
        if not hasattr(params, name):
            raise StateMismatchError(f"checkpoint contains unknown array {name!r}")
        setattr(params, name, arr)
    if params.input_size != d or params.hidden_size != H or params.output_size != n:
        raise StateMismatchError("checkpoint header shapes disagree with stored arrays")
    return params


def save_params(params: CellParams, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(params_to_text(params))


def load_params(path) -> CellParams:
    try:
        with open(path, "r", encoding="ascii") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    return params_from_text(text)


# -- variational checkpoints ----------------------------------------------------

_BAYES_MAGIC = "smoothrnn-bayes-checkpoint v1"


def save_variational(vp, path) -> None:
    """Posterior (mu, rho) blocks appended to the template checkpoint text."""
    from .bayes import VariationalParams  # local: keep module load order flexible

    assert isinstance(vp, VariationalParams)
    lines = [_BAYES_MAGIC]
    lines.append(
        f"prior pi={repr(float(vp.prior.pi))} sigma1={repr(float(vp.prior.sigma1))} "
        f"sigma2={repr(float(vp.prior.sigma2))} obs_std={repr(float(vp.obs_std))}"
    )
    template_text = params_to_text(vp.template)
    lines.append(f"template {len(template_text.splitlines())}")
    lines.extend(template_text.splitlines())
    for name, arr in vp.mu.items():
        lines.extend(_format_block(f"mu:{name}", arr))
    for name, arr in vp.rho.items():
        lines.extend(_format_block(f"rho:{name}", arr))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_variational(path):
    from .bayes import MixturePrior, VariationalParams

    try:
        with open(path, "r", encoding="ascii") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    if not lines or lines[0].strip() != _BAYES_MAGIC:
        raise StateMismatchError("not a smoothrnn variational checkpoint")
    try:
        head = dict(part.split("=", 1) for part in lines[1].split()[1:])
        prior = MixturePrior(pi=float(head["pi"]), sigma1=float(head["sigma1"]),
                             sigma2=float(head["sigma2"]))
        obs_std = float(head["obs_std"])
        n_template = int(lines[2].split()[1])
    except (KeyError, ValueError, IndexError) as exc:
        raise StateMismatchError(f"malformed variational header: {exc}") from exc
    template = params_from_text("\n".join(lines[3 : 3 + n_template]))

    mu: dict[str, np.ndarray] = {}
    rho: dict[str, np.ndarray] = {}
    i = 3 + n_template
    while i < len(lines):
        head = lines[i].split()
        if not head:
            i += 1
            continue
        name = head[0]
        try:
            kind, base = name.split(":", 1)
            if len(head) == 2:
                arr = np.array([float(v) for v in lines[i + 1].split()])
                i += 2
            else:
                rows = int(head[1])
                arr = np.array(
                    [[float(v) for v in lines[i + 1 + r].split()] for r in range(rows)]
                )
                i += 1 + rows
        except (ValueError, IndexError) as exc:
            raise StateMismatchError(f"malformed variational block {name!r}: {exc}") from exc
        (mu if kind == "mu" else rho)[base] = arr
    if set(mu) != set(rho) or set(mu) != {n for n, _ in template.named_arrays()}:
        raise StateMismatchError("variational checkpoint arrays do not match the template")
    return VariationalParams(template=template, mu=mu, rho=rho, prior=prior, obs_std=obs_std)
