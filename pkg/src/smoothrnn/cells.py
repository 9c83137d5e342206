"""Forward recurrences for the six architectures.

Architectures
-------------
``rnn``
    plain Elman cell, hidden state reset at each window start.
``es_rnn``
    plain cell plus exponential smoothing on the output path only; the
    smoothed state is **not** fed back into the recurrence.
``alpha_rnn``
    the recurrence consumes the exponentially smoothed hidden state
    ``h_tilde = alpha * h_hat + (1 - alpha) * h_tilde_prev`` with one trainable
    scalar ``alpha`` in (0, 1).
``alpha_t_rnn``
    per-step smoothing vector produced by its own sigmoid recurrent layer;
    a GRU without the reset gate.
``gru``
    adds the reset gate applied to the smoothed state before the recurrence
    matrix.
``lstm``
    separate cell memory, updated by forget/input gates, hidden state gated
    by the reset (output) gate.

Windows are evaluated statelessly (zero prior smoothed state) for training and
forecasting. ``stateful_trajectory`` additionally carries the smoothed state
across consecutive windows: the window ending at time t starts its smoothing
from the state recorded at time t - p, and the first in-window hidden update
carries no recurrence term. That carry is what gives the smoothed cells memory
beyond the window length; with alpha = 1 it is annihilated exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import tape as T
from .errors import UsageError
from .initializers import glorot_uniform, make_rng, orthogonal

__all__ = [
    "ARCHITECTURES",
    "SMOOTHED_ARCHITECTURES",
    "ALPHA_RAW_INIT",
    "CellParams",
    "CellState",
    "init_params",
    "zero_state",
    "step",
    "step_plain_rnn",
    "step_es_rnn",
    "step_alpha_rnn",
    "step_alpha_t_rnn",
    "step_gru",
    "step_lstm",
    "forward_sequence",
    "forward_batch",
    "wrap_params",
    "stateful_trajectory",
    "exponential_smooth",
    "half_life",
]

ARCHITECTURES = ("rnn", "es_rnn", "alpha_rnn", "alpha_t_rnn", "gru", "lstm")

# cells whose readout state is the smoothed h_tilde
SMOOTHED_ARCHITECTURES = ("es_rnn", "alpha_rnn", "alpha_t_rnn", "gru")

# sigmoid(3.0) ~ 0.953: training starts close to a plain RNN and may discover memory
ALPHA_RAW_INIT = 3.0

_GATE_TRIPLES = {
    "alpha_t_rnn": ("a",),
    "gru": ("a", "r"),
    "lstm": ("a", "r", "z", "c"),
}


@dataclass
class CellParams:
    """All trainable arrays of one recurrent architecture.

    ``alpha_raw`` is stored unconstrained and mapped through the logistic
    sigmoid, so plain gradient descent keeps alpha inside (0, 1).
    """

    arch: str
    p: int
    m: int
    W_h: np.ndarray
    U_h: np.ndarray
    b_h: np.ndarray
    W_y: np.ndarray
    b_y: np.ndarray
    alpha_raw: np.ndarray | None = None
    W_a: np.ndarray | None = None
    U_a: np.ndarray | None = None
    b_a: np.ndarray | None = None
    W_r: np.ndarray | None = None
    U_r: np.ndarray | None = None
    b_r: np.ndarray | None = None
    W_z: np.ndarray | None = None
    U_z: np.ndarray | None = None
    b_z: np.ndarray | None = None
    W_c: np.ndarray | None = None
    U_c: np.ndarray | None = None
    b_c: np.ndarray | None = None
    readout: str = "smoothed"
    activation: str = "tanh"

    @property
    def hidden_size(self) -> int:
        return self.W_h.shape[0]

    @property
    def input_size(self) -> int:
        return self.W_h.shape[1]

    @property
    def output_size(self) -> int:
        return self.W_y.shape[0]

    @property
    def alpha(self) -> float:
        """The smoothing scalar sigmoid(alpha_raw); cells without one get 1.0."""
        if self.alpha_raw is None:
            return 1.0
        return float(T.sigmoid(self.alpha_raw).reshape(()))

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        """(name, array) for every trainable array present, in a fixed order."""
        out = []
        for name in ARRAY_ORDER:
            arr = getattr(self, name)
            if arr is not None:
                out.append((name, arr))
        return out

    def weight_matrix_names(self) -> list[str]:
        """Arrays the L1 penalty covers: weight matrices, never biases or alpha."""
        return [
            name
            for name, _ in self.named_arrays()
            if name.startswith(("W_", "U_"))
        ]

    def copy(self) -> "CellParams":
        kwargs = {name: arr.copy() for name, arr in self.named_arrays()}
        return replace(self, **kwargs)


ARRAY_ORDER = (
    "W_h", "U_h", "b_h", "W_y", "b_y", "alpha_raw",
    "W_a", "U_a", "b_a", "W_r", "U_r", "b_r",
    "W_z", "U_z", "b_z", "W_c", "U_c", "b_c",
)


@dataclass
class CellState:
    """Per-step cell state: unsmoothed h_hat, smoothed h_tilde, and, where the
    architecture has them, the cell memory and the last smoothing vector."""

    h_hat: np.ndarray
    h_tilde: np.ndarray
    cell_memory: np.ndarray | None = None
    alpha_t: np.ndarray | None = None


def _check_arch(arch: str) -> None:
    if arch not in ARCHITECTURES:
        raise UsageError(f"unknown architecture {arch!r}; expected one of {ARCHITECTURES}")


def init_params(
    arch: str,
    input_size: int,
    hidden_size: int,
    output_size: int,
    p: int,
    m: int = 1,
    seed: int = 0,
    readout: str = "smoothed",
    activation: str = "tanh",
) -> CellParams:
    """Glorot-uniform feedforward weights, orthogonal recurrence weights,
    zero biases, alpha started near 1."""
    _check_arch(arch)
    if p < 1:
        raise UsageError("sequence length p must be >= 1")
    if readout not in ("smoothed", "unsmoothed"):
        raise UsageError(f"unknown readout {readout!r}")
    if activation not in ("tanh", "identity"):
        raise UsageError(f"unknown activation {activation!r}")
    rng = make_rng(seed)
    d, H, n = input_size, hidden_size, output_size
    params = CellParams(
        arch=arch,
        p=p,
        m=m,
        W_h=glorot_uniform(rng, H, d),
        U_h=orthogonal(rng, H),
        b_h=np.zeros(H),
        W_y=glorot_uniform(rng, n, H),
        b_y=np.zeros(n),
        readout=readout,
        activation=activation,
    )
    if arch in ("es_rnn", "alpha_rnn"):
        params.alpha_raw = np.full((1, 1), ALPHA_RAW_INIT)
    for gate in _GATE_TRIPLES.get(arch, ()):
        setattr(params, f"W_{gate}", glorot_uniform(rng, H, d))
        setattr(params, f"U_{gate}", orthogonal(rng, H))
        setattr(params, f"b_{gate}", np.zeros(H))
    return params


def zero_state(params: CellParams) -> CellState:
    H = params.hidden_size
    return CellState(
        h_hat=np.zeros(H),
        h_tilde=np.zeros(H),
        cell_memory=np.zeros(H) if params.arch == "lstm" else None,
        alpha_t=None,
    )


# -- forward machinery --------------------------------------------------------
#
# The same step code runs on plain ndarrays and on tape Vars; states are kept
# as (H, B) columns so one path serves both the single-vector public API and
# the mini-batch training path.


def _identity(x):
    return x


def _act_fn(activation: str):
    return T.tanh if activation == "tanh" else _identity


def _col(v):
    length = T.value_of(v).shape[0]
    return T.reshape(v, (length, 1))


class _Wrapped:
    """Attribute view over tape-wrapped parameter arrays."""

    def __init__(self, mapping):
        self.__dict__.update(mapping)


def param_view(mapping: dict, like: CellParams):
    """Attribute view exposing ``mapping`` arrays with ``like``'s metadata, so
    the forward functions can run on substituted (e.g. sampled) parameters."""
    view = _Wrapped(dict(mapping))
    view.arch = like.arch
    view.readout = like.readout
    view.activation = like.activation
    return view


def wrap_params(tp: T.Tape, params: CellParams):
    """Register every trainable array on the tape; returns (view, name->Var)."""
    varmap = {name: tp.param(arr) for name, arr in params.named_arrays()}
    return param_view(varmap, params), varmap


def _step_core(P, arch, act, h_hat, h_tilde, cell, x, alpha=None, first=False):
    """One recurrence step; ``first`` drops the recurrence term of h_hat
    (the window starting condition)."""
    if arch == "rnn":
        pre = P.W_h @ x + _col(P.b_h) if first else P.W_h @ x + P.U_h @ h_hat + _col(P.b_h)
        nh = act(pre)
        return nh, nh, None, None
    if arch == "es_rnn":
        pre = P.W_h @ x + _col(P.b_h) if first else P.W_h @ x + P.U_h @ h_hat + _col(P.b_h)
        nh = act(pre)
        nt = alpha * nh + (1.0 - alpha) * h_tilde
        return nh, nt, None, None
    if arch == "alpha_rnn":
        pre = P.W_h @ x + _col(P.b_h) if first else P.W_h @ x + P.U_h @ h_tilde + _col(P.b_h)
        nh = act(pre)
        nt = alpha * nh + (1.0 - alpha) * h_tilde
        return nh, nt, None, None
    if arch == "alpha_t_rnn":
        a_t = T.sigmoid(P.U_a @ h_tilde + P.W_a @ x + _col(P.b_a))
        pre = P.W_h @ x + _col(P.b_h) if first else P.U_h @ h_tilde + P.W_h @ x + _col(P.b_h)
        nh = act(pre)
        nt = a_t * nh + (1.0 - a_t) * h_tilde
        return nh, nt, None, a_t
    if arch == "gru":
        r_t = T.sigmoid(P.U_r @ h_tilde + P.W_r @ x + _col(P.b_r))
        a_t = T.sigmoid(P.U_a @ h_tilde + P.W_a @ x + _col(P.b_a))
        pre = P.W_h @ x + _col(P.b_h) if first else P.U_h @ (r_t * h_tilde) + P.W_h @ x + _col(P.b_h)
        nh = act(pre)
        nt = a_t * nh + (1.0 - a_t) * h_tilde
        return nh, nt, None, a_t
    if arch == "lstm":
        r_t = T.sigmoid(P.U_r @ h_tilde + P.W_r @ x + _col(P.b_r))
        a_t = T.sigmoid(P.U_a @ h_tilde + P.W_a @ x + _col(P.b_a))
        z_t = T.sigmoid(P.U_z @ h_tilde + P.W_z @ x + _col(P.b_z))
        c_hat = act(P.U_c @ h_tilde + P.W_c @ x + _col(P.b_c))
        c_new = a_t * cell + z_t * c_hat
        h_new = r_t * act(c_new)
        return c_hat, h_new, c_new, a_t
    raise UsageError(f"unknown architecture {arch!r}")


def _forward_columns(P, arch, act, xs, carry_tilde=None, carry_cell=None):
    """Run a window of (d, B) columns; returns final (h_hat, h_tilde, cell, a_t).

    ``carry_tilde``/``carry_cell`` seed the smoothed state / cell memory; when
    None they start at zero, the stateless window convention.
    """
    H = T.value_of(P.W_h).shape[0]
    B = xs[0].shape[1]
    h_hat = np.zeros((H, B))
    h_tilde = carry_tilde if carry_tilde is not None else np.zeros((H, B))
    cell = carry_cell if carry_cell is not None else np.zeros((H, B))
    alpha = T.sigmoid(P.alpha_raw) if getattr(P, "alpha_raw", None) is not None else None
    a_t = None
    for s, x in enumerate(xs):
        h_hat, h_tilde, cell, a_t = _step_core(
            P, arch, act, h_hat, h_tilde, cell, x, alpha=alpha, first=(s == 0)
        )
    return h_hat, h_tilde, cell, a_t


def _readout_state(arch, readout, h_hat, h_tilde):
    if arch == "rnn":
        return h_hat
    if arch == "lstm":
        return h_tilde  # h_t lives in the h_tilde slot
    return h_hat if readout == "unsmoothed" else h_tilde


def forward_batch(P, xs: Sequence[np.ndarray]):
    """Predictions (n, B) for a window given as p arrays of shape (d, B).

    ``P`` is a CellParams or a tape-wrapped view; the caller picks traced or
    untraced execution by that choice.
    """
    act = _act_fn(P.activation)
    h_hat, h_tilde, _, _ = _forward_columns(P, P.arch, act, xs)
    state = _readout_state(P.arch, P.readout, h_hat, h_tilde)
    return P.W_y @ state + _col(P.b_y)


def forward_sequence(params: CellParams, window) -> np.ndarray:
    """Prediction vector for one input window of ``params.p`` input vectors.

    The window starts from a zero prior smoothed state; the readout is the
    smoothed state for smoothed cells, h_hat for the plain RNN, and h_t for
    the LSTM (flip ``params.readout`` to read the unsmoothed state instead).
    """
    window = np.atleast_2d(np.asarray(window, dtype=np.float64))
    if window.size == 0:
        raise UsageError("empty input window")
    if window.shape[0] == 1 and params.p > 1 and window.shape[1] == params.p:
        window = window.T
    if window.shape[0] != params.p:
        raise UsageError(f"window length {window.shape[0]} != configured p={params.p}")
    if window.shape[1] != params.input_size:
        raise UsageError(
            f"window feature size {window.shape[1]} != input size {params.input_size}"
        )
    xs = [window[s].reshape(-1, 1) for s in range(params.p)]
    return forward_batch(params, xs).reshape(-1)


# -- single-step public API ---------------------------------------------------


def _state_columns(params: CellParams, state: CellState):
    H = params.hidden_size
    for name, vec in (("h_hat", state.h_hat), ("h_tilde", state.h_tilde)):
        if np.asarray(vec).shape != (H,):
            raise UsageError(f"state {name} must have shape ({H},)")
    cell = state.cell_memory
    if params.arch == "lstm":
        if cell is None:
            cell = np.zeros(H)
        cell = np.asarray(cell, dtype=np.float64).reshape(H, 1)
    else:
        cell = None
    return (
        np.asarray(state.h_hat, dtype=np.float64).reshape(H, 1),
        np.asarray(state.h_tilde, dtype=np.float64).reshape(H, 1),
        cell,
    )


def step(params: CellParams, state: CellState, x) -> CellState:
    """Advance one time step; dispatches on ``params.arch``."""
    _check_arch(params.arch)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != params.input_size:
        raise UsageError(f"input size {x.shape[0]} != expected {params.input_size}")
    h_hat, h_tilde, cell = _state_columns(params, state)
    act = _act_fn(params.activation)
    alpha = T.sigmoid(params.alpha_raw) if params.alpha_raw is not None else None
    nh, nt, nc, na = _step_core(
        params, params.arch, act, h_hat, h_tilde, cell, x.reshape(-1, 1), alpha=alpha
    )
    return CellState(
        h_hat=nh.reshape(-1),
        h_tilde=nt.reshape(-1),
        cell_memory=None if nc is None else nc.reshape(-1),
        alpha_t=None if na is None else na.reshape(-1),
    )


def _named_step(arch: str):
    def run(params: CellParams, state: CellState, x) -> CellState:
        if params.arch != arch:
            raise UsageError(f"parameters are for {params.arch!r}, not {arch!r}")
        return step(params, state, x)

    return run


step_plain_rnn = _named_step("rnn")
step_es_rnn = _named_step("es_rnn")
step_alpha_rnn = _named_step("alpha_rnn")
step_alpha_t_rnn = _named_step("alpha_t_rnn")
step_gru = _named_step("gru")
step_lstm = _named_step("lstm")


# -- cross-window stateful evaluation ------------------------------------------


@dataclass
class StatefulTrajectory:
    """Per-time readout states and predictions from sliding stateful windows."""

    states: np.ndarray  # (T, H) readout state at each time
    predictions: np.ndarray  # (T, n)
    smoothed: np.ndarray  # (T, H) smoothed state recorded at each time


def stateful_trajectory(params: CellParams, series) -> StatefulTrajectory:
    """Slide a p-window over ``series`` carrying the smoothed state across windows.

    The window ending at time t seeds its smoothing with the smoothed state
    recorded at time t - p (zero before the start). The plain RNN carries
    nothing and therefore forgets any input after p lags; smoothed cells do not.
    """
    if params.arch == "lstm":
        raise UsageError("stateful trajectory is not defined for the lstm cell")
    series = np.asarray(series, dtype=np.float64)
    if series.ndim == 1:
        series = series[:, None]
    n_obs, d = series.shape
    if d != params.input_size:
        raise UsageError(f"series feature size {d} != input size {params.input_size}")
    p, H, n = params.p, params.hidden_size, params.output_size
    act = _act_fn(params.activation)
    padded = np.vstack([np.zeros((p - 1, d)), series])
    smoothed_hist = np.zeros((n_obs, H))
    states = np.zeros((n_obs, H))
    preds = np.zeros((n_obs, n))
    W_y, b_y = params.W_y, params.b_y.reshape(-1, 1)
    for t in range(n_obs):
        carry = smoothed_hist[t - p].reshape(H, 1) if t - p >= 0 else None
        xs = [padded[t + s].reshape(d, 1) for s in range(p)]
        h_hat, h_tilde, _, _ = _forward_columns(params, params.arch, act, xs, carry_tilde=carry)
        smoothed_hist[t] = h_tilde.reshape(-1)
        state = _readout_state(params.arch, params.readout, h_hat, h_tilde)
        states[t] = state.reshape(-1)
        preds[t] = (W_y @ state + b_y).reshape(-1)
    return StatefulTrajectory(states=states, predictions=preds, smoothed=smoothed_hist)


# -- smoothing utilities --------------------------------------------------------


def exponential_smooth(values, alpha, init=0.0) -> np.ndarray:
    """Run h_tilde[s] = alpha[s] * values[s] + (1 - alpha[s]) * h_tilde[s-1].

    ``alpha`` is a scalar or a per-step sequence; ``init`` seeds h_tilde[-1].
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    alphas = np.asarray(alpha, dtype=np.float64)
    if alphas.ndim == 0:
        alphas = np.full(n, float(alphas))
    elif alphas.shape != (n,):
        raise UsageError("per-step smoothing weights must match the value count")
    if np.any((alphas < 0.0) | (alphas > 1.0)):
        raise UsageError("smoothing weights must lie in [0, 1]")
    out = np.empty_like(values)
    prev = (
        np.broadcast_to(np.asarray(init, dtype=np.float64), values.shape[1:]).copy()
        if values.ndim > 1
        else float(init)
    )
    for s in range(n):
        prev = alphas[s] * values[s] + (1.0 - alphas[s]) * prev
        out[s] = prev
    return out


def half_life(alpha: float) -> float:
    """Number of lags for the smoothing coefficient (1 - alpha)^s to reach 1/2."""
    if not (0.0 < alpha < 1.0):
        raise UsageError("half_life requires 0 < alpha < 1")
    return -1.0 / math.log2(1.0 - alpha)
