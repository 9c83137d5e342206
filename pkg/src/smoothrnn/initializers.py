"""Seeded weight initialization: Glorot-uniform feedforward weights and
orthogonal recurrence weights."""

from __future__ import annotations

import math

import numpy as np

from .errors import UsageError

__all__ = ["make_rng", "spawn_rng", "glorot_uniform", "orthogonal"]


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic generator: equal seeds give bit-equal draw sequences."""
    return np.random.default_rng(seed)


def spawn_rng(master_seed: int, *context: int) -> np.random.Generator:
    """Generator derived from (master seed, context indices), e.g. per fold/draw."""
    return np.random.default_rng(np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(context)))


def glorot_uniform(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Uniform draws on +-sqrt(6 / (rows + cols))."""
    if rows < 1 or cols < 1:
        raise UsageError("glorot_uniform needs rows, cols >= 1")
    limit = math.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


def orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    """Orthogonalize a square Gaussian sample by modified Gram-Schmidt.

    Returns Q with Q.T @ Q = I to ~1e-12; adequate for the hidden sizes used
    here (H <= 100). Degenerate columns are re-drawn.
    """
    if n < 1:
        raise UsageError("orthogonal init needs n >= 1")
    q = np.empty((n, n))
    for j in range(n):
        while True:
            v = rng.standard_normal(n)
            for i in range(j):
                v -= (q[:, i] @ v) * q[:, i]
            # second pass restores orthogonality lost to cancellation
            for i in range(j):
                v -= (q[:, i] @ v) * q[:, i]
            norm = np.linalg.norm(v)
            if norm > 1e-8:
                break
        q[:, j] = v / norm
    return q
