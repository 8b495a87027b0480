"""Patch and stripe max-measures ``||x||_{alpha,inf}`` for alpha in {0, 2}.

Both operators take a run of consecutive entries with cyclic wraparound;
one window starts at every coordinate. The measure is the largest
per-window count of nonzeros (alpha=0) or Euclidean norm (alpha=2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import EmptyMatrix, InvalidAlpha, InvalidSpec


@dataclass(frozen=True)
class PatchSpec:
    patch_len: int
    vector_len: int

    def __post_init__(self):
        if self.patch_len < 1:
            raise InvalidSpec("patch_len must be >= 1")
        if self.patch_len > self.vector_len:
            raise InvalidSpec(f"patch_len {self.patch_len} exceeds vector_len {self.vector_len}")

    @property
    def window(self) -> int:
        return self.patch_len


def stripe_length(m: int, s: int, n: int) -> int:
    """``floor((2*(m/s) - 1) * n)``, evaluated exactly before flooring."""
    return math.floor((2 * Fraction(m, s) - 1) * n)


@dataclass(frozen=True)
class StripeSpec:
    stripe_len: int
    vector_len: int

    def __post_init__(self):
        if self.stripe_len < 1:
            raise InvalidSpec(f"stripe length {self.stripe_len} is not positive")
        if self.stripe_len > self.vector_len:
            raise InvalidSpec(f"stripe_len {self.stripe_len} exceeds vector_len {self.vector_len}")

    @classmethod
    def for_layer(cls, m: int, s: int, n: int, vector_len: int) -> "StripeSpec":
        return cls(stripe_length(m, s, n), vector_len)

    @property
    def window(self) -> int:
        return self.stripe_len


def _check_alpha(alpha) -> int:
    if alpha not in (0, 2):
        raise InvalidAlpha(f"alpha must be 0 or 2, got {alpha!r}")
    return int(alpha)


def _neumaier_sum(terms: np.ndarray) -> np.ndarray:
    """Compensated sum over the last axis, vectorized over the rest."""
    total = np.zeros(terms.shape[:-1])
    comp = np.zeros_like(total)
    for k in range(terms.shape[-1]):
        x = terms[..., k]
        t = total + x
        big = np.abs(total) >= np.abs(x)
        comp += np.where(big, (total - t) + x, (x - t) + total)
        total = t
    return total + comp


def window_measures(X: np.ndarray, window: int, alpha) -> np.ndarray:
    """Per-window measures of every column of ``X``.

    Returns an array of shape ``(len, ncols)`` (or ``(len,)`` for a vector)
    whose row ``i`` is the measure of the window starting at index ``i``.
    """
    alpha = _check_alpha(alpha)
    X = np.asarray(X, dtype=float)
    vec = X.ndim == 1
    if vec:
        X = X[:, None]
    N = X.shape[0]
    if not 1 <= window <= N:
        raise InvalidSpec(f"window {window} invalid for length {N}")
    wrapped = np.concatenate([X, X[: window - 1]], axis=0)
    win = sliding_window_view(wrapped, window, axis=0)  # (N, ncols, window)
    if alpha == 0:
        out = np.count_nonzero(win, axis=-1).astype(float)
    else:
        out = np.sqrt(_neumaier_sum(win * win))
    return out[:, 0] if vec else out


def _column_max(X, spec, alpha) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[0] != spec.vector_len:
        raise InvalidSpec(f"vector length {X.shape[0]} does not match spec length {spec.vector_len}")
    return window_measures(X, spec.window, alpha).max(axis=0)


def patch_max_norm(x: np.ndarray, spec: PatchSpec, alpha=2) -> float:
    """Largest patch measure of ``x`` over all wraparound start positions."""
    return float(_column_max(np.ravel(x), spec, alpha))


def stripe_max_norm(x: np.ndarray, spec: StripeSpec, alpha=0) -> float:
    return float(_column_max(np.ravel(x), spec, alpha))


def column_patch_max(X: np.ndarray, spec: PatchSpec, alpha=2) -> np.ndarray:
    """``patch_max_norm`` of every column of a matrix."""
    return _column_max(np.asarray(X).reshape(spec.vector_len, -1), spec, alpha)


def column_stripe_max(X: np.ndarray, spec: StripeSpec, alpha=0) -> np.ndarray:
    return _column_max(np.asarray(X).reshape(spec.vector_len, -1), spec, alpha)


def matrix_stripe_max(X: np.ndarray, spec: StripeSpec, alpha=0) -> float:
    """Max over columns of :func:`stripe_max_norm`."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] == 0:
        raise EmptyMatrix("matrix has no columns")
    return float(_column_max(X, spec, alpha).max())
