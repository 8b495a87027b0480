"""Layered hard-thresholding forward pass and support-recovery bookkeeping."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conv_dict import ConvDictionary, MaskedDictionary, SignMask
from .errors import DimensionMismatch, KOutOfRange
from .generator import LayeredSignal, NetworkSpec, NoisyObservation
from .sparsity import column_patch_max


def hard_threshold(v: np.ndarray, k: int) -> np.ndarray:
    """Keep the ``k`` largest-magnitude entries of ``v``, zero the rest.

    Ties go to the lower index.
    """
    v = np.asarray(v, dtype=float)
    if not 0 <= k <= v.size:
        raise KOutOfRange(f"k={k} outside 0..{v.size}")
    out = np.zeros_like(v)
    keep = top_k_indices(v, k)
    out[keep] = v[keep]
    return out


def top_k_indices(v: np.ndarray, k: int) -> np.ndarray:
    """Indices hard thresholding keeps, i.e. the estimated activation."""
    return np.argsort(-np.abs(v), kind="stable")[:k]


def forward_layer(x_hat_prev: np.ndarray, dictionary: ConvDictionary, mask: SignMask, k: int) -> np.ndarray:
    op = MaskedDictionary(dictionary, mask)
    x_hat_prev = np.asarray(x_hat_prev, dtype=float)
    if x_hat_prev.shape != (dictionary.rows,):
        raise DimensionMismatch(f"expected a vector of length {dictionary.rows}, got shape {x_hat_prev.shape}")
    return hard_threshold(op.rmatvec(x_hat_prev), k)


def support_equal(a, b) -> bool:
    return set(np.asarray(a).ravel().tolist()) == set(np.asarray(b).ravel().tolist())


@dataclass
class RecoveryResult:
    """Outcome of one forward pass over ``d`` columns.

    ``support_match`` and ``errors`` have shape ``(L, d)``; row ``l-1``
    belongs to layer ``l``. ``errors`` holds the worst patch 2-norm of
    ``x_hat - x`` per column.
    """

    estimates: LayeredSignal
    support_match: np.ndarray
    errors: np.ndarray

    @property
    def pathway_recovered(self) -> np.ndarray:
        return self.support_match.all(axis=0)

    @property
    def matched_through(self) -> np.ndarray:
        """``[l-1, j]`` is true when column ``j`` matched at every layer up to ``l``."""
        return np.logical_and.accumulate(self.support_match, axis=0)


def run_forward_pass(
    obs: NoisyObservation,
    truth: LayeredSignal,
    dicts: list[ConvDictionary],
    masks: list[SignMask],
    spec: NetworkSpec,
) -> RecoveryResult:
    """Threshold every column through all layers, with ``k`` taken from the truth.

    Later layers are still evaluated after a support miss so their flags
    and errors are always defined.
    """
    L, d = spec.L, truth.d
    if obs.x_hat_0.shape != truth.layers[0].shape:
        raise DimensionMismatch("observation and truth disagree on shape")
    estimates = [obs.x_hat_0]
    match = np.zeros((L, d), dtype=bool)
    errors = np.zeros((L, d))
    for l in range(1, L + 1):
        op = MaskedDictionary(dicts[l - 1], masks[l - 1])
        corr = op.rmatvec(estimates[-1])
        X_hat = np.zeros_like(corr)
        for j in range(d):
            target = truth.supports[l][j]
            if target.size > corr.shape[0]:
                raise KOutOfRange(f"layer {l} column {j}: k={target.size} exceeds {corr.shape[0]}")
            keep = top_k_indices(corr[:, j], target.size)
            X_hat[keep, j] = corr[keep, j]
            match[l - 1, j] = support_equal(keep, target)
        errors[l - 1] = column_patch_max(X_hat - truth.layers[l], spec.patch_spec(l), 2)
        estimates.append(X_hat)
    return RecoveryResult(LayeredSignal(estimates), match, errors)
