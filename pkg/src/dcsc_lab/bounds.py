"""Closed-form recovery guarantees for layered hard thresholding.

Every probability returned here is clamped to ``[0, 1]``; the ``*_raw``
variants expose the unclamped value, which can exceed one and is then
vacuous.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ChainMismatch, InvalidSpec, ZeroCoherence

CHAIN_TOL = 1e-9


@dataclass(frozen=True)
class LayerBoundInputs:
    """Everything the per-layer formulas need for one layer.

    ``zeta_prev`` is the noise level entering the layer. ``support_size``
    is the worst patch nonzero count of the layer's estimate; it is only
    needed to check or extend a chain of noise levels.
    """

    x_min_mag: float
    x_max_mag: float
    mu: float
    S: int
    zeta_prev: float = 0.0
    n: int = 1
    M: int = 1
    d: int = 1
    support_size: int | None = None

    def __post_init__(self):
        if not 0 <= self.x_min_mag <= self.x_max_mag:
            raise InvalidSpec("need 0 <= x_min_mag <= x_max_mag")
        if self.S < 1:
            raise InvalidSpec("S must be >= 1")
        if not 0.0 <= self.mu <= 1.0 + 1e-12:
            raise InvalidSpec(f"coherence {self.mu} outside [0, 1]")
        if self.zeta_prev < 0:
            raise InvalidSpec("zeta_prev must be nonnegative")


def clamp_probability(p: float) -> float:
    return min(1.0, max(0.0, p))


def uniform_sparsity_bound(inputs: LayerBoundInputs) -> float:
    """Worst-case sparsity ceiling; recovery is certain when ``S`` is strictly below it."""
    if inputs.x_max_mag <= 0:
        raise InvalidSpec("x_max_mag must be positive")
    if inputs.mu == 0:
        return math.inf
    return (0.5 * inputs.x_min_mag - inputs.zeta_prev) / (inputs.mu * inputs.x_max_mag) + 0.5


def _layer_exponent(x_min, x_max, mu, S, zeta_prev) -> float:
    denom = 8.0 * (x_max**2 * mu**2 * S + zeta_prev**2)
    if denom == 0.0:
        return -math.inf if x_min > 0 else 0.0
    return -(x_min**2) / denom


def layer_failure_summand(inputs: LayerBoundInputs) -> float:
    """Unclamped ``2 n M exp(-x_min^2 / (8 (x_max^2 mu^2 S + zeta^2)))``.

    The degenerate case (zero denominator) resolves to 0 for ``x_min > 0``
    and to 1 when ``x_min == 0``.
    """
    expo = _layer_exponent(inputs.x_min_mag, inputs.x_max_mag, inputs.mu, inputs.S, inputs.zeta_prev)
    if expo == -math.inf:
        return 0.0
    if expo == 0.0 and inputs.x_min_mag == 0:
        return 1.0
    return 2.0 * inputs.n * inputs.M * math.exp(expo)


def layer_failure_bound(inputs: LayerBoundInputs) -> float:
    """Probability bound that one vector's support is missed at one layer."""
    return clamp_probability(layer_failure_summand(inputs))


def error_recursion(support_size: int, mu: float, S: int, x_max_mag: float, zeta_prev: float) -> float:
    """Noise level after a layer whose support was recovered exactly."""
    if support_size < 0 or mu < 0 or x_max_mag < 0 or zeta_prev < 0:
        raise InvalidSpec("error_recursion arguments must be nonnegative")
    return math.sqrt(support_size) * (mu * (S - 1) * x_max_mag + zeta_prev)


def zeta_chain(per_layer: Sequence[LayerBoundInputs], zeta_0: float) -> list[float]:
    """``[zeta_0, zeta_1, ..., zeta_L]`` from each layer's ``support_size``."""
    out = [float(zeta_0)]
    for layer in per_layer:
        if layer.support_size is None:
            raise InvalidSpec("support_size required to extend the chain")
        out.append(error_recursion(layer.support_size, layer.mu, layer.S, layer.x_max_mag, out[-1]))
    return out


def check_chain(per_layer: Sequence[LayerBoundInputs]) -> None:
    for prev, cur in zip(per_layer, per_layer[1:]):
        if prev.support_size is None:
            continue
        expected = error_recursion(prev.support_size, prev.mu, prev.S, prev.x_max_mag, prev.zeta_prev)
        if abs(expected - cur.zeta_prev) > CHAIN_TOL:
            raise ChainMismatch(f"zeta_prev {cur.zeta_prev} disagrees with recursion value {expected}")


def pathway_failure_summands(per_layer: Sequence[LayerBoundInputs]) -> list[float]:
    """Per-layer terms of the multi-layer bound, before the factor ``d``."""
    if not per_layer:
        raise InvalidSpec("need at least one layer")
    check_chain(per_layer)
    return [layer_failure_summand(layer) for layer in per_layer]


def pathway_failure_bound_raw(per_layer: Sequence[LayerBoundInputs]) -> float:
    """``d * sum_l 2 n_l M exp(...)``, i.e. the union bound over columns and layers."""
    summands = pathway_failure_summands(per_layer)
    ds = {layer.d for layer in per_layer}
    if len(ds) != 1:
        raise InvalidSpec(f"layers disagree on d: {sorted(ds)}")
    d = ds.pop()
    total = 0.0
    for s in summands:
        total += s
    return d * total


def pathway_failure_bound(per_layer: Sequence[LayerBoundInputs]) -> float:
    """Clamped probability that some column's activation pathway is not recovered."""
    return clamp_probability(pathway_failure_bound_raw(per_layer))


def _log_ratio(M, n, delta) -> float:
    if not 0.0 < delta < 1.0:
        raise InvalidSpec("delta must lie in (0, 1)")
    return math.log(2.0 * M * n / delta)


def admissible_sparsity(x_min_mag, x_max_mag, zeta_prev, mu, n, M, delta) -> float:
    """Largest stripe sparsity for which one layer fails with probability <= delta.

    Scales like ``mu**-2``. A nonpositive value means no sparsity is admissible.
    """
    if mu == 0:
        raise ZeroCoherence("admissible sparsity is unbounded for zero coherence")
    log_term = _log_ratio(M, n, delta)
    return (x_min_mag**2 / (8.0 * x_max_mag**2 * log_term) - zeta_prev**2 / x_max_mag**2) / mu**2


def noise_admissibility(x_min_mag, n, M, delta) -> float:
    """Noise level the layer input must stay strictly below."""
    return x_min_mag / math.sqrt(8.0 * _log_ratio(M, n, delta))


def rademacher_tail(alpha, t: float) -> float:
    """Bound on ``P(|sum_i eps_i alpha_i| > t)`` for i.i.d. Rademacher ``eps``.

    ``t = 0`` is accepted and gives the trivial value 1 (or 0 when
    ``alpha`` vanishes, since the sum is then identically zero).
    """
    if t < 0:
        raise InvalidSpec("t must be nonnegative")
    sq = float(np.dot(np.ravel(alpha), np.ravel(alpha)))
    if sq == 0.0:
        return 0.0
    return clamp_probability(2.0 * math.exp(-(t**2) / (2.0 * sq)))


def welch_bound(rows: int, cols: int) -> float:
    """Square-root-bottleneck floor ``rows**-0.5 * sqrt(1 - rows/cols)``.

    Informational only; zero when ``cols <= rows``.
    """
    if cols <= rows:
        return 0.0
    return math.sqrt((1.0 - rows / cols) / rows)
