"""Ground-truth layered signals and noisy observations.

The deepest code ``X^(L)`` is drawn under its stripe budget; shallower
layers follow from ``X^(l-1) = A^(l) D^(l) X^(l)``. Columns whose
intermediate layers break their stripe budget or magnitude band are
redrawn.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .conv_dict import ConvDictionary, MaskedDictionary, SignMask
from .errors import ConstraintUnsatisfiable, DimensionMismatch, IncompatibleStride, InvalidSpec
from .sparsity import PatchSpec, StripeSpec, column_patch_max, stripe_length, window_measures

MAX_RETRIES = 1000


@dataclass(frozen=True)
class LayerSpec:
    m: int
    n: int
    S: int
    x_min: float
    x_max: float
    s: int | None = None  # stride; None picks the default for the layer


@dataclass(frozen=True)
class NetworkSpec:
    """Shapes, budgets and magnitude bands of an ``L``-layer model.

    ``layers[0]`` describes layer 1. The input has a single channel
    (``n_0 = 1``), so ``X^(0)`` is ``M x d``.
    """

    M: int
    d: int
    layers: tuple[LayerSpec, ...]
    zeta_0: float = 0.0
    # chance that an index which fits the budget is kept when drawing X^(L);
    # 1.0 gives maximal supports, where the budget binds
    density: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        self.validate()

    @property
    def L(self) -> int:
        return len(self.layers)

    def layer(self, l: int) -> LayerSpec:
        if not 1 <= l <= self.L:
            raise IndexError(f"layer {l} outside 1..{self.L}")
        return self.layers[l - 1]

    def n_of(self, l: int) -> int:
        return 1 if l == 0 else self.layer(l).n

    def stride(self, l: int) -> int:
        s = self.layer(l).s
        if s is not None:
            return s
        return 1 if l == 1 else self.n_of(l - 1)

    def vector_len(self, l: int) -> int:
        return self.n_of(l) * self.M

    def stripe_spec(self, l: int) -> StripeSpec:
        ly = self.layer(l)
        return StripeSpec.for_layer(ly.m, self.stride(l), ly.n, self.vector_len(l))

    def patch_spec(self, l: int) -> PatchSpec:
        """Patch of layer ``l`` (``m_l`` entries) over a layer-``l`` vector."""
        return PatchSpec(self.layer(l).m, self.vector_len(l))

    def input_patch_spec(self, l: int = 1) -> PatchSpec:
        """Patch spanning one layer-``l`` atom, over a layer ``l-1`` vector."""
        return PatchSpec(self.layer(l).m, self.vector_len(l - 1))

    def validate(self) -> None:
        if self.M < 1 or self.d < 1:
            raise InvalidSpec("M and d must be >= 1")
        if not self.layers:
            raise InvalidSpec("need at least one layer")
        if self.zeta_0 < 0:
            raise InvalidSpec("zeta_0 must be nonnegative")
        if not 0.0 < self.density <= 1.0:
            raise InvalidSpec("density must lie in (0, 1]")
        for l in range(1, self.L + 1):
            ly = self.layer(l)
            if ly.m < 1 or ly.n < 1:
                raise InvalidSpec(f"layer {l}: m and n must be >= 1")
            if not 0 < ly.x_min <= ly.x_max:
                raise InvalidSpec(f"layer {l}: need 0 < x_min <= x_max")
            s = self.stride(l)
            if s != self.n_of(l - 1):
                raise IncompatibleStride(
                    f"layer {l}: stride {s} with {self.M} shifts cannot tile {self.vector_len(l - 1)} rows"
                )
            if ly.m > self.vector_len(l - 1):
                raise InvalidSpec(f"layer {l}: atom length {ly.m} exceeds {self.vector_len(l - 1)} rows")
            q = stripe_length(ly.m, s, ly.n)
            if q < 1:
                raise InvalidSpec(f"layer {l}: stripe length {q} is not positive")
            if q > self.vector_len(l):
                raise InvalidSpec(f"layer {l}: stripe length {q} exceeds vector length {self.vector_len(l)}")
            if not 1 <= ly.S <= q:
                raise InvalidSpec(f"layer {l}: S={ly.S} outside 1..{q}")
            if ly.m > self.vector_len(l):
                raise InvalidSpec(f"layer {l}: patch length {ly.m} exceeds vector length {self.vector_len(l)}")


@dataclass
class LayeredSignal:
    """``layers[l]`` is ``X^(l)`` for ``l = 0..L``; ``supports[l][j]`` its column-``j`` support."""

    layers: list[np.ndarray]
    supports: list[list[np.ndarray]] = field(default_factory=list)
    attempts: int = 0

    def __post_init__(self):
        if not self.supports:
            self.supports = [[np.flatnonzero(col) for col in X.T] for X in self.layers]

    @property
    def L(self) -> int:
        return len(self.layers) - 1

    @property
    def d(self) -> int:
        return self.layers[0].shape[1]

    @property
    def acceptance_rate(self) -> float:
        return self.d / self.attempts if self.attempts else 1.0


@dataclass
class NoisyObservation:
    x_hat_0: np.ndarray
    noise: np.ndarray


def _seed_sequence(rng_seed) -> np.random.SeedSequence:
    if isinstance(rng_seed, np.random.SeedSequence):
        return rng_seed
    return np.random.SeedSequence(rng_seed)


def child_seed(rng_seed, *key: int) -> np.random.SeedSequence:
    """Stateless sub-stream: same parent and key always give the same stream."""
    ss = _seed_sequence(rng_seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(key))


@lru_cache(maxsize=64)
def _windows_touching(N: int, window: int) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple((i - k) % N for k in range(window)) for i in range(N))


def place_support(N: int, window: int, budget: int, rng: np.random.Generator, density: float = 1.0) -> np.ndarray:
    """Random support of a length-``N`` vector with at most ``budget``
    nonzeros in every cyclic window of ``window`` entries.

    Indices are visited in random order; one that fits the budget is kept
    with probability ``density`` (always, by default, which yields a
    maximal support).
    """
    counts = [0] * N
    affected = _windows_touching(N, window)
    chosen = []
    order = rng.permutation(N).tolist()
    coins = rng.random(N).tolist() if density < 1.0 else [0.0] * N
    for i, coin in zip(order, coins):
        if coin >= density:
            continue
        ws = affected[i]
        if all(counts[w] < budget for w in ws):
            for w in ws:
                counts[w] += 1
            chosen.append(i)
    return np.sort(np.array(chosen, dtype=np.intp))


def _masked_layers(spec, dicts, masks):
    if len(dicts) != spec.L or len(masks) != spec.L:
        raise DimensionMismatch(f"need {spec.L} dictionaries and masks")
    out = []
    for l, (A, D) in enumerate(zip(dicts, masks), start=1):
        if A.rows != spec.vector_len(l - 1) or A.cols != spec.vector_len(l):
            raise DimensionMismatch(
                f"layer {l}: dictionary is {A.rows}x{A.cols}, spec needs "
                f"{spec.vector_len(l - 1)}x{spec.vector_len(l)}"
            )
        out.append(MaskedDictionary(A, D))
    return out


def _column_ok(spec: NetworkSpec, l: int, x: np.ndarray) -> bool:
    ly = spec.layer(l)
    nz = np.abs(x[x != 0])
    if nz.size == 0 or nz.min() < ly.x_min or nz.max() > ly.x_max:
        return False
    q = spec.stripe_spec(l).stripe_len
    return window_measures(x, q, 0).max() <= ly.S


def sample_layered_signal(
    spec: NetworkSpec,
    dicts: list[ConvDictionary],
    masks: list[SignMask],
    rng_seed=None,
    max_retries: int = MAX_RETRIES,
) -> LayeredSignal:
    """Draw ``d`` columns of ``X^(L)`` and run the reverse pass.

    Nonzeros of ``X^(L)`` are positive, uniform on ``[x_min, x_max]``;
    signs come from the masks only. Column ``j`` uses the sub-stream
    ``(rng_seed, j)`` so columns can be produced independently.
    """
    ops = _masked_layers(spec, dicts, masks)
    L = spec.L
    deep = spec.layer(L)
    N = spec.vector_len(L)
    q = spec.stripe_spec(L).stripe_len
    cols = [[] for _ in range(L + 1)]
    attempts = 0
    for j in range(spec.d):
        rng = np.random.default_rng(child_seed(rng_seed, j))
        for _ in range(max_retries):
            attempts += 1
            x = np.zeros(N)
            supp = place_support(N, q, deep.S, rng, spec.density)
            if supp.size == 0:
                continue
            x[supp] = rng.uniform(deep.x_min, deep.x_max, size=supp.size)
            stack = [x]
            ok = True
            for l in range(L, 0, -1):
                prev = ops[l - 1].matvec(stack[-1])
                if l - 1 >= 1 and not _column_ok(spec, l - 1, prev):
                    ok = False
                    break
                stack.append(prev)
            if ok:
                break
        else:
            raise ConstraintUnsatisfiable(
                f"column {j}: no sample met every layer's stripe budget and magnitude band "
                f"after {max_retries} draws"
            )
        for l, v in zip(range(L, -1, -1), stack):
            cols[l].append(v)
    layers = [np.column_stack(c) for c in cols]
    return LayeredSignal(layers, attempts=attempts)


def reverse_pass_residuals(signal: LayeredSignal, dicts, masks) -> list[float]:
    """``max |X^(l-1) - A^(l) D^(l) X^(l)|`` for each ``l = 1..L``."""
    out = []
    for l in range(1, signal.L + 1):
        op = MaskedDictionary(dicts[l - 1], masks[l - 1])
        out.append(float(np.max(np.abs(signal.layers[l - 1] - op.matvec(signal.layers[l])))))
    return out


def inject_noise(signal: LayeredSignal, zeta_0: float, rng_seed=None, patch: PatchSpec | None = None) -> NoisyObservation:
    """Add Gaussian noise rescaled so every column's worst patch norm is ``zeta_0``.

    ``patch`` is the layer-1 atom span over the input (``m_1`` entries);
    it is required whenever ``zeta_0 > 0``.
    """
    if zeta_0 < 0:
        raise InvalidSpec("zeta_0 must be nonnegative")
    X0 = signal.layers[0]
    if zeta_0 == 0:
        noise = np.zeros_like(X0)
        return NoisyObservation(X0.copy(), noise)
    if patch is None:
        raise InvalidSpec("patch spec needed to shape nonzero noise")
    rng = np.random.default_rng(_seed_sequence(rng_seed))
    noise = rng.standard_normal(X0.shape)
    noise *= zeta_0 / column_patch_max(noise, patch, 2)[None, :]
    return NoisyObservation(X0 + noise, noise)
