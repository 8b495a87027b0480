"""Local and convolutional dictionaries, Rademacher sign masks, coherence.

A convolutional dictionary is the banded-circulant matrix obtained by
placing every column of a small ``m x n`` local dictionary at each of ``M``
spatial positions, ``stride`` rows apart, with cyclic wraparound. Column
``shift * n + atom`` holds local column ``atom`` starting at row
``shift * stride`` (mod rows).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq

from .errors import (
    DimensionMismatch,
    IncompatibleStride,
    InvalidSpec,
    IOFailure,
    NonUnitColumns,
    SingleColumn,
)

UNIT_NORM_TOL = 1e-9
# dense Gram matrix up to this many columns, circulant block scan beyond
DENSE_COHERENCE_MAX_COLS = 4096


@dataclass(frozen=True, eq=False)
class LocalDictionary:
    """The ``m x n`` seed block whose shifts build one layer's dictionary."""

    entries: np.ndarray
    layer_index: int = 1

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] < 1 or entries.shape[1] < 1:
            raise InvalidSpec(f"local dictionary must be a non-empty 2-D array, got shape {entries.shape}")
        if int(self.layer_index) < 1:
            raise InvalidSpec("layer_index must be >= 1")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "layer_index", int(self.layer_index))

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.entries, axis=0)


def random_local_dictionary(m: int, n: int, layer_index: int = 1, rng_seed=None) -> LocalDictionary:
    """I.i.d. standard normal entries, then each column scaled to unit norm."""
    if m < 1 or n < 1:
        raise InvalidSpec("m and n must be >= 1")
    rng = np.random.default_rng(rng_seed)
    entries = rng.standard_normal((m, n))
    entries /= np.linalg.norm(entries, axis=0, keepdims=True)
    return LocalDictionary(entries, layer_index)


def decaying_atom(m: int, ratio: float, layer_index: int = 1) -> LocalDictionary:
    """Single unit-norm atom with taps proportional to ``ratio**k``.

    With one atom and stride 1 the coherence of the shifted dictionary is
    the lag-1 autocorrelation, which grows with ``ratio``; see
    :func:`decaying_atom_for_coherence`.
    """
    if m < 2:
        raise InvalidSpec("a decaying atom needs m >= 2")
    if not 0.0 < ratio < 1.0:
        raise InvalidSpec("ratio must lie in (0, 1)")
    taps = ratio ** np.arange(m, dtype=float)
    return LocalDictionary((taps / np.linalg.norm(taps))[:, None], layer_index)


def _lag1(m: int, ratio: float) -> float:
    taps = ratio ** np.arange(m, dtype=float)
    return float(np.dot(taps[:-1], taps[1:]) / np.dot(taps, taps))


def decaying_atom_for_coherence(m: int, mu: float, layer_index: int = 1) -> LocalDictionary:
    """:func:`decaying_atom` whose lag-1 autocorrelation equals ``mu``.

    That is the dictionary coherence whenever ``M >= 2 * m``, as later lags
    fall off like ``ratio**k``.
    """
    if not 0.0 < mu < _lag1(m, 1.0 - 1e-12):
        raise InvalidSpec(f"coherence {mu} not reachable with a length-{m} decaying atom")
    ratio = brentq(lambda r: _lag1(m, r) - mu, 1e-15, 1.0 - 1e-12, xtol=1e-15, rtol=1e-15)
    return decaying_atom(m, ratio, layer_index)


@dataclass(frozen=True, eq=False)
class ConvDictionary:
    """Banded-circulant dictionary ``A`` of shape ``(stride*M, n*M)``.

    The matrix is held in sparse column form; ``dense()`` materializes it.
    ``coherence`` is computed on first access and cached.
    """

    local: LocalDictionary
    num_shifts: int
    stride: int
    rows: int = field(init=False)
    cols: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "rows", self.stride * self.num_shifts)
        object.__setattr__(self, "cols", self.local.n * self.num_shifts)

    @cached_property
    def matrix(self) -> sp.csc_array:
        m, n = self.local.m, self.local.n
        shifts = np.arange(self.num_shifts)
        # row index of (shift, local row), column index of (shift, atom)
        row_idx = (shifts[:, None, None] * self.stride + np.arange(m)[None, :, None]) % self.rows
        col_idx = shifts[:, None, None] * n + np.arange(n)[None, None, :]
        row_idx, col_idx = np.broadcast_arrays(row_idx, col_idx)
        vals = np.broadcast_to(self.local.entries[None, :, :], row_idx.shape)
        mat = sp.csc_array(
            (vals.ravel(), (row_idx.ravel(), col_idx.ravel())),
            shape=(self.rows, self.cols),
        )
        mat.sort_indices()
        return mat

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.cols:
            raise DimensionMismatch(f"expected leading dimension {self.cols}, got {x.shape[0]}")
        return self.matrix @ x

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape[0] != self.rows:
            raise DimensionMismatch(f"expected leading dimension {self.rows}, got {y.shape[0]}")
        return self.matrix.T @ y

    def column_norms(self) -> np.ndarray:
        return np.sqrt(np.asarray(self.matrix.multiply(self.matrix).sum(axis=0))).ravel()

    @cached_property
    def coherence(self) -> float:
        return _coherence(self)


def build_conv_dictionary(local: LocalDictionary, M: int, stride: int, rows: int | None = None) -> ConvDictionary:
    """Shift ``local`` across ``M`` positions, ``stride`` rows apart, cyclically.

    ``rows`` defaults to ``stride * M``. An explicit value must equal it:
    any other combination either leaves rows uncovered or stacks duplicate
    atoms, and is rejected with :class:`IncompatibleStride`.
    """
    if M < 1:
        raise InvalidSpec("M must be >= 1")
    if stride < 1:
        raise IncompatibleStride("stride must be >= 1")
    if rows is None:
        rows = stride * M
    if rows % stride != 0 or rows // stride != M:
        raise IncompatibleStride(
            f"{M} shifts of stride {stride} do not tile {rows} rows under wraparound"
        )
    if local.m > rows:
        raise InvalidSpec(f"local atoms of length {local.m} exceed the {rows} available rows")
    bad = np.abs(local.column_norms() - 1.0) > UNIT_NORM_TOL
    if bad.any():
        raise NonUnitColumns(f"local columns {np.flatnonzero(bad).tolist()} are not unit norm")
    return ConvDictionary(local, M, stride)


def coherence_of_matrix(A: np.ndarray) -> float:
    """``max_{i != j} |a_i^T a_j|`` for a dense matrix with unit columns."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[1] < 2:
        raise SingleColumn("coherence needs at least two columns")
    gram = np.abs(A.T @ A)
    np.fill_diagonal(gram, 0.0)
    return float(gram.max())


def _coherence(d: ConvDictionary) -> float:
    if d.cols < 2:
        raise SingleColumn("coherence needs at least two columns")
    if d.cols <= DENSE_COHERENCE_MAX_COLS:
        return coherence_of_matrix(d.dense())
    # Shifting every column by one position permutes rows, so each inner
    # product equals one taken against a column of the first block.
    n = d.local.n
    block = (d.matrix[:, :n].T @ d.matrix).toarray()
    block = np.abs(block)
    block[np.arange(n), np.arange(n)] = 0.0
    return float(block.max())


def mutual_coherence(d) -> float:
    """Mutual coherence of a (masked) convolutional dictionary; cached on it."""
    if isinstance(d, MaskedDictionary):
        return d.coherence
    if not isinstance(d, ConvDictionary):
        return coherence_of_matrix(d)
    return d.coherence


@dataclass(frozen=True, eq=False)
class SignMask:
    """Diagonal of a Rademacher sign matrix."""

    diagonal: np.ndarray
    layer_index: int = 1

    def __post_init__(self):
        diag = np.array(self.diagonal, dtype=float).ravel()
        if diag.size < 1 or not np.all((diag == 1.0) | (diag == -1.0)):
            raise InvalidSpec("mask entries must all be exactly -1 or +1")
        diag.setflags(write=False)
        object.__setattr__(self, "diagonal", diag)

    def __len__(self):
        return self.diagonal.size


def sample_sign_mask(n: int, M: int, rng_seed=None, layer_index: int = 1) -> SignMask:
    if n * M < 1:
        raise InvalidSpec("mask length n*M must be >= 1")
    rng = np.random.default_rng(rng_seed)
    signs = 2.0 * rng.integers(0, 2, size=n * M) - 1.0
    return SignMask(signs, layer_index)


class MaskedDictionary:
    """The product ``A @ diag(mask)``, applied without forming it."""

    def __init__(self, dictionary: ConvDictionary, mask: SignMask):
        if len(mask) != dictionary.cols:
            raise DimensionMismatch(f"mask length {len(mask)} != dictionary columns {dictionary.cols}")
        self.dictionary = dictionary
        self.mask = mask

    @property
    def shape(self):
        return (self.dictionary.rows, self.dictionary.cols)

    def _signs(self, x):
        d = self.mask.diagonal
        return d if x.ndim == 1 else d[:, None]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.dictionary.cols:
            raise DimensionMismatch(f"expected leading dimension {self.dictionary.cols}, got {x.shape[0]}")
        return self.dictionary.matrix @ (self._signs(x) * x)

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        out = self.dictionary.rmatvec(y)
        return self._signs(out) * out

    def dense(self) -> np.ndarray:
        return self.dictionary.dense() * self.mask.diagonal[None, :]

    def column_norms(self) -> np.ndarray:
        return self.dictionary.column_norms()

    @property
    def coherence(self) -> float:
        # |(+-a_i)^T (+-a_j)| = |a_i^T a_j|
        return self.dictionary.coherence


def apply_mask(dictionary: ConvDictionary, mask: SignMask) -> MaskedDictionary:
    return MaskedDictionary(dictionary, mask)


# -- CSV persistence ---------------------------------------------------------

LOCAL_HEADER = ("m", "n", "layer")


def save_local_dictionary(path, local: LocalDictionary) -> None:
    """Write ``m,n,layer`` on the first line, then ``m`` rows of ``n`` entries."""
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([local.m, local.n, local.layer_index])
            for row in local.entries:
                w.writerow([repr(float(v)) for v in row])
    except OSError as exc:
        raise IOFailure(str(exc)) from exc


def load_local_dictionary(path) -> LocalDictionary:
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    except OSError as exc:
        raise IOFailure(str(exc)) from exc
    if not rows:
        raise InvalidSpec(f"{path}: empty local dictionary file")
    if tuple(c.strip() for c in rows[0]) == LOCAL_HEADER:
        rows = rows[1:]
    m, n, layer = (int(v) for v in rows[0])
    body = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    if body.shape != (m, n):
        raise InvalidSpec(f"{Path(path).name}: header says {m}x{n}, body is {body.shape}")
    return LocalDictionary(body, layer)


def save_dense(path, matrix: np.ndarray) -> None:
    """Dump any dense matrix (e.g. ``ConvDictionary.dense()``) as CSV."""
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            for row in np.atleast_2d(matrix):
                w.writerow([repr(float(v)) for v in row])
    except OSError as exc:
        raise IOFailure(str(exc)) from exc


def load_dense(path) -> np.ndarray:
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    except OSError as exc:
        raise IOFailure(str(exc)) from exc
    return np.array([[float(v) for v in r] for r in rows], dtype=float)
