import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dcsc_lab.errors import EmptyMatrix, InvalidAlpha, InvalidSpec
from dcsc_lab.sparsity import (
    PatchSpec,
    StripeSpec,
    column_patch_max,
    matrix_stripe_max,
    patch_max_norm,
    stripe_length,
    stripe_max_norm,
)

from oracles import window_max


def test_zero_vector():
    assert patch_max_norm(np.zeros(6), PatchSpec(3, 6), 2) == 0.0
    assert stripe_max_norm(np.zeros(6), StripeSpec(3, 6), 0) == 0.0
    assert matrix_stripe_max(np.zeros((6, 3)), StripeSpec(4, 6), 2) == 0.0


def test_single_spike():
    e1 = np.zeros(6)
    e1[0] = 1.0
    assert patch_max_norm(e1, PatchSpec(3, 6), 0) == 1.0
    x = np.zeros(9)
    x[7] = -2.5
    assert stripe_max_norm(x, StripeSpec(4, 9), 0) == 1.0
    assert stripe_max_norm(x, StripeSpec(4, 9), 2) == 2.5


def test_wraparound_window():
    x = np.zeros(8)
    x[0], x[7] = 3.0, 4.0
    # only a wrapping window of length 2 holds both
    assert patch_max_norm(x, PatchSpec(2, 8), 0) == 2
    assert patch_max_norm(x, PatchSpec(2, 8), 2) == 5.0


def test_stripe_length_formula():
    assert stripe_length(3, 1, 2) == 10
    assert stripe_length(3, 2, 2) == 4      # (2 * 1.5 - 1) * 2
    assert stripe_length(4, 3, 3) == 5      # floor((8/3 - 1) * 3) = 5 exactly
    assert stripe_length(1, 2, 4) == 0
    with pytest.raises(InvalidSpec):
        StripeSpec.for_layer(1, 2, 4, 10)


def test_invalid_alpha_and_lengths():
    with pytest.raises(InvalidAlpha):
        patch_max_norm(np.ones(4), PatchSpec(2, 4), 1)
    with pytest.raises(InvalidSpec):
        patch_max_norm(np.ones(5), PatchSpec(2, 4), 2)
    with pytest.raises(InvalidSpec):
        PatchSpec(5, 4)
    with pytest.raises(EmptyMatrix):
        matrix_stripe_max(np.zeros((4, 0)), StripeSpec(2, 4))


def _sparse_vectors(max_len=16):
    return st.integers(1, max_len).flatmap(
        lambda N: st.tuples(
            arrays(np.float64, N, elements=st.sampled_from([0.0, 0.0, 0.0, 1.0, -2.0, 0.5, 1e-3, 7.25])),
            st.integers(1, N),
        )
    )


@settings(max_examples=200, deadline=None)
@given(_sparse_vectors())
def test_patch_matches_window_oracle(data):
    x, w = data
    spec = PatchSpec(w, x.size)
    assert patch_max_norm(x, spec, 0) == window_max(x, w, 0)
    assert abs(patch_max_norm(x, spec, 2) - window_max(x, w, 2)) <= 1e-12


def test_random_sparse_patch4():
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.standard_normal(12) * (rng.random(12) < 0.4)
        assert patch_max_norm(x, PatchSpec(4, 12), 0) == window_max(x, 4, 0)
        assert abs(patch_max_norm(x, PatchSpec(4, 12), 2) - window_max(x, 4, 2)) <= 1e-12


def test_random_stripe6_len12():
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = rng.standard_normal(12)
        assert stripe_max_norm(x, StripeSpec(6, 12), 0) == window_max(x, 6, 0)
        assert abs(stripe_max_norm(x, StripeSpec(6, 12), 2) - window_max(x, 6, 2)) <= 1e-12


def test_matrix_is_max_of_columns():
    X = np.random.default_rng(7).standard_normal((12, 5)) * (np.random.default_rng(8).random((12, 5)) < 0.5)
    spec = StripeSpec(5, 12)
    for alpha in (0, 2):
        expected = max(window_max(X[:, j], 5, alpha) for j in range(5))
        assert abs(matrix_stripe_max(X, spec, alpha) - expected) <= 1e-12
    assert matrix_stripe_max(X[:, :1], spec, 2) == stripe_max_norm(X[:, 0], spec, 2)
    cols = column_patch_max(X, PatchSpec(3, 12), 2)
    assert cols.shape == (5,)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, 10, elements=st.floats(-5, 5)), st.integers(1, 9))
def test_measures_monotone_in_window(x, w):
    # a longer window never has a smaller max measure
    for alpha in (0, 2):
        assert patch_max_norm(x, PatchSpec(w, 10), alpha) <= patch_max_norm(x, PatchSpec(w + 1, 10), alpha) + 1e-12
