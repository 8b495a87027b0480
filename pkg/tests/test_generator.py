import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcsc_lab.conv_dict import LocalDictionary, build_conv_dictionary, random_local_dictionary, sample_sign_mask
from dcsc_lab.errors import ConstraintUnsatisfiable, DimensionMismatch, IncompatibleStride, InvalidSpec
from dcsc_lab.generator import (
    LayerSpec,
    NetworkSpec,
    inject_noise,
    place_support,
    reverse_pass_residuals,
    sample_layered_signal,
)
from dcsc_lab.sparsity import PatchSpec, StripeSpec

from oracles import window_max


def _build(spec, locals_, mask_seed=0):
    dicts = [build_conv_dictionary(a, spec.M, spec.stride(l)) for l, a in enumerate(locals_, start=1)]
    masks = [sample_sign_mask(spec.layer(l).n, spec.M, [mask_seed, l]) for l in range(1, spec.L + 1)]
    return dicts, masks


def _check_signal(spec, sig, dicts, masks):
    for r in reverse_pass_residuals(sig, dicts, masks):
        assert r <= 1e-12
    for l in range(1, spec.L + 1):
        q = spec.stripe_spec(l).stripe_len
        for col in sig.layers[l].T:
            assert window_max(col, q, 0) <= spec.layer(l).S


def test_single_atom_case():
    spec = NetworkSpec(M=5, d=1, layers=(LayerSpec(3, 1, 1, 0.5, 2.0),))
    assert spec.stripe_spec(1).stripe_len == 5
    dicts, masks = _build(spec, [random_local_dictionary(3, 1, rng_seed=1)])
    sig = sample_layered_signal(spec, dicts, masks, rng_seed=4)
    (k,) = sig.supports[1][0]
    mag = sig.layers[1][k, 0]
    assert 0.5 <= mag <= 2.0
    col = dicts[0].dense()[:, k] * masks[0].diagonal[k]
    assert np.allclose(sig.layers[0][:, 0], mag * col, atol=1e-15)


def test_degenerate_band_gives_unit_magnitudes():
    spec = NetworkSpec(M=12, d=6, layers=(LayerSpec(4, 2, 3, 1.0, 1.0),))
    dicts, masks = _build(spec, [random_local_dictionary(4, 2, rng_seed=2)])
    sig = sample_layered_signal(spec, dicts, masks, rng_seed=1)
    nz = sig.layers[1][sig.layers[1] != 0]
    assert np.all(nz == 1.0)


def test_two_layer_spec_example():
    # one-hot layer-2 atoms keep layer 1 sparse enough to be feasible
    spec = NetworkSpec(M=8, d=6, density=0.3, layers=(LayerSpec(3, 2, 2, 0.01, 1.0), LayerSpec(3, 2, 2, 0.01, 1.0)))
    sparse_atoms = LocalDictionary(np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]), 2)
    dicts, masks = _build(spec, [random_local_dictionary(3, 2, rng_seed=3), sparse_atoms])
    for seed in range(5):
        sig = sample_layered_signal(spec, dicts, masks, rng_seed=seed)
        _check_signal(spec, sig, dicts, masks)


def test_infeasible_spec_raises():
    spec = NetworkSpec(M=8, d=2, layers=(LayerSpec(3, 2, 2, 0.01, 1.0), LayerSpec(3, 2, 2, 0.01, 1.0)))
    dicts, masks = _build(spec, [random_local_dictionary(3, 2, rng_seed=3), random_local_dictionary(3, 2, 2, 4)])
    with pytest.raises(ConstraintUnsatisfiable):
        sample_layered_signal(spec, dicts, masks, rng_seed=0, max_retries=50)


def test_deterministic_and_column_independent():
    spec = NetworkSpec(M=10, d=4, layers=(LayerSpec(4, 2, 2, 0.3, 1.0),))
    dicts, masks = _build(spec, [random_local_dictionary(4, 2, rng_seed=9)])
    a = sample_layered_signal(spec, dicts, masks, rng_seed=11)
    b = sample_layered_signal(spec, dicts, masks, rng_seed=11)
    assert all(np.array_equal(x, y) for x, y in zip(a.layers, b.layers))
    wide = sample_layered_signal(NetworkSpec(M=10, d=6, layers=spec.layers), dicts, masks, rng_seed=11)
    assert np.array_equal(wide.layers[1][:, :4], a.layers[1])


def test_spec_validation():
    with pytest.raises(IncompatibleStride):
        NetworkSpec(M=8, d=1, layers=(LayerSpec(3, 2, 1, 1, 1), LayerSpec(3, 2, 1, 1, 1, s=1)))
    with pytest.raises(InvalidSpec):
        NetworkSpec(M=8, d=1, layers=(LayerSpec(3, 1, 6, 1, 1),))  # stripe is 5
    with pytest.raises(InvalidSpec):
        NetworkSpec(M=8, d=1, layers=(LayerSpec(3, 1, 1, 2, 1),))
    with pytest.raises(InvalidSpec):
        NetworkSpec(M=8, d=1, density=0.0, layers=(LayerSpec(3, 1, 1, 1, 1),))
    spec = NetworkSpec(M=8, d=1, layers=(LayerSpec(3, 2, 1, 1, 1), LayerSpec(3, 2, 1, 1, 1)))
    assert spec.stride(2) == 2 and spec.vector_len(2) == 16
    assert spec.stripe_spec(2) == StripeSpec(4, 16)


def test_dictionary_shape_mismatch():
    spec = NetworkSpec(M=8, d=1, layers=(LayerSpec(3, 2, 1, 1, 1),))
    dicts, masks = _build(NetworkSpec(M=8, d=1, layers=(LayerSpec(3, 1, 1, 1, 1),)), [random_local_dictionary(3, 1)])
    with pytest.raises(DimensionMismatch):
        sample_layered_signal(spec, dicts, masks)


@settings(max_examples=60, deadline=None)
@given(N=st.integers(1, 30), w=st.integers(1, 30), budget=st.integers(1, 5), seed=st.integers(0, 10**6))
def test_place_support_is_maximal_and_within_budget(N, w, budget, seed):
    w = min(w, N)
    supp = place_support(N, w, budget, np.random.default_rng(seed))
    x = np.zeros(N)
    x[supp] = 1.0
    assert window_max(x, w, 0) <= budget
    # maximal: no free index can be added
    for i in set(range(N)) - set(supp.tolist()):
        y = x.copy()
        y[i] = 1.0
        assert window_max(y, w, 0) > budget


def test_place_support_density_thins():
    rng = np.random.default_rng(0)
    full = np.mean([place_support(64, 5, 2, rng).size for _ in range(50)])
    thin = np.mean([place_support(64, 5, 2, rng, 0.2).size for _ in range(50)])
    assert thin < full


def _signal(M=16, d=5):
    spec = NetworkSpec(M=M, d=d, layers=(LayerSpec(3, 1, 2, 0.5, 1.0),))
    dicts, masks = _build(spec, [random_local_dictionary(3, 1, rng_seed=0)])
    return spec, sample_layered_signal(spec, dicts, masks, rng_seed=2)


def test_noise_zero_is_exact():
    _, sig = _signal()
    obs = inject_noise(sig, 0.0, rng_seed=1)
    assert np.array_equal(obs.x_hat_0, sig.layers[0])
    assert not obs.noise.any()


@pytest.mark.parametrize("zeta", [1e-3, 0.1, 2.0])
def test_noise_rescaled_to_zeta(zeta):
    spec, sig = _signal()
    obs = inject_noise(sig, zeta, rng_seed=3, patch=spec.input_patch_spec(1))
    for col in obs.noise.T:
        assert abs(window_max(col, 3, 2) - zeta) <= 1e-12
    assert np.allclose(obs.x_hat_0 - obs.noise, sig.layers[0], atol=1e-15)


def test_noise_needs_patch_and_nonnegative_level():
    _, sig = _signal()
    with pytest.raises(InvalidSpec):
        inject_noise(sig, 0.1)
    with pytest.raises(InvalidSpec):
        inject_noise(sig, -1.0, patch=PatchSpec(3, 16))
