import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from dcsc_lab.bounds import (
    LayerBoundInputs,
    admissible_sparsity,
    error_recursion,
    layer_failure_bound,
    layer_failure_summand,
    noise_admissibility,
    pathway_failure_bound,
    pathway_failure_bound_raw,
    rademacher_tail,
    uniform_sparsity_bound,
    welch_bound,
    zeta_chain,
)
from dcsc_lab.errors import ChainMismatch, InvalidSpec, ZeroCoherence


def test_uniform_bound_examples():
    assert uniform_sparsity_bound(LayerBoundInputs(1, 1, 0.0, 1)) == math.inf
    assert uniform_sparsity_bound(LayerBoundInputs(1, 1, 0.1, 1)) == pytest.approx(5.5, abs=1e-12)
    for mu in (0.01, 0.3, 0.9):
        assert uniform_sparsity_bound(LayerBoundInputs(0.6, 1.0, mu, 2, zeta_prev=0.3)) == pytest.approx(0.5, abs=1e-12)


def test_layer_bound_examples():
    assert layer_failure_bound(LayerBoundInputs(1, 1, 0.0, 3)) == 0.0
    mu = math.sqrt(1 / 8)
    assert layer_failure_bound(LayerBoundInputs(1, 1, mu, 1)) == pytest.approx(2 * math.exp(-1), abs=1e-12)
    assert layer_failure_bound(LayerBoundInputs(1, 1, 0.9, 50, n=8, M=64)) == 1.0
    assert layer_failure_summand(LayerBoundInputs(1, 1, 0.9, 50, n=8, M=64)) > 1.0


def test_degenerate_zero_xmin():
    assert layer_failure_summand(LayerBoundInputs(0.0, 0.0, 0.0, 1)) == 1.0


def test_error_recursion_examples():
    assert error_recursion(1, 0.3, 1, 1.0, 0.0) == 0.0
    assert error_recursion(4, 0.1, 3, 1.0, 0.05) == pytest.approx(0.5, abs=1e-15)
    assert error_recursion(9, 0.0, 5, 2.0, 0.1) == pytest.approx(0.3, abs=1e-15)
    with pytest.raises(InvalidSpec):
        error_recursion(-1, 0.1, 1, 1, 0)


def _layer(x_min, x_max, mu, S, zeta, n, M, supp, d=1):
    return LayerBoundInputs(x_min, x_max, mu, S, zeta, n, M, d, supp)


def test_pathway_reductions():
    one = _layer(1.0, 1.0, 0.2, 3, 0.0, 2, 8, 3)
    assert pathway_failure_bound([one]) == layer_failure_bound(one)
    assert pathway_failure_bound_raw([one]) == layer_failure_summand(one)
    # two identical layers (no chain data) give twice the summand
    two = LayerBoundInputs(1.0, 1.0, 0.05, 2, 0.1, 1, 4)
    assert pathway_failure_bound_raw([two, two]) == 2 * layer_failure_summand(two)
    wide = LayerBoundInputs(1.0, 1.0, 0.05, 2, 0.1, 1, 4, d=7)
    assert pathway_failure_bound_raw([wide]) == 7 * layer_failure_summand(wide)
    assert pathway_failure_bound([wide]) == min(1.0, 7 * layer_failure_summand(wide))


def test_three_layer_chain_against_hand_evaluation():
    params = [(1.0, 1.2, 0.02, 3, 2, 16, 4), (0.9, 1.0, 0.03, 2, 2, 16, 3), (0.8, 1.0, 0.025, 2, 4, 16, 2)]
    zeta = 0.01
    layers, expected = [], 0.0
    for x_min, x_max, mu, S, n, M, supp in params:
        layers.append(_layer(x_min, x_max, mu, S, zeta, n, M, supp, d=3))
        expected += 2 * n * M * math.exp(-x_min**2 / (8 * (x_max**2 * mu**2 * S + zeta**2)))
        zeta = math.sqrt(supp) * (mu * (S - 1) * x_max + zeta)
    assert pathway_failure_bound_raw(layers) == pytest.approx(3 * expected, rel=1e-14)
    chain = zeta_chain(layers, 0.01)
    assert chain[1] == pytest.approx(layers[1].zeta_prev, rel=1e-15)
    broken = [layers[0], _layer(0.9, 1.0, 0.03, 2, 0.5, 2, 16, 3, d=3)]
    with pytest.raises(ChainMismatch):
        pathway_failure_bound(broken)


def test_admissible_sparsity_examples():
    M, n = 1, 1
    delta = 2 * M * n / math.exp(8)  # so that 2Mn/delta = e^8
    assert admissible_sparsity(1, 1, 0.0, 0.1, n, M, delta) == pytest.approx(1.5625, rel=1e-12)
    thr = noise_admissibility(1.0, 2, 16, 0.05)
    assert admissible_sparsity(1, 1, thr, 0.2, 2, 16, 0.05) <= 1e-12
    assert admissible_sparsity(1, 1, 1.1 * thr, 0.2, 2, 16, 0.05) < 0
    with pytest.raises(ZeroCoherence):
        admissible_sparsity(1, 1, 0, 0.0, 1, 1, 0.05)


def test_admissible_scales_like_inverse_square():
    a = admissible_sparsity(1, 1, 0.0, 0.1, 2, 16, 0.05)
    b = admissible_sparsity(1, 1, 0.0, 0.05, 2, 16, 0.05)
    assert b / a == pytest.approx(4.0, rel=1e-12)


def test_noise_admissibility_examples():
    delta = 2 / math.exp(2)
    assert noise_admissibility(0.8, 1, 1, delta) == pytest.approx(0.2, rel=1e-12)
    assert noise_admissibility(0.0, 2, 8, 0.1) == 0.0


def test_admissible_sparsity_matches_layer_bound_at_delta():
    # S equal to the admissible value puts the layer bound exactly at delta
    x_min, x_max, zeta, mu, n, M, delta = 0.7, 1.1, 0.01, 0.03, 2, 16, 0.05
    S = admissible_sparsity(x_min, x_max, zeta, mu, n, M, delta)
    p = 2 * n * M * math.exp(-x_min**2 / (8 * (x_max**2 * mu**2 * S + zeta**2)))
    assert p == pytest.approx(delta, rel=1e-10)


def test_rademacher_tail_examples():
    assert rademacher_tail([1.0, 2.0], 0.0) == 1.0
    assert rademacher_tail([1.0, 2.0], 1e-9) == 1.0
    assert rademacher_tail([1.0, 0.0, 0.0], 2.0) == pytest.approx(2 * math.exp(-2), abs=1e-15)
    assert rademacher_tail([0.0, 0.0], 1.0) == 0.0
    with pytest.raises(InvalidSpec):
        rademacher_tail([1.0], -1.0)


def test_welch_bound():
    assert welch_bound(4, 4) == 0.0
    assert welch_bound(16, 32) == pytest.approx(math.sqrt(0.5 / 16))


def test_inputs_validation():
    with pytest.raises(InvalidSpec):
        LayerBoundInputs(2.0, 1.0, 0.1, 1)
    with pytest.raises(InvalidSpec):
        LayerBoundInputs(1.0, 1.0, 0.1, 0)
    with pytest.raises(InvalidSpec):
        LayerBoundInputs(1.0, 1.0, 1.5, 1)


pos = st.floats(1e-3, 1.0)


@settings(max_examples=300, deadline=None)
@given(x_min=pos, x_max=pos, mu=st.floats(1e-3, 0.9), S=st.integers(1, 30), zeta=st.floats(0, 0.5),
       bump=st.floats(1.0, 3.0))
def test_layer_bound_monotone(x_min, x_max, mu, S, zeta, bump):
    assume(x_min <= x_max)
    base = layer_failure_bound(LayerBoundInputs(x_min, x_max, mu, S, zeta, 2, 8))
    assert 0.0 <= base <= 1.0
    assert layer_failure_bound(LayerBoundInputs(x_min, x_max, min(mu * bump, 1.0), S, zeta, 2, 8)) >= base
    assert layer_failure_bound(LayerBoundInputs(x_min, x_max, mu, S + 1, zeta, 2, 8)) >= base
    assert layer_failure_bound(LayerBoundInputs(x_min, x_max, mu, S, zeta * bump, 2, 8)) >= base
    smaller = LayerBoundInputs(x_min / bump, x_max, mu, S, zeta, 2, 8)
    assert layer_failure_bound(smaller) >= base


@settings(max_examples=200, deadline=None)
@given(alpha=st.lists(st.floats(-3, 3), min_size=1, max_size=8), t=st.floats(0, 10))
def test_rademacher_tail_in_unit_interval_and_decreasing(alpha, t):
    p = rademacher_tail(alpha, t)
    assert 0.0 <= p <= 1.0
    assert rademacher_tail(alpha, t + 0.5) <= p


@settings(max_examples=100, deadline=None)
@given(L=st.integers(1, 3), d=st.integers(1, 8), mu=st.floats(0.01, 0.2), zeta=st.floats(0, 0.05))
def test_pathway_is_d_times_sum(L, d, mu, zeta):
    layers, summ = [], 0.0
    for l in range(L):
        inp = LayerBoundInputs(1.0, 1.0, mu, 2, zeta, 2, 8, d, 3)
        layers.append(inp)
        summ += layer_failure_summand(inp)
        zeta = error_recursion(3, mu, 2, 1.0, zeta)
    assert pathway_failure_bound_raw(layers) == pytest.approx(d * summ, rel=1e-15)
    assert pathway_failure_bound(layers) == min(1.0, pathway_failure_bound_raw(layers))
    assert np.isfinite(pathway_failure_bound_raw(layers))
