"""Deep convolutional sparse coding: layered thresholding recovery and its bounds."""

__version__ = "0.1.0"

from .bounds import (
    LayerBoundInputs,
    admissible_sparsity,
    error_recursion,
    layer_failure_bound,
    noise_admissibility,
    pathway_failure_bound,
    rademacher_tail,
    uniform_sparsity_bound,
)
from .conv_dict import (
    ConvDictionary,
    LocalDictionary,
    SignMask,
    apply_mask,
    build_conv_dictionary,
    mutual_coherence,
    random_local_dictionary,
    sample_sign_mask,
)
from .forward import RecoveryResult, forward_layer, hard_threshold, run_forward_pass, support_equal
from .generator import LayeredSignal, LayerSpec, NetworkSpec, NoisyObservation, inject_noise, sample_layered_signal
from .sparsity import PatchSpec, StripeSpec, matrix_stripe_max, patch_max_norm, stripe_max_norm

__all__ = [
    "ConvDictionary",
    "LayerBoundInputs",
    "LayerSpec",
    "LayeredSignal",
    "LocalDictionary",
    "NetworkSpec",
    "NoisyObservation",
    "PatchSpec",
    "RecoveryResult",
    "SignMask",
    "StripeSpec",
    "admissible_sparsity",
    "apply_mask",
    "build_conv_dictionary",
    "error_recursion",
    "forward_layer",
    "hard_threshold",
    "inject_noise",
    "layer_failure_bound",
    "matrix_stripe_max",
    "mutual_coherence",
    "noise_admissibility",
    "patch_max_norm",
    "pathway_failure_bound",
    "rademacher_tail",
    "random_local_dictionary",
    "run_forward_pass",
    "sample_layered_signal",
    "sample_sign_mask",
    "stripe_max_norm",
    "support_equal",
    "uniform_sparsity_bound",
]
