"""Layerwise injectivity diagnostics for finite clouds of hidden states.

Estimates separation margins, co-Lipschitz constants, collision and
near-collision rates, and quantization safety thresholds on N x d point
clouds, with bootstrap uncertainty and a fully seeded randomness
contract. See the CLI (`injx`) and the HTTP service for orchestration.
"""

__version__ = "0.1.0"

from .bootstrap import BootstrapInterval, bootstrap_margin_exact, bootstrap_quantile
from .collisions import CollisionReport, NearCollisionSweep, exact_collisions, near_collision_sweep
from .exceptions import ComputationError, InjxError, ValidationError
from .formats import (
    RunHandle,
    TokenSet,
    load_manifest,
    read_matrix,
    read_tokens,
    write_manifest,
    write_matrix,
    write_tokens,
)
from .metrics import (
    NNDistances,
    NormStats,
    PairSample,
    colip_ratios,
    hamming,
    margin_witness,
    min_margin,
    nn_distances,
    norm_stats,
    normalize,
    percentile_colip,
    percentile_margin,
    quantile,
    sample_pairs,
)
from .quantize import (
    QuantizedCloud,
    QuantSpec,
    SafetyVerdict,
    critical_bitwidth,
    dynamic_range,
    quantize_cloud,
    safety_check,
    spec_for,
    step_size,
)
from .robustness import (
    ALL_INJECTIVE,
    COLLISION_FOUND,
    CorollaryCheck,
    OracleResult,
    RadiusReport,
    midpoint_collapse,
    perturbation_oracle,
    robust_injectivity_radius,
    verify_quantization_corollary,
)
from .rng import PRNG_NAME, raw_stream, substream
from .synth import hamming_embed_cloud, orthonormal_codebooks, random_distinct_tokens, synth_generate
