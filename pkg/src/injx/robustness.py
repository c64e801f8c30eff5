"""Robust injectivity radius, the midpoint-collapse adversary, and
brute-force perturbation checks.

For an injective cloud with margin m, every perturbation displacing each
point by less than m/2 preserves injectivity, and collapsing a
margin-attaining pair onto its midpoint is a perturbation of
sup-displacement exactly m/2 that destroys it. The oracle here runs both
sides: random perturbations on the radius-r ball plus that deterministic
adversary scaled to sup-displacement r.
"""

from dataclasses import dataclass

import numpy as np

from .collisions import exact_collisions
from .exceptions import ComputationError, ValidationError
from .metrics import margin_witness, min_margin
from .quantize import SafetyVerdict, quantize_cloud, safety_check, spec_for
from .rng import substream

ALL_INJECTIVE = "all_injective"
COLLISION_FOUND = "collision_found"


@dataclass(frozen=True)
class RadiusReport:
    margin: float
    r_inj: float  # margin / 2
    witness_pair: tuple[int, int]


def robust_injectivity_radius(cloud: np.ndarray) -> RadiusReport:
    """Margin, half-margin radius, and a pair attaining the margin."""
    margin, pair = margin_witness(cloud)
    if margin == 0:
        raise ComputationError("not injective: r_inj undefined (margin is zero)")
    return RadiusReport(margin=margin, r_inj=margin / 2, witness_pair=pair)


def midpoint_collapse(cloud: np.ndarray) -> np.ndarray:
    """Replace both margin-attaining rows by their midpoint.

    The result is a perturbation of sup-displacement exactly margin/2
    with at least one exact collision, matching the tight case of the
    half-margin bound.
    """
    report = robust_injectivity_radius(cloud)
    i, j = report.witness_pair
    out = np.array(cloud, copy=True)
    mid = ((out[i].astype(np.float64) + out[j].astype(np.float64)) / 2).astype(out.dtype)
    out[i] = mid
    out[j] = mid
    return out


@dataclass(frozen=True)
class OracleResult:
    verdict: str  # ALL_INJECTIVE | COLLISION_FOUND
    failing_index: int | None  # 0 = adversarial construction, 1..trials = random


def _adversarial(cloud64: np.ndarray, r: float) -> np.ndarray:
    """The scaled midpoint adversary: move the margin pair toward each
    other by r each (meeting at the midpoint once r >= margin/2)."""
    margin, (i, j) = margin_witness(cloud64)
    out = cloud64.copy()
    if margin == 0:
        return out  # already non-injective
    if r >= margin / 2:
        mid = (out[i] + out[j]) / 2
        out[i] = mid
        out[j] = mid
    elif r > 0:
        u = (out[j] - out[i]) / margin
        out[i] = out[i] + r * u
        out[j] = out[j] - r * u
    return out


def perturbation_oracle(cloud: np.ndarray, r: float, trials: int, seed: int) -> OracleResult:
    """Probe injectivity under perturbations of sup-displacement <= r.

    Perturbation 0 is the deterministic scaled midpoint adversary;
    perturbations 1..trials displace every row by an independent uniform
    vector from the radius-r ball. Returns COLLISION_FOUND with the
    smallest failing index, else ALL_INJECTIVE. A perturbed cloud counts
    as non-injective when its minimum pairwise distance is exactly zero
    in float64.
    """
    if trials < 1:
        raise ValidationError(f"trials must be >= 1, got {trials}")
    if r < 0:
        raise ValidationError(f"perturbation radius must be >= 0, got {r}")
    base = np.ascontiguousarray(cloud, dtype=np.float64)
    n, d = base.shape

    if min_margin(_adversarial(base, r)) <= 0:
        return OracleResult(verdict=COLLISION_FOUND, failing_index=0)

    for t in range(1, trials + 1):
        gen = substream(seed, "perturbations", t)
        direction = gen.standard_normal((n, d))
        norms = np.sqrt(np.einsum("ij,ij->i", direction, direction))
        norms = np.maximum(norms, 1e-300)
        radii = r * gen.random(n) ** (1.0 / d)
        perturbed = base + direction * (radii / norms)[:, None]
        if min_margin(perturbed) <= 0:
            return OracleResult(verdict=COLLISION_FOUND, failing_index=t)
    return OracleResult(verdict=ALL_INJECTIVE, failing_index=None)


@dataclass(frozen=True)
class CorollaryCheck:
    verdict: SafetyVerdict
    collision_count: int
    margin: float
    range: float
    step: float
    bits: int


def verify_quantization_corollary(cloud: np.ndarray, bits: int) -> CorollaryCheck:
    """Quantize the cloud and confirm the safety condition is sound.

    Computes the dynamic range and step, runs the safety check against
    the full-precision margin, quantizes, and counts exact collisions on
    the integer codes. A SAFE verdict with a nonzero collision count is
    impossible and raises.
    """
    margin = min_margin(cloud)
    if margin == 0:
        raise ComputationError("not injective: the corollary needs a positive margin")
    spec = spec_for(cloud, bits)
    quantized = quantize_cloud(cloud, spec)
    verdict = safety_check(margin, cloud.shape[1], spec.step)
    collisions = exact_collisions(quantized.codes).colliding_pairs
    if verdict is SafetyVerdict.SAFE and collisions > 0:
        raise ComputationError(
            "internal: SAFE verdict with quantized collisions "
            f"(margin={margin!r}, step={spec.step!r}, collisions={collisions})"
        )
    return CorollaryCheck(
        verdict=verdict,
        collision_count=collisions,
        margin=margin,
        range=spec.range,
        step=spec.step,
        bits=bits,
    )
