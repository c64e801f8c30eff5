"""Post-hoc uniform activation quantization with a per-layer symmetric scale.

The quantizer maps [-R, R] onto a uniform grid of step 2R/(2^b - 1),
rounding half away from zero. The safety check is one-directional: a
step size below margin/sqrt(d) proves the quantized cloud collision-free
on the set; anything else is merely unproven, never "collides".
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import ComputationError, InjxError, ValidationError

_MAX_BITS = 64


class SafetyVerdict(str, Enum):
    SAFE = "safe"
    UNPROVEN = "unproven"


@dataclass(frozen=True)
class QuantSpec:
    """Bitwidth, dynamic range, and the derived step size for one layer."""

    bits: int
    range: float
    step: float
    layer: int | None = None


@dataclass(frozen=True)
class QuantizedCloud:
    codes: np.ndarray  # (n, d) int64, k = round(x / step)
    values: np.ndarray  # (n, d) float32, k * step
    spec: QuantSpec


def dynamic_range(cloud: np.ndarray) -> float:
    """Maximum absolute coordinate of the cloud (exact)."""
    arr = np.asarray(cloud)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValidationError(f"need a non-empty 2-D array, got shape {arr.shape}")
    return float(np.max(np.abs(arr.astype(np.float64, copy=False))))


def step_size(range_: float, bits: int) -> float:
    """Step size 2R/(2^b - 1) of the b-bit symmetric uniform quantizer."""
    if not isinstance(bits, int) or isinstance(bits, bool) or not 1 <= bits <= _MAX_BITS:
        raise ValidationError(f"bits must be an integer in [1, {_MAX_BITS}], got {bits}")
    if range_ < 0:
        raise ValidationError(f"range must be >= 0, got {range_}")
    if range_ == 0:
        raise ComputationError("degenerate range: layer is identically zero")
    return 2.0 * range_ / float(2**bits - 1)


def spec_for(cloud: np.ndarray, bits: int, layer: int | None = None) -> QuantSpec:
    r = dynamic_range(cloud)
    return QuantSpec(bits=bits, range=r, step=step_size(r, bits), layer=layer)


def quantize_cloud(cloud: np.ndarray, spec: QuantSpec) -> QuantizedCloud:
    """Quantize each coordinate independently: k = round(x/step), value = k*step.

    Rounding is half away from zero. Inputs must lie within [-R, R]; the
    codes then land in [-2^(b-1), 2^(b-1)] with no clamping.
    """
    arr = np.ascontiguousarray(cloud, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"cloud must be 2-D, got shape {arr.shape}")
    # Domain: [-R, R] extended to the outermost reconstruction level
    # 2^(b-1)*step (= R*2^b/(2^b-1), slightly past R), so re-quantizing
    # already-quantized values is the identity on codes; the 1e-6 slack
    # covers binary32 reconstruction rounding.
    limit = spec.step * 2 ** (spec.bits - 1) * (1 + 1e-6)
    over = np.abs(arr) > limit
    if over.any():
        flat = int(np.argmax(over))
        r, c = flat // arr.shape[1], flat % arr.shape[1]
        raise ValidationError(
            f"coordinate outside [-R, R] at row {r}, col {c}: |{arr[r, c]!r}| > range {spec.range!r}"
        )
    y = arr / spec.step
    codes = (np.floor(np.abs(y) + 0.5) * np.sign(y)).astype(np.int64)
    bound = 2 ** (spec.bits - 1)
    if np.any(np.abs(codes) > bound):
        raise InjxError("internal: quantizer code escaped [-2^(b-1), 2^(b-1)]")
    values = (codes * spec.step).astype(np.float32)
    return QuantizedCloud(codes=codes, values=values, spec=spec)


def safety_check(margin: float, dim: int, step: float) -> SafetyVerdict:
    """SAFE when step < margin/sqrt(dim): quantization provably keeps the
    cloud collision-free. Otherwise UNPROVEN (collisions possible, not
    guaranteed)."""
    if margin < 0:
        raise ValidationError(f"margin must be >= 0, got {margin}")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ValidationError(f"dim must be an integer >= 1, got {dim}")
    if step <= 0:
        raise ValidationError(f"step must be > 0, got {step}")
    return SafetyVerdict.SAFE if step < margin / math.sqrt(dim) else SafetyVerdict.UNPROVEN


def critical_bitwidth(margin: float, dim: int, range_: float) -> int:
    """Smallest bitwidth whose step size is provably collision-free,
    i.e. the first b with 2^b - 1 > 2*R*sqrt(dim)/margin."""
    if margin == 0:
        raise ComputationError("no safe bitwidth: exact duplicates present")
    if margin < 0:
        raise ValidationError(f"margin must be >= 0, got {margin}")
    if range_ <= 0:
        raise ValidationError(f"range must be > 0, got {range_}")
    for b in range(1, _MAX_BITS + 1):
        if safety_check(margin, dim, step_size(range_, b)) is SafetyVerdict.SAFE:
            return b
    raise ComputationError(f"no bitwidth <= {_MAX_BITS} is provably safe for this margin")
