"""Exact (bitwise) collision detection and near-collision sweeps.

Two rows collide when their byte representations are identical. For
float clouds, coordinates equal to -0.0 are canonicalized to +0.0 first,
so numerically equal rows always hash equal. Integer code matrices from
the quantizer are hashed as-is.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import InjxError, ValidationError
from .metrics import PairSample, _as_cloud64, _pairwise_scan, pair_distances

# Exact sweeps enumerate all N(N-1)/2 pairs; beyond this many rows the
# caller must use sampled mode (~2e8 pairs at the default cap).
DEFAULT_EXACT_SWEEP_BUDGET = 20_000


@dataclass(frozen=True)
class CollisionReport:
    """Groups of row indices sharing one identical vector."""

    colliding_pairs: int
    groups: tuple[tuple[int, ...], ...]
    layer: int | None = None


def exact_collisions(cloud: np.ndarray, layer: int | None = None) -> CollisionReport:
    """Group rows by exact byte equality and count unordered colliding pairs."""
    arr = np.ascontiguousarray(cloud)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValidationError(f"need a non-empty 2-D array, got shape {arr.shape}")
    if np.issubdtype(arr.dtype, np.floating):
        arr = arr + arr.dtype.type(0.0)  # canonicalize -0.0 to +0.0
    seen: dict[bytes, list[int]] = {}
    for i in range(arr.shape[0]):
        seen.setdefault(arr[i].tobytes(), []).append(i)
    groups = tuple(tuple(g) for g in seen.values() if len(g) >= 2)
    pairs = sum(len(g) * (len(g) - 1) // 2 for g in groups)
    return CollisionReport(colliding_pairs=pairs, groups=groups, layer=layer)


@dataclass(frozen=True)
class NearCollisionSweep:
    """Fraction of pairs within each tolerance, over all or sampled pairs."""

    epsilons: tuple[float, ...]
    fractions: tuple[float, ...]
    mode: str  # "exact" | "sampled"
    pairs_considered: int


def _check_epsilons(epsilons) -> np.ndarray:
    eps = np.asarray(epsilons, dtype=np.float64)
    if eps.size == 0:
        raise ValidationError("need at least one epsilon")
    if np.any(eps <= 0):
        raise ValidationError("epsilons must all be > 0")
    if np.any(np.diff(eps) < 0):
        raise ValidationError("epsilons must be sorted ascending")
    return eps


def near_collision_sweep(
    cloud: np.ndarray,
    epsilons,
    mode: str = "exact",
    sample: PairSample | None = None,
    exact_budget: int = DEFAULT_EXACT_SWEEP_BUDGET,
) -> NearCollisionSweep:
    """Fraction of pairs (i, j) with ||x_i - x_j|| <= epsilon, per epsilon.

    Exact mode considers every unordered pair and is capped at
    `exact_budget` rows; sampled mode estimates the same fraction over a
    PairSample.
    """
    eps = _check_epsilons(epsilons)
    arr = _as_cloud64(cloud)
    n = arr.shape[0]
    if n < 2:
        raise ValidationError("need at least two points")

    if mode == "exact":
        if n > exact_budget:
            raise ValidationError(
                f"exact sweep over budget (N={n} > {exact_budget}); use sampled mode with a pair sample"
            )
        _, _, counts = _pairwise_scan(arr, eps)
        considered = n * (n - 1) // 2
    elif mode == "sampled":
        if sample is None:
            raise ValidationError("sampled mode requires a pair sample")
        dist = pair_distances(arr, sample.pairs)
        counts = np.array([int(np.count_nonzero(dist <= e)) for e in eps], dtype=np.int64)
        considered = len(sample)
    else:
        raise ValidationError(f"mode must be 'exact' or 'sampled', got {mode!r}")

    fractions = counts / considered
    if np.any(np.diff(fractions) < 0):
        raise InjxError("internal: near-collision fractions decreased with epsilon")
    return NearCollisionSweep(
        epsilons=tuple(float(e) for e in eps),
        fractions=tuple(float(f) for f in fractions),
        mode=mode,
        pairs_considered=considered,
    )
