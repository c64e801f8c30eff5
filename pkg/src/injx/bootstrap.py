"""Nonparametric bootstrap intervals for the quantile estimators.

The default mode resamples the statistic's value multiset (nearest-
neighbor distances for margins, pair ratios for co-Lipschitz) with
replacement. Recomputing nearest neighbors inside every resample is
available as an exact mode for margins, restricted to small clouds;
there, duplicated draws are collapsed to the support of the resample
before the NN pass, since literal duplicates would pin the margin to
zero.

Each resample draws from its own (seed, tag, index) substream, so
parallel evaluation is bit-identical to sequential.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError
from .metrics import nn_distances, quantile
from .rng import substream

DEFAULT_RESAMPLES = 200
DEFAULT_LEVELS = (2.5, 97.5)

EXACT_MARGIN_MAX_N = 5000


@dataclass(frozen=True)
class BootstrapInterval:
    point: float  # statistic on the original data
    lo: float
    hi: float
    resamples: int
    seed: int


def _check_levels(levels) -> tuple[float, float]:
    lo, hi = levels
    if not (0 < lo < hi < 100):
        raise ValidationError(f"levels must satisfy 0 < lo < hi < 100, got {levels}")
    return float(lo), float(hi)


def bootstrap_quantile(
    values,
    q: float,
    resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
    levels=DEFAULT_LEVELS,
    tag: str = "bootstrap",
) -> BootstrapInterval:
    """Percentile bootstrap interval for quantile(values, q)."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValidationError("bootstrap of an empty multiset")
    if resamples < 1:
        raise ValidationError(f"resamples must be >= 1, got {resamples}")
    lo_level, hi_level = _check_levels(levels)
    stats = np.empty(resamples, dtype=np.float64)
    for r in range(resamples):
        gen = substream(seed, tag, r)
        idx = gen.integers(0, v.size, size=v.size)
        stats[r] = quantile(v[idx], q)
    return BootstrapInterval(
        point=quantile(v, q),
        lo=quantile(stats, lo_level),
        hi=quantile(stats, hi_level),
        resamples=resamples,
        seed=seed,
    )


def bootstrap_margin_exact(
    cloud: np.ndarray,
    q: float,
    resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
    levels=DEFAULT_LEVELS,
    tag: str = "bootstrap",
) -> BootstrapInterval:
    """Margin bootstrap that recomputes nearest neighbors per resample.

    Each resample draws row indices with replacement and runs the exact
    NN pass on the distinct drawn rows. O(resamples * N^2 * d), so capped
    at N <= 5000.
    """
    arr = np.asarray(cloud)
    n = arr.shape[0]
    if n > EXACT_MARGIN_MAX_N:
        raise ValidationError(f"exact margin bootstrap is limited to N <= {EXACT_MARGIN_MAX_N}, got {n}")
    if n < 2:
        raise ValidationError("need at least two points")
    if resamples < 1:
        raise ValidationError(f"resamples must be >= 1, got {resamples}")
    lo_level, hi_level = _check_levels(levels)
    stats = np.empty(resamples, dtype=np.float64)
    for r in range(resamples):
        gen = substream(seed, tag, r)
        idx = gen.integers(0, n, size=n)
        support = np.unique(idx)
        if support.size < 2:
            stats[r] = 0.0  # resample collapsed to one point
            continue
        stats[r] = quantile(nn_distances(arr[support]).distances, q)
    return BootstrapInterval(
        point=quantile(nn_distances(arr).distances, q),
        lo=quantile(stats, lo_level),
        hi=quantile(stats, hi_level),
        resamples=resamples,
        seed=seed,
    )
