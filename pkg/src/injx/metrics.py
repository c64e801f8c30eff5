"""Separation and co-Lipschitz estimators on finite point clouds.

A layer is an N x d cloud of last-token states. The estimators here are
exact: nearest-neighbor distances come from a blocked O(N^2) pass with
per-pair squared distances formed by direct coordinate differences and
accumulated in float64. The Gram-matrix shortcut is deliberately not
used anywhere; it cancels catastrophically exactly in the near-collision
regime these diagnostics exist to probe.

Every floating-point reduction follows a fixed index order, so results
are bit-identical regardless of block size or worker count.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import ComputationError, ValidationError
from .formats import TokenSet
from .rng import substream

# Cap on block_rows * N float64 scratch elements for the pairwise pass.
_SCAN_BLOCK_ELEMS = 4_000_000
# Pair universes up to this size are enumerated outright; larger ones
# are rejection-sampled.
_ENUM_PAIR_CAP = 4_000_000
_PAIR_BLOCK = 1 << 15


def _as_cloud64(cloud: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(cloud, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"cloud must be 2-D, got shape {arr.shape}")
    return arr


def hamming(s, t) -> int:
    """Number of positions at which two equal-length sequences differ."""
    a = np.asarray(s)
    b = np.asarray(t)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError(f"hamming needs two equal-length sequences, got {a.shape} and {b.shape}")
    return int(np.count_nonzero(a != b))


def hamming_for_pairs(ids: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Hamming distance for each (left[t], right[t]) row pair, blocked."""
    out = np.empty(left.shape[0], dtype=np.int64)
    for s in range(0, left.shape[0], _PAIR_BLOCK):
        e = min(s + _PAIR_BLOCK, left.shape[0])
        out[s:e] = (ids[left[s:e]] != ids[right[s:e]]).sum(axis=1)
    return out


@dataclass(frozen=True)
class PairSample:
    """Deduplicated sample of index pairs with their Hamming distances.

    Pairs are stored with i < j in lexicographic order; `hamming[t]`
    belongs to `pairs[t]`. Every retained pair has hamming >= d_min.
    """

    pairs: np.ndarray  # (m, 2) int64
    hamming: np.ndarray  # (m,) int64
    seed: int
    d_min: int

    def __len__(self) -> int:
        return self.pairs.shape[0]


def sample_pairs(n: int, requested: int, seed: int, tokens: TokenSet, d_min: int = 1) -> PairSample:
    """Sample up to `requested` distinct index pairs, uniformly without
    replacement, discarding pairs with Hamming distance below d_min.

    When the full pair universe is small enough to enumerate, fewer than
    `requested` valid pairs simply means all of them are returned. For
    very large n the sampler rejection-samples with a fixed budget and
    returns what it found (still uniform without replacement).
    """
    if n < 2:
        raise ValidationError(f"pair sampling needs n >= 2, got {n}")
    if tokens.n != n:
        raise ValidationError(f"token set has {tokens.n} sequences, expected n={n}")
    if requested < 1:
        raise ValidationError(f"requested pair count must be >= 1, got {requested}")
    if d_min < 0:
        raise ValidationError(f"d_min must be >= 0, got {d_min}")

    total = n * (n - 1) // 2
    gen = substream(seed, "pair-sampling")

    if total <= _ENUM_PAIR_CAP or requested >= total:
        ii, jj = np.triu_indices(n, k=1)
        ii = ii.astype(np.int64)
        jj = jj.astype(np.int64)
        ham = hamming_for_pairs(tokens.ids, ii, jj)
        valid = ham >= d_min
        vi, vj, vh = ii[valid], jj[valid], ham[valid]
        if vi.size == 0:
            raise ComputationError("no pairs satisfy d_min")
        if vi.size > requested:
            sel = np.sort(gen.choice(vi.size, size=requested, replace=False))
            vi, vj, vh = vi[sel], vj[sel], vh[sel]
        pairs = np.stack([vi, vj], axis=1)
        return PairSample(pairs=pairs, hamming=vh, seed=seed, d_min=d_min)

    # Rejection path: draw, canonicalize to i < j, filter, deduplicate.
    found_i: list[np.ndarray] = []
    found_j: list[np.ndarray] = []
    found_h: list[np.ndarray] = []
    seen = np.empty(0, dtype=np.int64)
    count = 0
    batch = max(2 * requested, 1 << 16)
    for _ in range(64):
        if count >= requested:
            break
        draw = gen.integers(0, n, size=(batch, 2), dtype=np.int64)
        i = draw.min(axis=1)
        j = draw.max(axis=1)
        keep = i != j
        i, j = i[keep], j[keep]
        keys = i * n + j
        uniq, first = np.unique(keys, return_index=True)
        fresh = ~np.isin(uniq, seen)
        take = np.sort(first[fresh])  # earliest draws first
        if take.size == 0:
            continue
        i, j = i[take], j[take]
        h = hamming_for_pairs(tokens.ids, i, j)
        ok = h >= d_min
        i, j, h = i[ok], j[ok], h[ok]
        room = requested - count
        if i.size > room:
            i, j, h = i[:room], j[:room], h[:room]
        found_i.append(i)
        found_j.append(j)
        found_h.append(h)
        count += i.size
        seen = np.concatenate([seen, uniq])
    if count == 0:
        raise ComputationError("no pairs satisfy d_min (none found within the sampling budget)")
    fi = np.concatenate(found_i)
    fj = np.concatenate(found_j)
    fh = np.concatenate(found_h)
    order = np.lexsort((fj, fi))
    pairs = np.stack([fi[order], fj[order]], axis=1)
    return PairSample(pairs=pairs, hamming=fh[order], seed=seed, d_min=d_min)


@dataclass(frozen=True)
class NNDistances:
    """Per-row nearest-neighbor Euclidean distances and witness indices."""

    distances: np.ndarray  # (n,) float64
    nearest: np.ndarray  # (n,) int64


def _pairwise_scan(cloud64: np.ndarray, epsilons: np.ndarray | None = None):
    """Blocked exact pass over all pairs.

    Returns (nn_sq, nn_idx, counts): per-row min squared distance and its
    argmin, plus per-epsilon counts of unordered pairs with distance <=
    epsilon when `epsilons` is given. Each pair's squared distance is
    computed identically in every blocking, so results do not depend on
    the block size.
    """
    n = cloud64.shape[0]
    block = max(1, min(n, _SCAN_BLOCK_ELEMS // n))
    nn_sq = np.empty(n, dtype=np.float64)
    nn_idx = np.empty(n, dtype=np.int64)
    counts = None if epsilons is None else np.zeros(len(epsilons), dtype=np.int64)
    col = np.arange(n)
    for start in range(0, n, block):
        stop = min(start + block, n)
        sq = cdist(cloud64[start:stop], cloud64, metric="sqeuclidean")
        rows = np.arange(start, stop)
        sq[rows - start, rows] = np.inf  # exclude self
        idx = np.argmin(sq, axis=1)
        nn_idx[start:stop] = idx
        nn_sq[start:stop] = sq[rows - start, idx]
        if counts is not None:
            dist = np.sqrt(sq)
            upper = col[None, :] > rows[:, None]
            for e, eps in enumerate(epsilons):
                counts[e] += int(np.count_nonzero(upper & (dist <= eps)))
    return nn_sq, nn_idx, counts


def nn_distances(cloud: np.ndarray) -> NNDistances:
    """Exact nearest-neighbor distance for every row, d_i = min_{j != i} ||x_i - x_j||."""
    arr = _as_cloud64(cloud)
    if arr.shape[0] < 2:
        raise ValidationError("need at least two points")
    nn_sq, nn_idx, _ = _pairwise_scan(arr)
    return NNDistances(distances=np.sqrt(nn_sq), nearest=nn_idx)


def quantile(values, q: float) -> float:
    """Quantile by linear interpolation between order statistics.

    Sort ascending; p = (q/100)*(n-1); interpolate between the floor(p)
    and ceil(p) order statistics. q is a percent in the open interval
    (0, 100).
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValidationError("quantile of an empty multiset")
    if not 0 < q < 100:
        raise ValidationError(f"q must be in (0, 100), got {q}")
    s = np.sort(v)
    p = (q / 100.0) * (s.size - 1)
    lo = int(np.floor(p))
    hi = int(np.ceil(p))
    frac = p - lo
    return float(s[lo] + (s[hi] - s[lo]) * frac)


def percentile_margin(cloud: np.ndarray, q: float) -> float:
    """Worst-percentile separation margin: quantile_q of the NN distances."""
    return quantile(nn_distances(cloud).distances, q)


def min_margin(cloud: np.ndarray) -> float:
    """Exact minimum pairwise distance over the cloud."""
    return margin_witness(cloud)[0]


def margin_witness(cloud: np.ndarray) -> tuple[float, tuple[int, int]]:
    """Minimum pairwise distance together with a pair attaining it."""
    nnd = nn_distances(cloud)
    i = int(np.argmin(nnd.distances))
    j = int(nnd.nearest[i])
    return float(nnd.distances[i]), (min(i, j), max(i, j))


def pair_distances(cloud: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """Euclidean distance for each (i, j) row pair, float64, blocked."""
    arr = _as_cloud64(cloud)
    out = np.empty(pairs.shape[0], dtype=np.float64)
    for s in range(0, pairs.shape[0], _PAIR_BLOCK):
        e = min(s + _PAIR_BLOCK, pairs.shape[0])
        diff = arr[pairs[s:e, 0]] - arr[pairs[s:e, 1]]
        out[s:e] = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    return out


def colip_ratios(cloud: np.ndarray, tokens: TokenSet, sample: PairSample) -> np.ndarray:
    """Per-pair ratio of representation distance to Hamming distance."""
    arr = _as_cloud64(cloud)
    if tokens.n != arr.shape[0]:
        raise ValidationError(f"token set has {tokens.n} sequences, cloud has {arr.shape[0]} rows")
    if len(sample) and int(sample.pairs.max()) >= arr.shape[0]:
        raise ValidationError("pair sample indexes past the end of the cloud")
    if np.any(sample.hamming <= 0):
        raise ComputationError("pair with hamming 0 in sample; token dedup and d_min >= 1 forbid this")
    return pair_distances(arr, sample.pairs) / sample.hamming


def percentile_colip(ratios: np.ndarray, q: float) -> float:
    """Worst-percentile co-Lipschitz constant: quantile_q of the ratios."""
    return quantile(ratios, q)


@dataclass(frozen=True)
class NormStats:
    mean: float
    median: float
    trimmed: float


def row_norms(cloud: np.ndarray) -> np.ndarray:
    arr = _as_cloud64(cloud)
    return np.sqrt(np.einsum("ij,ij->i", arr, arr))


def norm_stats(cloud: np.ndarray) -> NormStats:
    """Mean, median, and 5% trimmed mean of the row norms.

    The trimmed mean drops floor(0.05*N) entries from each end of the
    sorted norms before averaging.
    """
    arr = _as_cloud64(cloud)
    if arr.shape[0] < 1:
        raise ValidationError("need at least one point")
    norms = row_norms(arr)
    n = norms.size
    drop = n // 20  # floor(0.05 * n)
    trimmed = float(np.mean(np.sort(norms)[drop : n - drop]))
    return NormStats(mean=float(np.mean(norms)), median=quantile(norms, 50), trimmed=trimmed)


def normalize(value: float, rho: float) -> float:
    """Scale-invariant form of a metric: value divided by a norm statistic."""
    if rho <= 0:
        raise ComputationError("degenerate cloud: zero mean norm")
    return value / rho
