"""Synthetic data generation: ground-truth fixtures with known geometry.

Three modes:

gaussian
    iid standard-normal rows, layer l scaled by l (mimics the usual
    growth of representation norms with depth).
planted-duplicates
    gaussian, with `dups` disjoint row pairs copied bitwise in every
    layer, so exact collision counts are known by construction.
hamming-embed
    x_i = sum_t E_t[s_{i,t}] with per-position codebooks whose columns
    are orthonormal (needs k*vocab <= d). A pair differing in h
    positions then sits at distance sqrt(2h), so every Hamming-1 pair
    has representation-to-Hamming ratio exactly sqrt(2).
"""

from pathlib import Path

import numpy as np

from .exceptions import ValidationError
from .formats import write_manifest, write_matrix, write_tokens
from .rng import substream

SYNTH_MODES = ("gaussian", "planted-duplicates", "hamming-embed")


def random_distinct_tokens(n: int, k: int, vocab: int, gen: np.random.Generator) -> np.ndarray:
    """Draw n pairwise-distinct length-k sequences over ids [0, vocab)."""
    if n < 1 or k < 1 or vocab < 1:
        raise ValidationError(f"need n, k, vocab >= 1, got n={n}, k={k}, vocab={vocab}")
    capacity = vocab**k  # exact in Python ints
    if n > capacity:
        raise ValidationError(f"cannot draw {n} distinct sequences: capacity vocab^k = {capacity}")
    out: list[np.ndarray] = []
    seen: set[bytes] = set()
    while len(out) < n:
        batch = gen.integers(0, vocab, size=(max(n, 64), k), dtype=np.uint32)
        for row in batch:
            key = row.tobytes()
            if key not in seen:
                seen.add(key)
                out.append(row)
                if len(out) == n:
                    break
    return np.stack(out)


def orthonormal_codebooks(k: int, vocab: int, d: int, gen: np.random.Generator) -> np.ndarray:
    """Per-position codebooks E_t with globally orthonormal columns.

    Returns a (k, vocab, d) array; E[t, v] is the vector added for token
    v at position t. Requires k*vocab <= d.
    """
    if k * vocab > d:
        raise ValidationError(f"hamming-embed needs k*vocab <= d, got {k}*{vocab} > {d}")
    basis = np.linalg.qr(gen.standard_normal((d, k * vocab)))[0]  # (d, k*vocab)
    return np.ascontiguousarray(basis.T.reshape(k, vocab, d))


def hamming_embed_cloud(ids: np.ndarray, codebooks: np.ndarray) -> np.ndarray:
    """x_i = sum over positions t of codebooks[t, ids[i, t]] (float64)."""
    n, k = ids.shape
    d = codebooks.shape[2]
    cloud = np.zeros((n, d), dtype=np.float64)
    for t in range(k):
        cloud += codebooks[t, ids[:, t]]
    return cloud


def synth_generate(
    out_dir: str | Path,
    *,
    mode: str,
    n: int,
    d: int,
    layers: int,
    k: int,
    vocab: int,
    seed: int,
    dups: int = 0,
) -> Path:
    """Write a token file, per-layer matrices, and a manifest; returns the
    manifest path. Identical arguments produce bit-identical files."""
    if mode not in SYNTH_MODES:
        raise ValidationError(f"mode must be one of {SYNTH_MODES}, got {mode!r}")
    if n < 2:
        raise ValidationError(f"need n >= 2, got {n}")
    if d < 1 or layers < 1:
        raise ValidationError(f"need d >= 1 and layers >= 1, got d={d}, layers={layers}")
    if mode == "planted-duplicates":
        if dups < 1:
            raise ValidationError("planted-duplicates needs dups >= 1")
        if 2 * dups > n:
            raise ValidationError(f"cannot plant {dups} duplicate pairs in {n} rows")
    elif dups:
        raise ValidationError(f"dups is only meaningful for planted-duplicates, got dups={dups}")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    ids = random_distinct_tokens(n, k, vocab, substream(seed, "synthesis/tokens"))
    token_file = "tokens.ijxt"
    write_tokens(out / token_file, ids)

    if mode == "planted-duplicates":
        chosen = substream(seed, "synthesis/dups").permutation(n)[: 2 * dups]
        planted = [(int(chosen[2 * t]), int(chosen[2 * t + 1])) for t in range(dups)]
    else:
        planted = []

    entries: list[tuple[int, str]] = []
    for layer in range(1, layers + 1):
        gen = substream(seed, "synthesis/layer", layer)
        if mode == "hamming-embed":
            books = orthonormal_codebooks(k, vocab, d, gen)
            cloud = hamming_embed_cloud(ids, books).astype(np.float32)
        else:
            cloud = (gen.standard_normal((n, d)) * float(layer)).astype(np.float32)
            for a, b in planted:
                cloud[b] = cloud[a]  # bitwise copy
        name = f"layer_{layer:03d}.ijxm"
        write_matrix(out / name, cloud)
        entries.append((layer, name))

    manifest = out / "manifest.json"
    write_manifest(
        manifest,
        model_id=f"synth-{mode}",
        k=k,
        n=n,
        hidden_dim=d,
        token_file=token_file,
        layers=entries,
        meta={"mode": mode, "seed": seed, "dups": dups, "vocab": vocab},
    )
    return manifest
