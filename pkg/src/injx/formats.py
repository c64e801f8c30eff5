"""Bit-exact binary file formats and the run manifest.

Two binary formats, both little-endian regardless of host:

Matrix file (extension .ijxm)
    magic "IJXM" | u16 version = 1 | u8 dtype code (1 = IEEE-754 binary32)
    | u8 reserved = 0 | u64 rows | u64 cols | rows*cols float32, row-major.

Token file (extension .ijxt)
    magic "IJXT" | u16 version = 1 | u16 reserved = 0 | u64 n_seqs
    | u64 seq_len | n_seqs*seq_len uint32 vocabulary ids.

The manifest is a UTF-8 JSON document binding one token file and an
ordered list of per-layer matrices into a validated unit:

    { "model_id": str, "k": int, "n": int, "hidden_dim": int,
      "token_file": str, "layers": [ { "index": int, "file": str } ],
      "meta": object }

Relative paths are resolved against the manifest's directory. Loading
validates every cross-file invariant (row counts, dimensions, strictly
increasing layer indices, distinct fixed-length token sequences, no
non-finite values) and either returns a fully validated handle or
raises a single classified error. Loaded objects are immutable.
"""

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ValidationError

MATRIX_MAGIC = b"IJXM"
TOKEN_MAGIC = b"IJXT"
FORMAT_VERSION = 1
DTYPE_FLOAT32 = 1

_MATRIX_HEADER = struct.Struct("<4sHBBQQ")
_TOKEN_HEADER = struct.Struct("<4sHHQQ")


def _first_nonfinite(matrix: np.ndarray) -> tuple[int, int] | None:
    bad = ~np.isfinite(matrix)
    if not bad.any():
        return None
    flat = int(np.argmax(bad))
    return flat // matrix.shape[1], flat % matrix.shape[1]


def write_matrix(path: str | Path, matrix: np.ndarray) -> None:
    """Write a 2-D array as a binary32 matrix file.

    Values are cast to float32 before the finiteness check, so float64
    inputs that overflow binary32 are rejected rather than written as inf.
    """
    with np.errstate(over="ignore"):  # overflow becomes inf, rejected below
        arr = np.ascontiguousarray(matrix, dtype=np.float32)
    if arr.ndim != 2:
        raise ValidationError(f"matrix must be 2-D, got shape {arr.shape}")
    rows, cols = arr.shape
    if rows < 1 or cols < 1:
        raise ValidationError(f"matrix must have rows >= 1 and cols >= 1, got {rows}x{cols}")
    bad = _first_nonfinite(arr)
    if bad is not None:
        raise ValidationError(f"non-finite value at row {bad[0]}, col {bad[1]}")
    header = _MATRIX_HEADER.pack(MATRIX_MAGIC, FORMAT_VERSION, DTYPE_FLOAT32, 0, rows, cols)
    payload = arr.astype("<f4", copy=False).tobytes()
    Path(path).write_bytes(header + payload)


def read_matrix(path: str | Path) -> np.ndarray:
    """Read and validate a matrix file; returns a float32 array."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"matrix file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < _MATRIX_HEADER.size or raw[:4] != MATRIX_MAGIC:
        raise ValidationError(f"not a matrix file: {path}")
    magic, version, dtype, reserved, rows, cols = _MATRIX_HEADER.unpack_from(raw)
    if version != FORMAT_VERSION:
        raise ValidationError(f"unsupported matrix file version {version}: {path}")
    if dtype != DTYPE_FLOAT32:
        raise ValidationError(f"unsupported dtype code {dtype} (only 1 = binary32): {path}")
    if reserved != 0:
        raise ValidationError(f"nonzero reserved byte in header: {path}")
    if rows < 1 or cols < 1:
        raise ValidationError(f"matrix must have rows >= 1 and cols >= 1, got {rows}x{cols}: {path}")
    expected = rows * cols * 4
    got = len(raw) - _MATRIX_HEADER.size
    if got != expected:
        raise ValidationError(
            f"expected rows*cols values ({rows}x{cols} = {expected} bytes), got {got} bytes: {path}"
        )
    arr = np.frombuffer(raw, dtype="<f4", offset=_MATRIX_HEADER.size).reshape(rows, cols)
    arr = np.ascontiguousarray(arr.astype(np.float32, copy=False))
    bad = _first_nonfinite(arr)
    if bad is not None:
        raise ValidationError(f"non-finite value at row {bad[0]}, col {bad[1]}: {path}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TokenSet:
    """N token sequences of one fixed length K, pairwise distinct."""

    ids: np.ndarray  # (n, k) uint32, read-only

    @property
    def n(self) -> int:
        return self.ids.shape[0]

    @property
    def k(self) -> int:
        return self.ids.shape[1]


def _check_distinct(ids: np.ndarray, path: str | Path) -> None:
    seen: dict[bytes, int] = {}
    for i in range(ids.shape[0]):
        key = ids[i].tobytes()
        if key in seen:
            raise ValidationError(
                f"duplicate token sequences at indices {seen[key]} and {i}: {path}"
            )
        seen[key] = i


def write_tokens(path: str | Path, ids: np.ndarray) -> None:
    """Write an (n, k) array of uint32 vocabulary ids as a token file."""
    arr = np.ascontiguousarray(ids, dtype=np.uint32)
    if arr.ndim != 2:
        raise ValidationError(f"token ids must be 2-D, got shape {arr.shape}")
    n_seqs, seq_len = arr.shape
    if n_seqs < 1 or seq_len < 1:
        raise ValidationError(f"need n_seqs >= 1 and seq_len >= 1, got {n_seqs}x{seq_len}")
    _check_distinct(arr, path)
    header = _TOKEN_HEADER.pack(TOKEN_MAGIC, FORMAT_VERSION, 0, n_seqs, seq_len)
    Path(path).write_bytes(header + arr.astype("<u4", copy=False).tobytes())


def read_tokens(path: str | Path) -> TokenSet:
    """Read and validate a token file."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"token file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < _TOKEN_HEADER.size or raw[:4] != TOKEN_MAGIC:
        raise ValidationError(f"not a token file: {path}")
    magic, version, reserved, n_seqs, seq_len = _TOKEN_HEADER.unpack_from(raw)
    if version != FORMAT_VERSION:
        raise ValidationError(f"unsupported token file version {version}: {path}")
    if reserved != 0:
        raise ValidationError(f"nonzero reserved bytes in header: {path}")
    if n_seqs < 1 or seq_len < 1:
        raise ValidationError(f"need n_seqs >= 1 and seq_len >= 1, got {n_seqs}x{seq_len}: {path}")
    expected = n_seqs * seq_len * 4
    got = len(raw) - _TOKEN_HEADER.size
    if got != expected:
        raise ValidationError(
            f"expected n_seqs*seq_len ids ({n_seqs}x{seq_len} = {expected} bytes), got {got} bytes: {path}"
        )
    ids = np.frombuffer(raw, dtype="<u4", offset=_TOKEN_HEADER.size).reshape(n_seqs, seq_len)
    ids = np.ascontiguousarray(ids.astype(np.uint32, copy=False))
    _check_distinct(ids, path)
    ids.setflags(write=False)
    return TokenSet(ids=ids)


@dataclass(frozen=True)
class RunHandle:
    """A fully validated run: token set plus per-layer matrices."""

    model_id: str
    k: int
    n: int
    hidden_dim: int
    tokens: TokenSet
    layer_indices: tuple[int, ...]
    matrices: dict[int, np.ndarray]
    meta: dict = field(default_factory=dict)
    manifest_path: str = ""
    token_digest: str = ""

    def layer(self, index: int) -> np.ndarray:
        return self.matrices[index]

    @property
    def last_layer_index(self) -> int:
        return self.layer_indices[-1]


def write_manifest(
    path: str | Path,
    *,
    model_id: str,
    k: int,
    n: int,
    hidden_dim: int,
    token_file: str,
    layers: list[tuple[int, str]],
    meta: dict | None = None,
) -> None:
    doc = {
        "model_id": model_id,
        "k": k,
        "n": n,
        "hidden_dim": hidden_dim,
        "token_file": token_file,
        "layers": [{"index": idx, "file": f} for idx, f in layers],
        "meta": meta or {},
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_manifest(path: str | Path) -> RunHandle:
    """Load a manifest and validate every cross-file invariant.

    Either returns a handle satisfying all invariants or raises one
    ValidationError; never returns a partially validated handle.
    """
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ValidationError(f"manifest is not valid JSON: {path} ({exc})") from exc
    if not isinstance(doc, dict):
        raise ValidationError(f"manifest must be a JSON object: {path}")

    for key in ("model_id", "k", "n", "hidden_dim", "token_file", "layers"):
        if key not in doc:
            raise ValidationError(f"manifest missing required key '{key}': {path}")
    model_id = str(doc["model_id"])
    k, n, hidden_dim = int(doc["k"]), int(doc["n"]), int(doc["hidden_dim"])
    if k < 1 or n < 1 or hidden_dim < 1:
        raise ValidationError(f"k, n, hidden_dim must all be >= 1: {path}")
    meta = doc.get("meta") or {}
    if not isinstance(meta, dict):
        raise ValidationError(f"manifest meta must be an object: {path}")

    layers = doc["layers"]
    if not isinstance(layers, list) or len(layers) == 0:
        raise ValidationError(f"at least one layer required: {path}")

    base = path.parent

    token_path = base / str(doc["token_file"])
    tokens = read_tokens(token_path)
    if tokens.n != n or tokens.k != k:
        raise ValidationError(
            f"token file is {tokens.n}x{tokens.k}, manifest declares n={n}, k={k}: {token_path}"
        )
    token_digest = hashlib.sha256(token_path.read_bytes()).hexdigest()

    indices: list[int] = []
    matrices: dict[int, np.ndarray] = {}
    prev = 0
    for entry in layers:
        if not isinstance(entry, dict) or "index" not in entry or "file" not in entry:
            raise ValidationError(f"each layer entry needs 'index' and 'file': {path}")
        idx = int(entry["index"])
        if idx < 1:
            raise ValidationError(f"layer indices must be >= 1, got {idx}: {path}")
        if idx <= prev:
            raise ValidationError(f"layer indices must be strictly increasing, got {idx} after {prev}: {path}")
        prev = idx
        matrix = read_matrix(base / str(entry["file"]))
        if matrix.shape != (n, hidden_dim):
            raise ValidationError(
                f"layer {idx}: matrix is {matrix.shape[0]}x{matrix.shape[1]}, "
                f"manifest declares n={n}, hidden_dim={hidden_dim}"
            )
        indices.append(idx)
        matrices[idx] = matrix

    return RunHandle(
        model_id=model_id,
        k=k,
        n=n,
        hidden_dim=hidden_dim,
        tokens=tokens,
        layer_indices=tuple(indices),
        matrices=matrices,
        meta=meta,
        manifest_path=str(path),
        token_digest=token_digest,
    )
