import numpy as np
import pytest

from injx import TokenSet


def make_tokens(ids) -> TokenSet:
    arr = np.ascontiguousarray(ids, dtype=np.uint32)
    arr.setflags(write=False)
    return TokenSet(ids=arr)


def distinct_random_tokens(n: int, k: int, vocab: int, seed: int) -> TokenSet:
    assert n <= vocab**k, f"cannot draw {n} distinct sequences from capacity {vocab**k}"
    gen = np.random.default_rng(seed)
    rows: list[tuple] = []
    seen = set()
    while len(rows) < n:
        row = tuple(int(v) for v in gen.integers(0, vocab, size=k))
        if row not in seen:
            seen.add(row)
            rows.append(row)
    return make_tokens(np.array(rows, dtype=np.uint32))


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
