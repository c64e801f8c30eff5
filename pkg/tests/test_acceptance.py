"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s`. Every tolerance is
pinned here; the oracles (naive NN loop, pure-Python quantile) are
independent of the code paths they check.
"""

import json
import time

import numpy as np
import pytest
from click.testing import CliRunner

from injx import (
    ALL_INJECTIVE,
    SafetyVerdict,
    exact_collisions,
    hamming_embed_cloud,
    load_manifest,
    midpoint_collapse,
    min_margin,
    near_collision_sweep,
    nn_distances,
    norm_stats,
    orthonormal_codebooks,
    percentile_colip,
    percentile_margin,
    perturbation_oracle,
    quantile,
    quantize_cloud,
    sample_pairs,
    spec_for,
    step_size,
    substream,
    synth_generate,
    verify_quantization_corollary,
)
from injx.cli import main
from injx.metrics import colip_ratios, PairSample
from injx.runs import RunConfig, run_quantization

from conftest import distinct_random_tokens, make_tokens


def _ok(name: str) -> None:
    print(f"[PASS] {name}")


def naive_nn_oracle(cloud: np.ndarray) -> np.ndarray:
    x = np.asarray(cloud, dtype=np.float64)
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        diff = x - x[i]
        sq = np.add.reduce(diff * diff, axis=1)
        sq[i] = np.inf
        out[i] = np.sqrt(sq.min())
    return out


def quantile_oracle(values, q) -> float:
    s = sorted(float(v) for v in values)
    p = (q / 100.0) * (len(s) - 1)
    lo = int(np.floor(p))
    hi = int(np.ceil(p))
    return s[lo] + (s[hi] - s[lo]) * (p - lo)


def test_nn_oracle_equivalence():
    """50 random clouds (N<=500, d<=64, scales 1e-3..1e3): nn_distances
    matches the naive float64 double loop to rel err <= 1e-6 in < 30 s."""
    gen = np.random.default_rng(101)
    start = time.perf_counter()
    for _ in range(50):
        n = int(gen.integers(2, 501))
        d = int(gen.integers(1, 65))
        scale = 10.0 ** gen.uniform(-3, 3)
        cloud = (gen.standard_normal((n, d)) * scale).astype(np.float32)
        mine = nn_distances(cloud).distances
        ref = naive_nn_oracle(cloud)
        assert np.all(np.abs(mine - ref) <= 1e-6 * np.maximum(ref, np.finfo(float).tiny))
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0, f"took {elapsed:.1f}s"
    _ok(f"NN oracle equivalence (50 clouds, {elapsed:.1f}s)")


def test_quantile_and_margin_oracle():
    """100 random multisets match sort-and-interpolate exactly;
    min_margin <= percentile margin for q in {1,5,50} on every cloud."""
    gen = np.random.default_rng(202)
    for _ in range(100):
        n = int(gen.integers(1, 300))
        vals = gen.standard_normal(n) * 10.0 ** gen.integers(-3, 4)
        q = float(gen.uniform(0.1, 99.9))
        assert quantile(vals, q) == quantile_oracle(vals, q)
    for _ in range(30):
        cloud = gen.standard_normal((int(gen.integers(2, 120)), int(gen.integers(1, 24))))
        mm = min_margin(cloud)
        for q in (1, 5, 50):
            assert mm <= percentile_margin(cloud, q)
    _ok("quantile/margin oracle (100 multisets exact, ordering on 30 clouds)")


def test_scale_invariance():
    """Normalized margin and colip of c*X match X to rel err <= 1e-6 for
    c in {1e-4, 1, 1e4}."""
    gen = np.random.default_rng(303)
    tokens = distinct_random_tokens(80, 6, 12, seed=30)
    cloud = gen.standard_normal((80, 16))
    sample = sample_pairs(80, 500, 7, tokens, 1)
    base_margin = percentile_margin(cloud, 1) / norm_stats(cloud).mean
    base_colip = percentile_colip(colip_ratios(cloud, tokens, sample), 1) / norm_stats(cloud).mean
    for c in (1e-4, 1.0, 1e4):
        scaled = cloud * c
        m = percentile_margin(scaled, 1) / norm_stats(scaled).mean
        a = percentile_colip(colip_ratios(scaled, tokens, sample), 1) / norm_stats(scaled).mean
        assert m == pytest.approx(base_margin, rel=1e-6)
        assert a == pytest.approx(base_colip, rel=1e-6)
    _ok("scale invariance of normalized margin and colip (c in {1e-4, 1, 1e4})")


def test_half_margin_theorem_both_bounds():
    """100 random injective clouds: r = 0.49*m with 200 trials stays
    injective; midpoint collapse (displacement exactly m/2) always
    collides. < 60 s."""
    gen = np.random.default_rng(404)
    start = time.perf_counter()
    for trial in range(100):
        n = int(gen.integers(2, 40))
        d = int(gen.integers(1, 8))
        cloud = gen.standard_normal((n, d)) * 10.0 ** gen.integers(-2, 3)
        m = min_margin(cloud)
        assert m > 0
        result = perturbation_oracle(cloud, 0.49 * m, 200, seed=trial)
        assert result.verdict == ALL_INJECTIVE, f"trial {trial}: {result}"
        collapsed = midpoint_collapse(cloud)
        assert exact_collisions(collapsed).colliding_pairs >= 1
        sup = np.sqrt(((collapsed - cloud) ** 2).sum(axis=1)).max()
        assert sup == pytest.approx(m / 2, rel=1e-9)
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0, f"took {elapsed:.1f}s"
    _ok(f"half-margin theorem, both bounds (100 clouds x 200 trials, {elapsed:.1f}s)")


def test_corollary_soundness_sweep():
    """b in 1..12 over 200 random clouds (d <= 64): every SAFE verdict
    co-occurs with zero quantized collisions; zero exceptions."""
    gen = np.random.default_rng(505)
    checked = 0
    safe_seen = 0
    for _ in range(200):
        n = int(gen.integers(2, 60))
        d = int(gen.integers(1, 65))
        cloud = (gen.standard_normal((n, d)) * 10.0 ** gen.integers(-3, 4)).astype(np.float32)
        if min_margin(cloud) == 0:
            continue
        for bits in range(1, 13):
            record = verify_quantization_corollary(cloud, bits)
            checked += 1
            if record.verdict is SafetyVerdict.SAFE:
                safe_seen += 1
                assert record.collision_count == 0
    assert safe_seen > 0  # the sweep must actually exercise SAFE verdicts
    _ok(f"corollary soundness ({checked} (cloud, b) checks, {safe_seen} SAFE, 0 violations)")


def test_quantizer_error_bound():
    """1e6 random in-range coordinates: |Q_b(x) - x| <= step/2 exactly,
    codes within [-2^(b-1), 2^(b-1)]."""
    gen = np.random.default_rng(606)
    remaining = 1_000_000
    while remaining > 0:
        count = min(remaining, 200_000)
        bits = int(gen.integers(1, 13))
        r = float(10.0 ** gen.uniform(-2, 2))
        x = (gen.random((count // 100, 100)) * 2 - 1) * r
        spec = spec_for(np.array([[r]]), bits)
        out = quantize_cloud(x, spec)
        err = np.abs(out.codes * spec.step - x)
        assert np.all(err <= spec.step / 2)
        assert np.all(np.abs(out.codes) <= 2 ** (bits - 1))
        remaining -= count
    _ok("quantizer error bound on 1e6 coordinates")


def test_critical_bitwidth_paper_specialization():
    """d = 4096: 8-bit safety is exactly R < (255/128) m and 4-bit
    R < (15/128) m, checked at the boundary +- 1e-9."""
    from injx import critical_bitwidth, safety_check

    m = 1.0
    d = 4096
    for bits, ratio in ((8, 255 / 128), (4, 15 / 128)):
        below = step_size(ratio * m - 1e-9, bits)
        above = step_size(ratio * m + 1e-9, bits)
        assert safety_check(m, d, below) is SafetyVerdict.SAFE
        assert safety_check(m, d, above) is SafetyVerdict.UNPROVEN
    assert critical_bitwidth(1.0, 4096, 1.9) == 8
    assert critical_bitwidth(1.0, 4096, 2.1) == 9
    _ok("critical bitwidth reproduces the d=4096 thresholds (255/128, 15/128)")


def test_constructed_quantization_collision(tmp_path):
    """Two rows inside one 4-bit cell but distinct 8-bit cells: the
    quantization run reports collisions at 4 bits and none at 8."""
    from injx import write_manifest, write_matrix, write_tokens

    d4 = step_size(1.0, 4)
    cloud = np.array(
        [
            [1.0, 1.0, 0.0, 0.0],
            [0.1 * d4, 0.0, 0.3, 0.0],
            [0.3 * d4, 0.0, 0.3, 0.0],
            [-0.8, 0.5, -0.2, 0.7],
        ],
        dtype=np.float32,
    )
    ids = np.array([[1, 2], [3, 4], [5, 6], [7, 8]], dtype=np.uint32)
    write_tokens(tmp_path / "t.ijxt", ids)
    write_matrix(tmp_path / "l1.ijxm", cloud)
    write_manifest(
        tmp_path / "manifest.json", model_id="constructed", k=2, n=4, hidden_dim=4,
        token_file="t.ijxt", layers=[(1, "l1.ijxm")],
    )
    handle = load_manifest(tmp_path / "manifest.json")
    report = run_quantization(handle, [8, 4], RunConfig(pairs=10, bootstrap_resamples=5))
    by_bits = {s.bits: s.layers[0] for s in report.quantization.per_bit}
    assert by_bits[4].collisions >= 1
    assert by_bits[8].collisions == 0
    assert report.layers[0].collisions == 0
    _ok("constructed quantization collision (>=1 at 4-bit, 0 at 8-bit)")


def test_planted_duplicates(tmp_path):
    """synth planted-duplicates m=5, N=2000: exactly 5 colliding pairs,
    zero margin, near-collision fraction >= 5/(N(N-1)/2) at every eps."""
    manifest = synth_generate(
        tmp_path / "p", mode="planted-duplicates", n=2000, d=16, layers=1, k=6, vocab=50, seed=12, dups=5
    )
    handle = load_manifest(manifest)
    cloud = handle.layer(1)
    report = exact_collisions(cloud)
    assert report.colliding_pairs == 5
    assert min_margin(cloud) == 0.0
    total = 2000 * 1999 // 2
    sweep = near_collision_sweep(cloud, [1e-6, 1e-4, 1e-2], mode="exact")
    assert all(f >= 5 / total for f in sweep.fractions)
    _ok("planted duplicates (exactly 5 pairs, zero margin, sweep floor)")


def test_hamming_embed_ground_truth():
    """Orthonormal codebooks: every Hamming-1 ratio equals sqrt(2) to
    1e-5, and the percentile colip over Hamming-1 pairs is sqrt(2) at
    any q."""
    k, vocab, d = 4, 6, 32
    base = np.zeros(k, dtype=np.uint32)
    rows = [base]
    for t in range(k):
        for v in (1, 2, 3):
            mut = base.copy()
            mut[t] = v
            rows.append(mut)
    ids = np.stack(rows)
    tokens = make_tokens(ids)
    books = orthonormal_codebooks(k, vocab, d, substream(77, "acceptance/codebooks"))
    cloud = hamming_embed_cloud(ids, books).astype(np.float32)

    full = sample_pairs(len(rows), len(rows) * (len(rows) - 1) // 2, 0, tokens, 1)
    keep = full.hamming == 1
    assert int(keep.sum()) >= len(rows) - 1
    restricted = PairSample(pairs=full.pairs[keep], hamming=full.hamming[keep], seed=0, d_min=1)
    ratios = colip_ratios(cloud, tokens, restricted)
    assert np.all(np.abs(ratios - np.sqrt(2.0)) <= 1e-5)
    for q in (1, 25, 50, 75, 99):
        assert percentile_colip(ratios, q) == pytest.approx(np.sqrt(2.0), abs=1e-5)
    _ok(f"hamming-embed ground truth ({int(keep.sum())} Hamming-1 pairs at sqrt(2))")


def test_end_to_end_determinism(tmp_path):
    """Two CLI layerwise runs with one seed produce byte-identical JSON;
    bootstrap intervals satisfy lo <= hi and are seed-reproducible."""
    runner = CliRunner()
    result = runner.invoke(main, [
        "synth", "--mode", "gaussian", "--n", "80", "--d", "12", "--layers", "3",
        "--k", "4", "--vocab", "12", "--seed", "5", "--out", str(tmp_path / "g"),
    ])
    assert result.exit_code == 0, result.output
    manifest = result.output.strip()
    payloads = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        result = runner.invoke(main, [
            "layerwise", "--manifest", manifest, "--pairs", "500",
            "--bootstrap", "200", "--seed", "31", "--out", str(out),
        ])
        assert result.exit_code == 0, result.output
        payloads.append(out.read_bytes())
    assert payloads[0] == payloads[1]
    report = json.loads(payloads[0])
    for diag in report["layers"]:
        for key in ("margin_interval", "margin_interval_norm", "colip_interval", "colip_interval_norm"):
            assert diag[key]["lo"] <= diag[key]["hi"]
            assert diag[key]["resamples"] == 200
    _ok("end-to-end determinism (byte-identical reports, interval sanity)")


def test_desk_scale_performance_envelope(tmp_path):
    """Layerwise run on N=2000, d=256, L=8 with defaults (50000 pairs,
    200 resamples) completes in < 60 s."""
    manifest = synth_generate(
        tmp_path / "big", mode="gaussian", n=2000, d=256, layers=8, k=8, vocab=64, seed=77
    )
    runner = CliRunner()
    start = time.perf_counter()
    result = runner.invoke(main, ["layerwise", "--manifest", str(manifest), "--out", str(tmp_path / "r.json")])
    elapsed = time.perf_counter() - start
    assert result.exit_code == 0, result.output
    assert elapsed < 60.0, f"took {elapsed:.1f}s"
    report = json.loads((tmp_path / "r.json").read_text())
    assert len(report["layers"]) == 8
    assert report["config"]["pairs"] == 50000
    assert report["config"]["bootstrap_resamples"] == 200
    _ok(f"desk-scale performance envelope ({elapsed:.1f}s for N=2000, d=256, L=8)")
