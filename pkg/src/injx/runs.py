"""Orchestration of the diagnostic protocols over validated manifests.

One pair sample is drawn per manifest and shared across its layers:
pairs are a property of the token set, and resampling per layer would
add noise to cross-layer comparisons. Layers are processed in parallel
(capped by INJX_THREADS) and assembled in index order; every per-layer
computation is independent and internally deterministic, so reports are
bit-identical for any worker count.
"""

import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bootstrap import BootstrapInterval, bootstrap_margin_exact, bootstrap_quantile
from .collisions import DEFAULT_EXACT_SWEEP_BUDGET, exact_collisions, near_collision_sweep
from .exceptions import ComputationError, InjxError, ValidationError
from .formats import RunHandle
from .metrics import (
    PairSample,
    colip_ratios,
    nn_distances,
    norm_stats,
    normalize,
    quantile,
    sample_pairs,
)
from .quantize import critical_bitwidth, dynamic_range, quantize_cloud, safety_check, step_size, QuantSpec
from .report_models import (
    ConfigEcho,
    CriticalBitwidth,
    DiagnosticsReport,
    Interval,
    LayerDiagnostics,
    ManifestSummary,
    NormalizedPair,
    QuantBitSection,
    QuantizationSection,
    QuantLayerDiagnostics,
    SweepEntry,
    SweepFractions,
    SweepReport,
    ToolInfo,
)

DEFAULT_EPSILONS = (1e-6, 1e-4, 1e-2)
DEFAULT_PAIRS = 50_000
DEFAULT_BITS = (8, 4)


@dataclass(frozen=True)
class RunConfig:
    q: float = 1.0
    d_min: int = 1
    pairs: int = DEFAULT_PAIRS
    seed: int = 0
    epsilons: tuple[float, ...] = DEFAULT_EPSILONS
    bootstrap_resamples: int = 200
    exact_bootstrap: bool = False
    near_collision_budget: int = DEFAULT_EXACT_SWEEP_BUDGET
    workers: int | None = None


def _worker_count(config: RunConfig, jobs: int) -> int:
    if config.workers is not None:
        limit = config.workers
    else:
        env = os.environ.get("INJX_THREADS")
        limit = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(limit, jobs))


def _tool() -> ToolInfo:
    return ToolInfo(version=__version__)


def _summary(handle: RunHandle) -> ManifestSummary:
    return ManifestSummary(
        model_id=handle.model_id,
        k=handle.k,
        n=handle.n,
        hidden_dim=handle.hidden_dim,
        layers=list(handle.layer_indices),
        token_digest=handle.token_digest,
        manifest_path=handle.manifest_path,
        meta=handle.meta,
    )


def _echo(config: RunConfig, bits: list[int] | None = None) -> ConfigEcho:
    return ConfigEcho(
        q=config.q,
        d_min=config.d_min,
        pairs=config.pairs,
        seed=config.seed,
        epsilons=list(config.epsilons),
        bootstrap_resamples=config.bootstrap_resamples,
        bootstrap_mode="exact" if config.exact_bootstrap else "multiset",
        bits=bits,
        near_collision_budget=config.near_collision_budget,
    )


def _interval(iv: BootstrapInterval) -> Interval:
    return Interval(lo=iv.lo, point=iv.point, hi=iv.hi, resamples=iv.resamples)


def _scaled_interval(iv: BootstrapInterval, rho: float) -> Interval:
    return Interval(
        lo=normalize(iv.lo, rho),
        point=normalize(iv.point, rho),
        hi=normalize(iv.hi, rho),
        resamples=iv.resamples,
    )


def _layer_diagnostics(
    layer: int,
    cloud: np.ndarray,
    handle: RunHandle,
    sample: PairSample,
    config: RunConfig,
) -> LayerDiagnostics:
    arr = np.ascontiguousarray(cloud, dtype=np.float64)
    stats = norm_stats(arr)
    nnd = nn_distances(arr)
    margin_q = quantile(nnd.distances, config.q)
    min_m = float(np.min(nnd.distances))
    ratios = colip_ratios(arr, handle.tokens, sample)
    colip_q = quantile(ratios, config.q)
    collisions = exact_collisions(cloud, layer=layer).colliding_pairs

    if config.exact_bootstrap:
        margin_iv = bootstrap_margin_exact(
            arr, config.q, config.bootstrap_resamples, config.seed, tag=f"bootstrap-margin/layer-{layer}"
        )
    else:
        margin_iv = bootstrap_quantile(
            nnd.distances, config.q, config.bootstrap_resamples, config.seed,
            tag=f"bootstrap-margin/layer-{layer}",
        )
    colip_iv = bootstrap_quantile(
        ratios, config.q, config.bootstrap_resamples, config.seed, tag=f"bootstrap-colip/layer-{layer}"
    )

    sweep = None
    if config.epsilons:
        mode = "exact" if arr.shape[0] <= config.near_collision_budget else "sampled"
        result = near_collision_sweep(
            arr, config.epsilons, mode=mode, sample=sample, exact_budget=config.near_collision_budget
        )
        sweep = SweepFractions(
            epsilons=list(result.epsilons),
            fractions=list(result.fractions),
            mode=result.mode,
            pairs_considered=result.pairs_considered,
        )

    diag = LayerDiagnostics(
        layer=layer,
        q=config.q,
        mean_norm=stats.mean,
        median_norm=stats.median,
        trimmed_norm=stats.trimmed,
        margin_q=margin_q,
        margin_q_norm=normalize(margin_q, stats.mean),
        colip_q=colip_q,
        colip_q_norm=normalize(colip_q, stats.mean),
        min_margin=min_m,
        collisions=collisions,
        normalized_by={
            "median": NormalizedPair(
                margin_q=normalize(margin_q, stats.median), colip_q=normalize(colip_q, stats.median)
            ),
            "trimmed": NormalizedPair(
                margin_q=normalize(margin_q, stats.trimmed), colip_q=normalize(colip_q, stats.trimmed)
            ),
        },
        margin_interval=_interval(margin_iv),
        margin_interval_norm=_scaled_interval(margin_iv, stats.mean),
        colip_interval=_interval(colip_iv),
        colip_interval_norm=_scaled_interval(colip_iv, stats.mean),
        near_collisions=sweep,
    )
    _check_layer_invariants(diag)
    return diag


def _check_layer_invariants(diag: LayerDiagnostics) -> None:
    if diag.min_margin > diag.margin_q:
        raise InjxError(
            f"internal: layer {diag.layer} min_margin {diag.min_margin} exceeds margin_q {diag.margin_q}"
        )
    if (diag.collisions > 0) != (diag.min_margin == 0.0):
        raise InjxError(
            f"internal: layer {diag.layer} collisions={diag.collisions} "
            f"inconsistent with min_margin={diag.min_margin}"
        )


def _map_layers(handle: RunHandle, sample: PairSample, config: RunConfig) -> list[LayerDiagnostics]:
    def job(layer: int) -> LayerDiagnostics:
        try:
            return _layer_diagnostics(layer, handle.layer(layer), handle, sample, config)
        except InjxError as exc:
            raise type(exc)(f"layer {layer}: {exc}") from exc

    workers = _worker_count(config, len(handle.layer_indices))
    if workers == 1:
        return [job(layer) for layer in handle.layer_indices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(job, layer) for layer in handle.layer_indices]
        return [f.result() for f in futures]  # in layer order; first failure wins


def run_layerwise(handle: RunHandle, config: RunConfig = RunConfig()) -> DiagnosticsReport:
    """Full-precision diagnostics for every layer of one manifest."""
    sample = sample_pairs(handle.n, config.pairs, config.seed, handle.tokens, config.d_min)
    layers = _map_layers(handle, sample, config)
    return DiagnosticsReport(
        kind="layerwise",
        tool=_tool(),
        manifest=_summary(handle),
        config=_echo(config),
        layers=layers,
    )


def _quant_layer(
    layer: int,
    cloud: np.ndarray,
    handle: RunHandle,
    sample: PairSample,
    config: RunConfig,
    bits: int,
    baseline_min_margin: float,
) -> QuantLayerDiagnostics:
    r = dynamic_range(cloud)
    step = step_size(r, bits)
    quantized = quantize_cloud(cloud, QuantSpec(bits=bits, range=r, step=step, layer=layer))
    values = np.ascontiguousarray(quantized.values, dtype=np.float64)
    stats = norm_stats(values)
    nnd = nn_distances(values)
    margin_q = quantile(nnd.distances, config.q)
    ratios = colip_ratios(values, handle.tokens, sample)
    colip_q = quantile(ratios, config.q)
    return QuantLayerDiagnostics(
        layer=layer,
        range=r,
        step=step,
        mean_norm=stats.mean,
        margin_q=margin_q,
        margin_q_norm=normalize(margin_q, stats.mean),
        colip_q=colip_q,
        colip_q_norm=normalize(colip_q, stats.mean),
        min_margin=float(np.min(nnd.distances)),
        collisions=exact_collisions(quantized.codes, layer=layer).colliding_pairs,
        safety=safety_check(baseline_min_margin, cloud.shape[1], step).value,
    )


def run_quantization(
    handle: RunHandle, bits: list[int] | tuple[int, ...] = DEFAULT_BITS, config: RunConfig = RunConfig()
) -> DiagnosticsReport:
    """Full-precision baseline plus quantized diagnostics per bitwidth.

    Collision counts on quantized states hash the integer code matrix;
    safety verdicts use the full-precision minimum margin.
    """
    bits = [int(b) for b in bits]
    if not bits:
        raise ValidationError("bits must be non-empty")
    if len(set(bits)) != len(bits):
        raise ValidationError(f"bits must be distinct, got {bits}")
    # Surface degenerate ranges before any heavy work, naming the layer.
    for layer in handle.layer_indices:
        try:
            step_size(dynamic_range(handle.layer(layer)), bits[0])
        except ComputationError as exc:
            raise ComputationError(f"layer {layer}: {exc}") from exc
    base = run_layerwise(handle, config)
    baseline_margin = {diag.layer: diag.min_margin for diag in base.layers}

    sample = sample_pairs(handle.n, config.pairs, config.seed, handle.tokens, config.d_min)
    crit: list[CriticalBitwidth] = []
    for layer in handle.layer_indices:
        m = baseline_margin[layer]
        if m == 0:
            crit.append(CriticalBitwidth(layer=layer, b_crit=None))
            continue
        try:
            r = dynamic_range(handle.layer(layer))
            crit.append(CriticalBitwidth(layer=layer, b_crit=critical_bitwidth(m, handle.hidden_dim, r)))
        except (ComputationError, ValidationError) as exc:
            raise type(exc)(f"layer {layer}: {exc}") from exc

    per_bit: list[QuantBitSection] = []
    for b in bits:
        entries: list[QuantLayerDiagnostics] = []
        for layer in handle.layer_indices:
            try:
                entries.append(
                    _quant_layer(layer, handle.layer(layer), handle, sample, config, b, baseline_margin[layer])
                )
            except InjxError as exc:
                raise type(exc)(f"layer {layer}: {exc}") from exc
        per_bit.append(QuantBitSection(bits=b, layers=entries))

    return DiagnosticsReport(
        kind="quantization",
        tool=base.tool,
        manifest=base.manifest,
        config=_echo(config, bits=bits),
        layers=base.layers,
        quantization=QuantizationSection(per_bit=per_bit, critical_bitwidth=crit),
    )


def _last_layer_entry(axis: str, handle: RunHandle, config: RunConfig, k: int | None) -> SweepEntry:
    sample = sample_pairs(handle.n, config.pairs, config.seed, handle.tokens, config.d_min)
    layer = handle.last_layer_index
    try:
        diag = _layer_diagnostics(layer, handle.layer(layer), handle, sample, config)
    except InjxError as exc:
        raise type(exc)(f"layer {layer}: {exc}") from exc
    return SweepEntry(axis=axis, k=k, model_id=handle.model_id, layer=layer, diagnostics=diag)


def run_seqlen(manifests: list[tuple[int, RunHandle]], config: RunConfig = RunConfig()) -> SweepReport:
    """Last-layer diagnostics as a function of context length K."""
    ks = [k for k, _ in manifests]
    if len(ks) != len(set(ks)):
        raise ValidationError(f"duplicate K in sweep: {sorted(ks)}")
    if len(ks) < 2:
        raise ValidationError("sweep needs >= 2 points")
    for k, handle in manifests:
        if handle.k != k:
            raise ValidationError(f"manifest {handle.manifest_path} has k={handle.k}, sweep labels it K={k}")
    ordered = sorted(manifests, key=lambda pair: pair[0])
    entries = [_last_layer_entry(str(k), handle, config, k) for k, handle in ordered]
    return SweepReport(
        kind="seqlen",
        tool=_tool(),
        config=_echo(config),
        axis=[e.axis for e in entries],
        entries=entries,
    )


def run_trajectory(
    checkpoints: list[tuple[str, RunHandle]], config: RunConfig = RunConfig()
) -> SweepReport:
    """Last-layer diagnostics along an ordered list of checkpoints.

    All checkpoints must share one token set (verified by file digest).
    Labels must be unique; when every label parses as an integer they
    must also be strictly ascending.
    """
    labels = [label for label, _ in checkpoints]
    if len(labels) != len(set(labels)):
        raise ValidationError(f"duplicate checkpoint labels: {labels}")
    if len(labels) < 2:
        raise ValidationError("sweep needs >= 2 points")
    digests = {handle.token_digest for _, handle in checkpoints}
    if len(digests) != 1:
        raise ValidationError("checkpoints use different token sets (token file digests differ)")
    try:
        numeric = [int(label) for label in labels]
    except ValueError:
        numeric = None
    if numeric is not None and any(b <= a for a, b in zip(numeric, numeric[1:])):
        raise ValidationError(f"numeric checkpoint labels must be strictly ascending, got {labels}")
    entries = [_last_layer_entry(label, handle, config, None) for label, handle in checkpoints]
    return SweepReport(
        kind="trajectory",
        tool=_tool(),
        config=_echo(config),
        axis=labels,
        entries=entries,
    )


# ---------------------------------------------------------------------------
# Emission


def report_json_bytes(report: DiagnosticsReport | SweepReport) -> bytes:
    return (report.model_dump_json(indent=2) + "\n").encode("utf-8")


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv_rows_for_layer(scope: str, diag: LayerDiagnostics) -> list[list[str]]:
    rows = []
    for metric, value in (
        ("mean_norm", diag.mean_norm),
        ("median_norm", diag.median_norm),
        ("trimmed_norm", diag.trimmed_norm),
        ("min_margin", diag.min_margin),
        ("collisions", diag.collisions),
    ):
        rows.append([scope, "", metric, "raw", "", _fmt(value), ""])
    rows.append(
        [scope, "", "margin_q", "raw",
         _fmt(diag.margin_interval.lo), _fmt(diag.margin_q), _fmt(diag.margin_interval.hi)]
    )
    rows.append(
        [scope, "", "margin_q", "normalized",
         _fmt(diag.margin_interval_norm.lo), _fmt(diag.margin_q_norm), _fmt(diag.margin_interval_norm.hi)]
    )
    rows.append(
        [scope, "", "colip_q", "raw",
         _fmt(diag.colip_interval.lo), _fmt(diag.colip_q), _fmt(diag.colip_interval.hi)]
    )
    rows.append(
        [scope, "", "colip_q", "normalized",
         _fmt(diag.colip_interval_norm.lo), _fmt(diag.colip_q_norm), _fmt(diag.colip_interval_norm.hi)]
    )
    for key, pair in diag.normalized_by.items():
        rows.append([scope, "", "margin_q", f"normalized_{key}", "", _fmt(pair.margin_q), ""])
        rows.append([scope, "", "colip_q", f"normalized_{key}", "", _fmt(pair.colip_q), ""])
    if diag.near_collisions is not None:
        for eps, frac in zip(diag.near_collisions.epsilons, diag.near_collisions.fractions):
            rows.append([scope, "", f"near_collision_frac@{eps:g}", "raw", "", _fmt(frac), ""])
    return rows


def report_csv_text(report: DiagnosticsReport | SweepReport) -> str:
    """One row per (scope, metric, variant) with lo/point/hi columns."""
    lines = [
        f"# injx {report.tool.version} {report.kind}",
        "# config " + json.dumps(report.config.model_dump(), separators=(",", ":"), sort_keys=True),
        "scope,bits,metric,variant,lo,point,hi",
    ]
    rows: list[list[str]] = []
    if isinstance(report, DiagnosticsReport):
        for diag in report.layers:
            rows.extend(_csv_rows_for_layer(f"layer={diag.layer}", diag))
        if report.quantization is not None:
            for section in report.quantization.per_bit:
                b = str(section.bits)
                for qd in section.layers:
                    scope = f"layer={qd.layer}"
                    for metric, value in (
                        ("range", qd.range),
                        ("step", qd.step),
                        ("mean_norm", qd.mean_norm),
                        ("min_margin", qd.min_margin),
                        ("collisions", qd.collisions),
                        ("safety", qd.safety),
                    ):
                        rows.append([scope, b, metric, "raw", "", _fmt(value), ""])
                    rows.append([scope, b, "margin_q", "raw", "", _fmt(qd.margin_q), ""])
                    rows.append([scope, b, "margin_q", "normalized", "", _fmt(qd.margin_q_norm), ""])
                    rows.append([scope, b, "colip_q", "raw", "", _fmt(qd.colip_q), ""])
                    rows.append([scope, b, "colip_q", "normalized", "", _fmt(qd.colip_q_norm), ""])
            for entry in report.quantization.critical_bitwidth:
                rows.append(
                    [f"layer={entry.layer}", "", "critical_bitwidth", "raw", "",
                     "" if entry.b_crit is None else str(entry.b_crit), ""]
                )
    else:
        for entry in report.entries:
            scope = f"{report.kind}={entry.axis}"
            rows.extend(_csv_rows_for_layer(scope, entry.diagnostics))
    lines.extend(",".join(r) for r in rows)
    return "\n".join(lines) + "\n"


def write_report(
    report: DiagnosticsReport | SweepReport, out: str | Path | None, fmt: str = "json"
) -> None:
    if fmt == "json":
        payload = report_json_bytes(report)
    elif fmt == "csv":
        payload = report_csv_text(report).encode("utf-8")
    else:
        raise ValidationError(f"format must be 'json' or 'csv', got {fmt!r}")
    if out is None:
        sys.stdout.write(payload.decode("utf-8"))
    else:
        Path(out).write_bytes(payload)
