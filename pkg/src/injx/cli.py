"""Command-line interface.

Runs everything in-process by default; with --server URL each command
becomes a thin client of a running `injx serve` instance (which must see
the same filesystem paths). Exit codes: 0 success, 1 validation error,
2 computation error.
"""

import functools
import json
import sys

import click

from . import __version__
from .collisions import DEFAULT_EXACT_SWEEP_BUDGET
from .exceptions import ComputationError, InjxError, ValidationError
from .formats import load_manifest
from .report_models import DiagnosticsReport, SweepReport
from .runs import (
    DEFAULT_EPSILONS,
    DEFAULT_PAIRS,
    RunConfig,
    run_layerwise,
    run_quantization,
    run_seqlen,
    run_trajectory,
    write_report,
)
from .synth import SYNTH_MODES, synth_generate

EXIT_VALIDATION = 1
EXIT_COMPUTATION = 2


def _fail(exc: InjxError) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(EXIT_COMPUTATION if isinstance(exc, ComputationError) else EXIT_VALIDATION)


def _guard(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except InjxError as exc:
            _fail(exc)

    return wrapper


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ValidationError(f"could not parse float list {text!r}") from exc


def _parse_ints(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ValidationError(f"could not parse integer list {text!r}") from exc


def _config(q, dmin, pairs, seed, eps, bootstrap, exact_bootstrap, sweep_budget) -> RunConfig:
    return RunConfig(
        q=q,
        d_min=dmin,
        pairs=pairs,
        seed=seed,
        epsilons=_parse_floats(eps),
        bootstrap_resamples=bootstrap,
        exact_bootstrap=exact_bootstrap,
        near_collision_budget=sweep_budget,
    )


def _diagnostics_options(func):
    options = [
        click.option("--q", type=float, default=1.0, show_default=True, help="Worst percentile (percent)."),
        click.option("--dmin", type=int, default=1, show_default=True, help="Minimum Hamming distance for pairs."),
        click.option("--pairs", type=int, default=DEFAULT_PAIRS, show_default=True, help="Requested pair sample size."),
        click.option("--seed", type=int, default=0, show_default=True, help="64-bit seed for all randomness."),
        click.option("--eps", default=",".join(f"{e:g}" for e in DEFAULT_EPSILONS), show_default=True,
                     help="Near-collision tolerances (comma list, ascending; empty to skip)."),
        click.option("--bootstrap", type=int, default=200, show_default=True, help="Bootstrap resamples."),
        click.option("--exact-bootstrap", is_flag=True, help="Recompute nearest neighbors inside each margin resample."),
        click.option("--sweep-budget", type=int, default=DEFAULT_EXACT_SWEEP_BUDGET, show_default=True,
                     help="Max N for exact near-collision sweeps."),
        click.option("--out", type=click.Path(dir_okay=False, writable=True), default=None,
                     help="Output path (default: stdout)."),
        click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True),
        click.option("--server", default=None, help="Delegate to a running injx service at this base URL."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _post(server: str, path: str, payload: dict):
    import httpx

    response = httpx.post(server.rstrip("/") + path, json=payload, timeout=None)
    if response.status_code >= 400:
        try:
            detail = response.json().get("error", response.text)
        except ValueError:
            detail = response.text
        click.echo(f"error: {detail}", err=True)
        sys.exit(EXIT_COMPUTATION if response.status_code == 422 else EXIT_VALIDATION)
    return response.json()


def _remote_options(q, dmin, pairs, seed, eps, bootstrap, exact_bootstrap, sweep_budget) -> dict:
    return {
        "q": q,
        "d_min": dmin,
        "pairs": pairs,
        "seed": seed,
        "epsilons": list(_parse_floats(eps)),
        "bootstrap": bootstrap,
        "exact_bootstrap": exact_bootstrap,
        "near_collision_budget": sweep_budget,
    }


@click.group()
@click.version_option(version=__version__, prog_name="injx")
def main() -> None:
    """Injectivity diagnostics on point clouds of hidden states."""


@main.command()
@click.option("--manifest", required=True, type=click.Path(), help="Run manifest (JSON).")
@_diagnostics_options
@_guard
def layerwise(manifest, q, dmin, pairs, seed, eps, bootstrap, exact_bootstrap, sweep_budget, out, fmt, server):
    """Per-layer margins, co-Lipschitz constants, collisions, sweeps."""
    if server:
        payload = {"manifest": manifest, **_remote_options(q, dmin, pairs, seed, eps, bootstrap, exact_bootstrap, sweep_budget)}
        report = DiagnosticsReport.model_validate(_post(server, "/v1/layerwise", payload))
    else:
        config = _config(q, dmin, pairs, seed, eps, bootstrap, exact_bootstrap, sweep_budget)
        report = run_layerwise(load_manifest(manifest), config)
    write_report(report, out, fmt)


@main.command()
@click.option("--manifest", required=True, type=click.Path(), help="Run manifest (JSON).")
@click.option("--bits", default="8,4", show_default=True, help="Bitwidths to sweep (comma list).")
@_diagnostics_options
@_guard
def quantize(manifest, bits, q, dmin, pairs, seed, eps, bootstrap, exact_bootstrap, sweep_budget, out, fmt, server):
    """Baseline plus quantized diagnostics per bitwidth."""
    bit_list = _parse_ints(bits)
    if server:
        payload = {"manifest": manifest, "bits": bit_list,
                   **_remote_options(q, dmin, pairs, seed, eps, bootstrap, exact_bootstrap, sweep_budget)}
        report = DiagnosticsReport.model_validate(_post(server, "/v1/quantize", payload))
    else:
        config = _config(q, dmin, pairs, seed, eps, bootstrap, exact_bootstrap, sweep_budget)
        report = run_quantization(load_manifest(manifest), bit_list, config)
    write_report(report, out, fmt)


def _parse_labelled(values: tuple[str, ...], what: str) -> list[tuple[str, str]]:
    parsed = []
    for item in values:
        label, sep, path = item.partition("=")
        if not sep or not label or not path:
            raise ValidationError(f"each {what} must look like LABEL=PATH, got {item!r}")
        parsed.append((label, path))
    return parsed


@main.command()
@click.option("--manifest", "manifests", multiple=True, required=True, help="K=PATH (repeatable).")
@_diagnostics_options
@_guard
def seqlen(manifests, q, dmin, pairs, seed, eps, bootstrap, exact_bootstrap, sweep_budget, out, fmt, server):
    """Last-layer diagnostics across context lengths."""
    labelled = _parse_labelled(manifests, "--manifest")
    try:
        with_k = [(int(label), path) for label, path in labelled]
    except ValueError as exc:
        raise ValidationError(f"seqlen labels must be integers: {exc}") from exc
    if server:
        payload = {"manifests": {str(k): path for k, path in with_k},
                   **_remote_options(q, dmin, pairs, seed, eps, bootstrap, exact_bootstrap, sweep_budget)}
        report = SweepReport.model_validate(_post(server, "/v1/seqlen", payload))
    else:
        config = _config(q, dmin, pairs, seed, eps, bootstrap, exact_bootstrap, sweep_budget)
        report = run_seqlen([(k, load_manifest(path)) for k, path in with_k], config)
    write_report(report, out, fmt)


@main.command()
@click.option("--checkpoint", "checkpoints", multiple=True, required=True, help="LABEL=PATH (repeatable, ordered).")
@_diagnostics_options
@_guard
def trajectory(checkpoints, q, dmin, pairs, seed, eps, bootstrap, exact_bootstrap, sweep_budget, out, fmt, server):
    """Last-layer diagnostics along a checkpoint sequence."""
    labelled = _parse_labelled(checkpoints, "--checkpoint")
    if server:
        payload = {"checkpoints": [{"label": label, "manifest": path} for label, path in labelled],
                   **_remote_options(q, dmin, pairs, seed, eps, bootstrap, exact_bootstrap, sweep_budget)}
        report = SweepReport.model_validate(_post(server, "/v1/trajectory", payload))
    else:
        config = _config(q, dmin, pairs, seed, eps, bootstrap, exact_bootstrap, sweep_budget)
        report = run_trajectory([(label, load_manifest(path)) for label, path in labelled], config)
    write_report(report, out, fmt)


@main.command()
@click.option("--mode", type=click.Choice(SYNTH_MODES), required=True)
@click.option("--n", type=int, required=True, help="Number of prompts.")
@click.option("--d", type=int, required=True, help="Hidden dimension.")
@click.option("--layers", type=int, required=True, help="Number of layers.")
@click.option("--k", type=int, required=True, help="Context length.")
@click.option("--vocab", type=int, required=True, help="Vocabulary size.")
@click.option("--dups", type=int, default=0, show_default=True, help="Planted duplicate pairs.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Output directory.")
@click.option("--server", default=None, help="Delegate to a running injx service at this base URL.")
@_guard
def synth(mode, n, d, layers, k, vocab, dups, seed, out, server):
    """Generate a synthetic manifest with known ground truth."""
    if server:
        payload = {"out": out, "mode": mode, "n": n, "d": d, "layers": layers,
                   "k": k, "vocab": vocab, "seed": seed, "dups": dups}
        manifest = _post(server, "/v1/synth", payload)["manifest"]
    else:
        manifest = synth_generate(out, mode=mode, n=n, d=d, layers=layers, k=k, vocab=vocab, seed=seed, dups=dups)
    click.echo(str(manifest))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8321, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("injx.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
