"""HTTP service wrapping the diagnostic runners.

Endpoints take manifest paths on the server's filesystem and return the
same report documents the CLI writes; the CLI doubles as a thin client
via its --server flag. Validation failures map to 400, computations the
data cannot support to 422.
"""

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__
from .collisions import DEFAULT_EXACT_SWEEP_BUDGET
from .exceptions import ComputationError, ValidationError
from .formats import load_manifest
from .report_models import DiagnosticsReport, SweepReport
from .runs import DEFAULT_BITS, DEFAULT_EPSILONS, DEFAULT_PAIRS, RunConfig, run_layerwise, run_quantization, run_seqlen, run_trajectory
from .synth import synth_generate


class DiagnosticsOptions(BaseModel):
    q: float = 1.0
    d_min: int = 1
    pairs: int = DEFAULT_PAIRS
    seed: int = 0
    epsilons: list[float] = list(DEFAULT_EPSILONS)
    bootstrap: int = 200
    exact_bootstrap: bool = False
    near_collision_budget: int = DEFAULT_EXACT_SWEEP_BUDGET

    def to_config(self) -> RunConfig:
        return RunConfig(
            q=self.q,
            d_min=self.d_min,
            pairs=self.pairs,
            seed=self.seed,
            epsilons=tuple(self.epsilons),
            bootstrap_resamples=self.bootstrap,
            exact_bootstrap=self.exact_bootstrap,
            near_collision_budget=self.near_collision_budget,
        )


class LayerwiseRequest(DiagnosticsOptions):
    manifest: str


class QuantizeRequest(DiagnosticsOptions):
    manifest: str
    bits: list[int] = list(DEFAULT_BITS)


class SeqlenRequest(DiagnosticsOptions):
    manifests: dict[int, str]  # K -> manifest path


class Checkpoint(BaseModel):
    label: str
    manifest: str


class TrajectoryRequest(DiagnosticsOptions):
    checkpoints: list[Checkpoint]


class SynthRequest(BaseModel):
    out: str
    mode: str
    n: int
    d: int
    layers: int
    k: int
    vocab: int
    seed: int = 0
    dups: int = 0


class SynthResponse(BaseModel):
    manifest: str


app = FastAPI(title="injx", version=__version__)


@app.exception_handler(ValidationError)
async def _validation_error(request: Request, exc: ValidationError) -> JSONResponse:
    return JSONResponse(status_code=400, content={"error": str(exc), "kind": "validation"})


@app.exception_handler(ComputationError)
async def _computation_error(request: Request, exc: ComputationError) -> JSONResponse:
    return JSONResponse(status_code=422, content={"error": str(exc), "kind": "computation"})


@app.get("/v1/health")
def health() -> dict:
    return {"status": "ok", "name": "injx", "version": __version__}


@app.post("/v1/layerwise", response_model=DiagnosticsReport)
def layerwise(req: LayerwiseRequest) -> DiagnosticsReport:
    return run_layerwise(load_manifest(req.manifest), req.to_config())


@app.post("/v1/quantize", response_model=DiagnosticsReport)
def quantize(req: QuantizeRequest) -> DiagnosticsReport:
    return run_quantization(load_manifest(req.manifest), req.bits, req.to_config())


@app.post("/v1/seqlen", response_model=SweepReport)
def seqlen(req: SeqlenRequest) -> SweepReport:
    manifests = [(k, load_manifest(path)) for k, path in req.manifests.items()]
    return run_seqlen(manifests, req.to_config())


@app.post("/v1/trajectory", response_model=SweepReport)
def trajectory(req: TrajectoryRequest) -> SweepReport:
    checkpoints = [(cp.label, load_manifest(cp.manifest)) for cp in req.checkpoints]
    return run_trajectory(checkpoints, req.to_config())


@app.post("/v1/synth", response_model=SynthResponse)
def synth(req: SynthRequest) -> SynthResponse:
    manifest = synth_generate(
        req.out,
        mode=req.mode,
        n=req.n,
        d=req.d,
        layers=req.layers,
        k=req.k,
        vocab=req.vocab,
        seed=req.seed,
        dups=req.dups,
    )
    return SynthResponse(manifest=str(manifest))
