"""Report schemas shared by the library, the CLI, and the HTTP service.

Reports carry everything needed to recompute every number they contain:
a manifest summary, the full configuration echo (including the quantile
rule and PRNG contract), and the seed. They contain no timestamps, so a
rerun with the same inputs is byte-identical.
"""

from typing import Literal

from pydantic import BaseModel, ConfigDict

from .rng import PRNG_NAME

QUANTILE_RULE = "sort ascending; linear interpolation at p = (q/100)*(n-1)"


class ToolInfo(BaseModel):
    name: str = "injx"
    version: str


class ManifestSummary(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model_id: str
    k: int
    n: int
    hidden_dim: int
    layers: list[int]
    token_digest: str
    manifest_path: str
    meta: dict = {}


class ConfigEcho(BaseModel):
    q: float
    d_min: int
    pairs: int
    seed: int
    epsilons: list[float]
    bootstrap_resamples: int
    bootstrap_mode: Literal["multiset", "exact"]
    bits: list[int] | None = None
    near_collision_budget: int
    quantile_rule: str = QUANTILE_RULE
    prng: str = PRNG_NAME


class Interval(BaseModel):
    lo: float
    point: float
    hi: float
    resamples: int


class SweepFractions(BaseModel):
    epsilons: list[float]
    fractions: list[float]
    mode: Literal["exact", "sampled"]
    pairs_considered: int


class NormalizedPair(BaseModel):
    margin_q: float
    colip_q: float


class LayerDiagnostics(BaseModel):
    layer: int
    q: float
    mean_norm: float
    median_norm: float
    trimmed_norm: float
    margin_q: float
    margin_q_norm: float  # margin_q / mean_norm
    colip_q: float
    colip_q_norm: float  # colip_q / mean_norm
    min_margin: float
    collisions: int
    # Robustness variants normalized by the median and trimmed norms.
    normalized_by: dict[str, NormalizedPair]
    margin_interval: Interval
    margin_interval_norm: Interval
    colip_interval: Interval
    colip_interval_norm: Interval
    near_collisions: SweepFractions | None = None


class QuantLayerDiagnostics(BaseModel):
    layer: int
    range: float
    step: float
    mean_norm: float
    margin_q: float
    margin_q_norm: float
    colip_q: float
    colip_q_norm: float
    min_margin: float
    collisions: int  # counted on the integer code matrix
    safety: Literal["safe", "unproven"]


class QuantBitSection(BaseModel):
    bits: int
    layers: list[QuantLayerDiagnostics]


class CriticalBitwidth(BaseModel):
    layer: int
    b_crit: int | None  # None when the layer has exact duplicates


class QuantizationSection(BaseModel):
    per_bit: list[QuantBitSection]
    critical_bitwidth: list[CriticalBitwidth]


class DiagnosticsReport(BaseModel):
    kind: Literal["layerwise", "quantization"]
    tool: ToolInfo
    manifest: ManifestSummary
    config: ConfigEcho
    layers: list[LayerDiagnostics]
    quantization: QuantizationSection | None = None


class SweepEntry(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    axis: str
    k: int | None = None
    model_id: str
    layer: int
    diagnostics: LayerDiagnostics


class SweepReport(BaseModel):
    kind: Literal["seqlen", "trajectory"]
    tool: ToolInfo
    config: ConfigEcho
    axis: list[str]
    entries: list[SweepEntry]
