import pytest
from fastapi.testclient import TestClient

from injx import load_manifest, synth_generate
from injx.report_models import DiagnosticsReport, SweepReport
from injx.runs import RunConfig, report_json_bytes, run_layerwise
from injx.service import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


@pytest.fixture(scope="module")
def manifest_path(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc")
    return str(synth_generate(root, mode="gaussian", n=40, d=6, layers=2, k=3, vocab=9, seed=4))


OPTS = {"pairs": 150, "bootstrap": 10, "seed": 2}


def test_health(client):
    body = client.get("/v1/health").json()
    assert body["status"] == "ok" and body["name"] == "injx"


def test_layerwise_matches_in_process_run(client, manifest_path):
    response = client.post("/v1/layerwise", json={"manifest": manifest_path, **OPTS})
    assert response.status_code == 200
    served = DiagnosticsReport.model_validate(response.json())
    local = run_layerwise(
        load_manifest(manifest_path), RunConfig(pairs=150, bootstrap_resamples=10, seed=2)
    )
    assert report_json_bytes(served) == report_json_bytes(local)


def test_quantize_endpoint(client, manifest_path):
    response = client.post("/v1/quantize", json={"manifest": manifest_path, "bits": [8, 4], **OPTS})
    assert response.status_code == 200
    report = DiagnosticsReport.model_validate(response.json())
    assert report.kind == "quantization"
    assert [s.bits for s in report.quantization.per_bit] == [8, 4]


def test_seqlen_endpoint(client, tmp_path_factory):
    root = tmp_path_factory.mktemp("svc-seqlen")
    paths = {
        str(k): str(synth_generate(root / f"k{k}", mode="gaussian", n=25, d=4, layers=2, k=k, vocab=9, seed=k))
        for k in (4, 8)
    }
    response = client.post("/v1/seqlen", json={"manifests": paths, **OPTS})
    assert response.status_code == 200
    report = SweepReport.model_validate(response.json())
    assert report.axis == ["4", "8"]


def test_trajectory_endpoint(client, tmp_path_factory):
    root = tmp_path_factory.mktemp("svc-traj")
    a = synth_generate(root / "a", mode="gaussian", n=25, d=4, layers=2, k=3, vocab=9, seed=1)
    b = root / "b"
    import shutil

    shutil.copytree(root / "a", b)
    response = client.post(
        "/v1/trajectory",
        json={"checkpoints": [{"label": "0", "manifest": str(a)}, {"label": "1", "manifest": str(b / "manifest.json")}], **OPTS},
    )
    assert response.status_code == 200
    report = SweepReport.model_validate(response.json())
    assert report.entries[0].diagnostics == report.entries[1].diagnostics


def test_synth_endpoint(client, tmp_path_factory):
    out = tmp_path_factory.mktemp("svc-synth") / "run"
    response = client.post(
        "/v1/synth",
        json={"out": str(out), "mode": "gaussian", "n": 10, "d": 3, "layers": 1, "k": 2, "vocab": 9, "seed": 0},
    )
    assert response.status_code == 200
    manifest = response.json()["manifest"]
    assert load_manifest(manifest).n == 10


def test_validation_maps_to_400(client):
    response = client.post("/v1/layerwise", json={"manifest": "does-not-exist.json"})
    assert response.status_code == 400
    assert response.json()["kind"] == "validation"


def test_computation_maps_to_422(client, manifest_path):
    # d_min above K leaves no valid pairs: a computation error.
    response = client.post("/v1/layerwise", json={"manifest": manifest_path, "d_min": 99, **OPTS})
    assert response.status_code == 422
    assert response.json()["kind"] == "computation"
