import json

import pytest
from click.testing import CliRunner

from injx.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def _synth(runner, out, **kw):
    args = ["synth", "--mode", kw.get("mode", "gaussian"), "--n", str(kw.get("n", 30)),
            "--d", str(kw.get("d", 5)), "--layers", str(kw.get("layers", 2)),
            "--k", str(kw.get("k", 3)), "--vocab", str(kw.get("vocab", 9)),
            "--seed", str(kw.get("seed", 0)), "--out", str(out)]
    if "dups" in kw:
        args += ["--dups", str(kw["dups"])]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    return result.output.strip()


FAST = ["--pairs", "100", "--bootstrap", "10"]


def test_synth_then_layerwise_json(runner, tmp_path):
    manifest = _synth(runner, tmp_path / "g")
    out = tmp_path / "report.json"
    result = runner.invoke(main, ["layerwise", "--manifest", manifest, *FAST, "--out", str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads(out.read_text())
    assert report["kind"] == "layerwise"
    assert len(report["layers"]) == 2
    assert report["config"]["pairs"] == 100


def test_layerwise_stdout_and_csv(runner, tmp_path):
    manifest = _synth(runner, tmp_path / "g")
    result = runner.invoke(main, ["layerwise", "--manifest", manifest, *FAST])
    assert result.exit_code == 0
    assert json.loads(result.output)["kind"] == "layerwise"
    result = runner.invoke(main, ["layerwise", "--manifest", manifest, *FAST, "--format", "csv"])
    assert result.exit_code == 0
    assert result.output.splitlines()[2] == "scope,bits,metric,variant,lo,point,hi"


def test_quantize_command(runner, tmp_path):
    manifest = _synth(runner, tmp_path / "g")
    out = tmp_path / "q.json"
    result = runner.invoke(main, ["quantize", "--manifest", manifest, "--bits", "8,4", *FAST, "--out", str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads(out.read_text())
    assert report["kind"] == "quantization"
    assert [s["bits"] for s in report["quantization"]["per_bit"]] == [8, 4]


def test_seqlen_command(runner, tmp_path):
    m4 = _synth(runner, tmp_path / "k4", k=4, seed=4)
    m8 = _synth(runner, tmp_path / "k8", k=8, seed=8)
    result = runner.invoke(
        main, ["seqlen", "--manifest", f"4={m4}", "--manifest", f"8={m8}", *FAST]
    )
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["axis"] == ["4", "8"]


def test_trajectory_command(runner, tmp_path):
    m = _synth(runner, tmp_path / "c0")
    import shutil

    shutil.copytree(tmp_path / "c0", tmp_path / "c1")
    m1 = str(tmp_path / "c1" / "manifest.json")
    result = runner.invoke(
        main, ["trajectory", "--checkpoint", f"0={m}", "--checkpoint", f"100={m1}", *FAST]
    )
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert report["kind"] == "trajectory"
    assert report["entries"][0]["diagnostics"] == report["entries"][1]["diagnostics"]


def test_validation_error_exit_code_1(runner):
    result = runner.invoke(main, ["layerwise", "--manifest", "missing.json"])
    assert result.exit_code == 1
    assert "error:" in result.output


def test_computation_error_exit_code_2(runner, tmp_path):
    manifest = _synth(runner, tmp_path / "g")
    result = runner.invoke(main, ["layerwise", "--manifest", manifest, "--dmin", "99", *FAST])
    assert result.exit_code == 2
    assert "no pairs satisfy d_min" in result.output


def test_bad_label_exit_code_1(runner, tmp_path):
    result = runner.invoke(main, ["seqlen", "--manifest", "nolabel"])
    assert result.exit_code == 1


def test_determinism_across_processes(runner, tmp_path):
    manifest = _synth(runner, tmp_path / "g")
    outs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        result = runner.invoke(
            main, ["layerwise", "--manifest", manifest, *FAST, "--seed", "99", "--out", str(out)]
        )
        assert result.exit_code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_server_mode_thin_client(runner, tmp_path, monkeypatch):
    # Route the CLI's HTTP calls into the FastAPI app in-process.
    from fastapi.testclient import TestClient

    import injx.service

    client = TestClient(injx.service.app)

    class _Shim:
        @staticmethod
        def post(url, json=None, timeout=None):
            path = url.split("9999", 1)[1]
            return client.post(path, json=json)

    import httpx

    monkeypatch.setattr(httpx, "post", _Shim.post)
    manifest = _synth(runner, tmp_path / "g")
    out = tmp_path / "remote.json"
    result = runner.invoke(
        main,
        ["layerwise", "--manifest", manifest, *FAST, "--server", "http://127.0.0.1:9999", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    remote = json.loads(out.read_text())

    local = tmp_path / "local.json"
    result = runner.invoke(main, ["layerwise", "--manifest", manifest, *FAST, "--out", str(local)])
    assert result.exit_code == 0
    assert remote == json.loads(local.read_text())

    # Server-side errors map onto the CLI exit codes.
    result = runner.invoke(
        main, ["layerwise", "--manifest", "missing.json", "--server", "http://127.0.0.1:9999"]
    )
    assert result.exit_code == 1
