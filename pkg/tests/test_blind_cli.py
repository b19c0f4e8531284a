import json
import subprocess
import sys

import numpy as np
import pytest

from rcsverify import blind, dataio
from rcsverify.cli import main
from rcsverify.errors import IntegrityError, MissingResponseError, UsageError

SMALL = dict(n=10, m=10, count=2, seed=3)


@pytest.fixture(scope="module")
def challenge_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("challenge")
    blind.challenge(d, **SMALL)
    return d


def respond(challenge_dir, tmp_path, **cfg):
    out = tmp_path / cfg.get("mode", "honest")
    blind.respond(challenge_dir, out, blind.ProverConfig(N=50_000, **cfg))
    return out


def test_challenge_is_deterministic(tmp_path, challenge_dir):
    blind.challenge(tmp_path, **SMALL)
    for name in ("challenge.json", "circuit_000.json", "circuit_001.json"):
        assert (tmp_path / name).read_bytes() == (challenge_dir / name).read_bytes()


def test_honest_passes_cheaters_fail(tmp_path, challenge_dir):
    honest = blind.verify(challenge_dir, respond(challenge_dir, tmp_path))
    assert all(v.passed for v in honest)
    assert all(abs(v.f_xeb - 0.4 * 1.0) < 0.2 for v in honest)
    uniform = blind.verify(challenge_dir, respond(challenge_dir, tmp_path, mode="uniform"))
    assert not any(v.passed for v in uniform)
    withhold = blind.verify(challenge_dir, respond(challenge_dir, tmp_path, mode="withhold"))
    assert not any(v.passed for v in withhold)


def test_verify_detects_tampering(tmp_path, challenge_dir):
    out = respond(challenge_dir, tmp_path)
    sample = out / "circuit_000.samples.txt"
    data = bytearray(sample.read_bytes())
    data[0] ^= 1
    sample.write_bytes(bytes(data))
    with pytest.raises(IntegrityError):
        blind.verify(challenge_dir, out)
    sample.unlink()
    with pytest.raises(MissingResponseError):
        blind.verify(challenge_dir, out)
    with pytest.raises(MissingResponseError):
        blind.verify(challenge_dir, tmp_path / "nothing")


def test_before_timing_needs_two_stages(tmp_path):
    ch = tmp_path / "ch"
    blind.challenge(ch, n=8, m=6, count=1, seed=1, calibration_timing="before")
    out = tmp_path / "resp"
    cfg = blind.ProverConfig(N=20_000)
    with pytest.raises(UsageError):
        blind.respond(ch, out, cfg)
    with pytest.raises(MissingResponseError):
        blind.respond(ch, out, cfg, stage="sample")
    blind.respond(ch, out, cfg, stage="calibrate")
    assert not (out / "response.json").exists()
    blind.respond(ch, out, cfg, stage="sample")
    assert all(v.passed for v in blind.verify(ch, out))


def run_cli(*args):
    return main([str(a) for a in args])


def test_cli_pipeline(tmp_path, capsys):
    assert run_cli("generate", "--n", 8, "--m", 6, "--seed", 2, "--out", tmp_path) == 0
    circuit = json.loads(capsys.readouterr().out.splitlines()[0])["circuit"]
    samples = tmp_path / "s.txt"
    amps = tmp_path / "a.txt"
    assert run_cli("sample", "--circuit", circuit, "--phi", 0.5, "--N", 20000, "--out", samples,
                   "--amplitudes-out", amps) == 0
    capsys.readouterr()
    assert run_cli("xeb", "--circuit", circuit, "--samples", samples) == 0
    rep = json.loads(capsys.readouterr().out)
    assert 0.2 < rep["f_xeb"] < 0.8
    assert run_cli("xeb", "--circuit", circuit, "--samples", samples, "--amplitudes", amps) == 0
    aligned = json.loads(capsys.readouterr().out)
    assert abs(aligned["f_xeb"] - rep["f_xeb"]) < 1e-12
    assert run_cli("spectral", "--circuit", circuit, "--samples", samples, "--bootstrap", 5) == 0
    assert capsys.readouterr().out.startswith("k,phi_k,weight_k")
    assert run_cli("distance", "--circuit", circuit, "--samples", samples, "--phi", 0.5) == 0
    assert json.loads(capsys.readouterr().out)["tvd"] < 0.2
    assert run_cli("simulate", "--circuit", circuit, "--out", tmp_path / "amps.bin") == 0
    assert dataio.read_amplitude_dump(tmp_path / "amps.bin").n == 8


def test_cli_trajectory_sampling(tmp_path, capsys):
    run_cli("generate", "--n", 6, "--m", 4, "--out", tmp_path)
    circuit = json.loads(capsys.readouterr().out)["circuit"]
    assert run_cli("sample", "--circuit", circuit, "--trajectories", "--N", 5000, "--out", tmp_path / "t.txt") == 0
    assert json.loads(capsys.readouterr().out)["provenance"] == "pauli-trajectory"


def test_cli_predict(capsys):
    assert run_cli("predict", "--averaged", "--n", 53, "--g1", 1113, "--g2", 430) == 0
    assert json.loads(capsys.readouterr().out)["phi"] > 1e-3
    assert run_cli("predict", "--averaged", "--n", 53) == 64


def test_cli_blind_round(tmp_path, capsys):
    ch, resp = tmp_path / "ch", tmp_path / "resp"
    assert run_cli("blind", "challenge", "--n", 8, "--m", 6, "--count", 1, "--out", ch) == 0
    assert run_cli("blind", "respond", "--challenge", ch, "--out", resp, "--N", 20000) == 0
    capsys.readouterr()
    assert run_cli("blind", "verify", "--challenge", ch, "--response", resp) == 0
    first = capsys.readouterr().out
    assert run_cli("blind", "verify", "--challenge", ch, "--response", resp) == 0
    assert capsys.readouterr().out == first
    bad = tmp_path / "bad"
    run_cli("blind", "respond", "--challenge", ch, "--out", bad, "--N", 20000, "--mode", "uniform")
    assert run_cli("blind", "verify", "--challenge", ch, "--response", bad) == 1


def test_cli_calfit(tmp_path, capsys):
    assert run_cli("coupler", "--edge", "0,0:0,1", "--m", 8, "--count", 3, "--out", tmp_path) == 0
    circuits = [json.loads(line)["circuit"] for line in capsys.readouterr().out.splitlines()]
    samples = []
    for i, c in enumerate(circuits):
        samples.append(tmp_path / f"s{i}.txt")
        run_cli("sample", "--circuit", c, "--N", 20000, "--seed", i, "--out", samples[-1])
    capsys.readouterr()
    assert run_cli("calfit", "--circuits", *circuits, "--samples", *samples) == 0
    res = json.loads(capsys.readouterr().out)
    assert abs(res["theta_hat"] - np.pi / 2) < 0.05 and abs(res["phi_hat"] - np.pi / 6) < 0.1


def test_cli_exit_codes(tmp_path, capsys):
    assert run_cli("nonsense") == 64
    assert run_cli("generate", "--n", 99, "--m", 2, "--out", tmp_path) == 65
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run_cli("simulate", "--circuit", bad, "--out", tmp_path / "x") == 2
    assert run_cli("simulate", "--circuit", tmp_path / "missing.json", "--out", tmp_path / "x") == 3
    assert "error:" in capsys.readouterr().err


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "rcsverify.cli", "predict", "--averaged", "--n", "1",
                          "--g1", "0", "--g2", "0"], capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["phi"] == pytest.approx(1 - 0.038)
