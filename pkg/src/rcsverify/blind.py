"""Challenge / respond / verify exchange through plain directories.

The challenger writes circuits and a manifest of their hashes, nothing
else: no amplitudes are computed at this stage. The responder plays the
device. It applies its private calibration and noise, then publishes
samples together with the calibration it claims to have run. The verifier
reads only those two directories, simulates each published calibrated
circuit and scores the samples.

``calibration_timing`` records whether calibrations are published before
sampling (``respond --stage calibrate`` then ``--stage sample``, with the
sampling stage bound to the files already on disk) or together with the
samples.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import rng
from .calibration import identity_calibration, random_miscalibration
from .circuits import generate_random_circuit
from .dataio import (parse_calibration, parse_circuit, read_sample_files, write_calibration, write_circuit,
                     write_sample_files)
from .errors import IntegrityError, MissingResponseError, UsageError, ValidationError
from .estimators import f_xeb, formula77_averaged
from .noise import apply_readout_errors, sample_noise_model
from .samples import SampleSet
from .simulator import probabilities, simulate

CHALLENGE_MANIFEST = "challenge.json"
RESPONSE_MANIFEST = "response.json"
TIMINGS = ("before", "after")
MODES = ("honest", "uniform", "withhold")


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _read_json(path: Path, missing_error=ValidationError):
    if not path.exists():
        raise missing_error(f"{path} not found")
    return json.loads(path.read_text())


def challenge(out_dir, *, n: int, m: int, count: int, seed: int, pattern: str = "EFGH",
              calibration_timing: str = "after") -> dict:
    """Write ``count`` circuits and the challenge manifest. Returns the manifest."""
    if calibration_timing not in TIMINGS:
        raise UsageError(f"calibration timing must be one of {TIMINGS}")
    if count < 1:
        raise UsageError("count must be at least 1")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(count):
        c = generate_random_circuit(rng.derive_seed(seed, "challenge", i), n, m, pattern)
        data = write_circuit(c)
        name = f"circuit_{i:03d}.json"
        (out / name).write_bytes(data)
        entries.append({"name": name, "sha256": _sha256(data), "n": c.n, "m": c.depth})
    manifest = {"calibration_timing": calibration_timing, "circuits": entries}
    _write_json(out / CHALLENGE_MANIFEST, manifest)
    return manifest


def _load_challenge(challenge_dir: Path):
    """Yield (entry, circuit bytes), checking each circuit against its recorded hash."""
    manifest = _read_json(challenge_dir / CHALLENGE_MANIFEST)
    for entry in manifest["circuits"]:
        path = challenge_dir / entry["name"]
        if not path.exists():
            raise IntegrityError(f"challenge circuit {path} missing")
        data = path.read_bytes()
        if _sha256(data) != entry["sha256"]:
            raise IntegrityError(f"{entry['name']}: circuit file does not match its challenge hash")
        yield entry, data
    return manifest


@dataclass(frozen=True)
class ProverConfig:
    """The simulated device's private settings."""

    mode: str = "honest"
    phi: float = 0.4
    readout: float = 0.0
    N: int = 500_000
    seed: int = 0
    miscal_seed: int = 0
    magnitude: float = 0.3
    offsets: str = "fixed"


def respond(challenge_dir, response_dir, config: ProverConfig, stage: str = "all") -> dict:
    """Act as the device for every challenge circuit.

    ``stage`` is ``calibrate`` (publish calibrations only), ``sample``
    (sample using the calibrations already published) or ``all``.
    """
    if config.mode not in MODES:
        raise UsageError(f"prover mode must be one of {MODES}")
    if stage not in ("calibrate", "sample", "all"):
        raise UsageError("stage must be calibrate, sample or all")
    challenge_dir, out = Path(challenge_dir), Path(response_dir)
    timing = _read_json(challenge_dir / CHALLENGE_MANIFEST)["calibration_timing"]
    if timing == "before" and stage == "all":
        raise UsageError("this challenge needs calibrations published before sampling: "
                         "run the calibrate stage, then the sample stage")
    if timing == "after" and stage != "all":
        raise UsageError("this challenge takes calibrations together with the samples (stage all)")
    out.mkdir(parents=True, exist_ok=True)

    entries = []
    for i, (entry, data) in enumerate(_load_challenge(challenge_dir)):
        circuit = parse_circuit(data)
        stem = Path(entry["name"]).stem
        cal_name = f"{stem}.calibration.json"
        if stage == "sample":
            # bound to what was published earlier
            cal_path = out / cal_name
            if not cal_path.exists():
                raise MissingResponseError(f"{cal_path} not published; run the calibrate stage first")
            published = parse_calibration(cal_path.read_bytes())
        else:
            published = None
        device = random_miscalibration(circuit, rng.derive_seed(config.miscal_seed, "device", i),
                                       config.magnitude, config.offsets)
        claimed = identity_calibration(circuit) if config.mode == "withhold" else device
        if stage in ("calibrate", "all"):
            (out / cal_name).write_bytes(write_calibration(claimed))
        record = {"name": entry["name"], "circuit_sha256": entry["sha256"], "calibration": cal_name,
                  "calibration_sha256": _sha256((out / cal_name).read_bytes())}
        if stage in ("sample", "all"):
            sample_seed = rng.derive_seed(config.seed, "respond", i)
            if config.mode == "uniform":
                idx = rng.stream(sample_seed, "uniform-prover").integers(0, 2**circuit.n, config.N, dtype=np.int64)
                samples = SampleSet(circuit.n, circuit.qubits, idx, "blind-response", sample_seed)
            else:
                # an honest device runs what it published; a withholding one runs its real calibration
                run = published if published is not None and config.mode == "honest" else device
                probs = probabilities(simulate(circuit, run))
                samples = sample_noise_model(probs, config.phi, config.N, sample_seed, circuit.qubits)
                if config.readout > 0:
                    samples = apply_readout_errors(samples, config.readout, sample_seed)
            samples = SampleSet(samples.n, samples.qubit_order, samples.indices, "blind-response", sample_seed)
            sample_name = f"{stem}.samples.txt"
            write_sample_files(out / sample_name, samples)
            record["samples"] = sample_name
            record["samples_sha256"] = _sha256((out / sample_name).read_bytes())
        entries.append(record)
    manifest = {"stage": stage, "entries": entries}
    _write_json(out / (RESPONSE_MANIFEST if stage != "calibrate" else "calibrations.json"), manifest)
    return manifest


@dataclass(frozen=True)
class Verdict:
    name: str
    n: int
    n_samples: int
    f_xeb: float
    std_error: float
    threshold: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def default_threshold(circuit) -> float:
    g1, g2 = circuit.gate_counts()
    return 0.5 * formula77_averaged(circuit.n, g1, g2)


def verify(challenge_dir, response_dir, threshold: float | None = None) -> list[Verdict]:
    """Score every response; pass iff estimate - 3 * std_error > threshold."""
    challenge_dir, response_dir = Path(challenge_dir), Path(response_dir)
    response = _read_json(response_dir / RESPONSE_MANIFEST, MissingResponseError)
    by_name = {r["name"]: r for r in response["entries"]}
    verdicts = []
    for entry, data in _load_challenge(challenge_dir):
        r = by_name.get(entry["name"])
        if r is None or "samples" not in r:
            raise MissingResponseError(f"no response for {entry['name']}")
        if r["circuit_sha256"] != entry["sha256"]:
            raise IntegrityError(f"{entry['name']}: response echoes a different circuit hash")
        cal_path, sample_path = response_dir / r["calibration"], response_dir / r["samples"]
        for path, key in ((cal_path, "calibration_sha256"), (sample_path, "samples_sha256")):
            if not path.exists():
                raise MissingResponseError(f"{path} not found")
            if _sha256(path.read_bytes()) != r[key]:
                raise IntegrityError(f"{path.name}: file does not match the response manifest")
        circuit = parse_circuit(data)
        samples = read_sample_files(sample_path)
        if samples.n != circuit.n or tuple(samples.qubit_order) != tuple(circuit.qubits):
            raise IntegrityError(f"{entry['name']}: samples do not match the circuit's qubit order")
        probs = probabilities(simulate(circuit, parse_calibration(cal_path.read_bytes())))
        est, se = f_xeb(samples, probs)
        thr = default_threshold(circuit) if threshold is None else float(threshold)
        verdicts.append(Verdict(entry["name"], circuit.n, len(samples), est, se, thr, est - 3 * se > thr))
    return verdicts
