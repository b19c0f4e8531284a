"""File formats: circuits, calibrations, samples, amplitudes and dataset manifests.

Every writer produces a canonical byte form and every parser either returns
a complete value or raises ParseError / ValidationError. Bit strings and
amplitude indices put the first qubit of ``qubit_order`` first (most
significant); every sidecar records the order.

Sidecars live next to their data file as ``<file>.json``.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calibration import CalibrationMap
from .circuits import (Circuit, FSimGate, GridQubit, Moment, OneQubitGate, Pattern, RzGate, Variant,
                       make_edge)
from .errors import AlignmentError, ParseError, ValidationError
from .estimators import xeb_from_probabilities
from .samples import SampleSet
from .simulator import MAX_QUBITS, AmplitudeTable, simulate

_SEPARATORS = (",", ":")


def _dumps(obj) -> bytes:
    # json renders floats with repr, the shortest round-trip decimal
    return (json.dumps(obj, separators=_SEPARATORS, allow_nan=False) + "\n").encode()


def _loads(text) -> object:
    if isinstance(text, str):
        text = text.encode()
    try:
        decoded = bytes(text).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"invalid UTF-8 at byte {exc.start}", offset=exc.start) from None
    try:
        return json.loads(decoded)
    except json.JSONDecodeError as exc:
        offset = len(decoded[:exc.pos].encode())
        raise ParseError(f"malformed JSON at byte {offset}: {exc.msg}", line=exc.lineno,
                         column=exc.colno, offset=offset) from None


class _Shape:
    """Checks for the expected JSON shape; failures are parse errors naming a path."""

    @staticmethod
    def fail(path: str, what: str):
        raise ParseError(f"{path}: expected {what}")

    @classmethod
    def obj(cls, v, path, keys):
        if not isinstance(v, dict):
            cls.fail(path, "an object")
        missing = [k for k in keys if k not in v]
        if missing:
            cls.fail(path, f"field {missing[0]!r}")
        return v

    @classmethod
    def list(cls, v, path):
        if not isinstance(v, list):
            cls.fail(path, "a list")
        return v

    @classmethod
    def int(cls, v, path):
        if isinstance(v, bool) or not isinstance(v, int):
            cls.fail(path, "an integer")
        return v

    @classmethod
    def num(cls, v, path):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            cls.fail(path, "a number")
        return float(v)

    @classmethod
    def str(cls, v, path):
        if not isinstance(v, str):
            cls.fail(path, "a string")
        return v

    @classmethod
    def qubit(cls, v, path):
        if not (isinstance(v, list) and len(v) == 2):
            cls.fail(path, "a [row, col] pair")
        return GridQubit(cls.int(v[0], path), cls.int(v[1], path))

    @classmethod
    def edge(cls, v, path):
        if not (isinstance(v, list) and len(v) == 2):
            cls.fail(path, "a pair of qubits")
        return cls.qubit(v[0], path + "[0]"), cls.qubit(v[1], path + "[1]")


# ---------------------------------------------------------------- circuits

def _qjson(q) -> list:
    return [q.row, q.col]


def circuit_to_json(circuit: Circuit) -> dict:
    moments = []
    for mo in circuit.moments:
        if mo.kind == "ones":
            gates = [{"q": _qjson(g.target), "kind": g.kind} for g in mo.gates]
        elif mo.kind == "twos":
            gates = [{"q": [_qjson(g.q_a), _qjson(g.q_b)], "theta": g.theta, "phi": g.phi} for g in mo.gates]
        else:
            gates = [{"q": _qjson(g.target), "angle": g.angle} for g in mo.gates]
        moments.append({mo.kind: gates})
    return {
        "qubits": [_qjson(q) for q in circuit.qubits],
        "pattern": circuit.pattern.name,
        "depth": circuit.depth,
        "variant": circuit.variant.value,
        "seed": circuit.seed,
        "moments": moments,
    }


def write_circuit(circuit: Circuit) -> bytes:
    return _dumps(circuit_to_json(circuit))


def circuit_hash(circuit: Circuit) -> str:
    return hashlib.sha256(write_circuit(circuit)).hexdigest()


def circuit_from_json(doc) -> Circuit:
    S = _Shape
    S.obj(doc, "circuit", ("qubits", "pattern", "depth", "variant", "seed", "moments"))
    qubits = tuple(S.qubit(q, f"qubits[{i}]") for i, q in enumerate(S.list(doc["qubits"], "qubits")))
    try:
        pattern = Pattern.build(S.str(doc["pattern"], "pattern"))
        variant = Variant(S.str(doc["variant"], "variant"))
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    moments = []
    for i, entry in enumerate(S.list(doc["moments"], "moments")):
        path = f"moments[{i}]"
        if not (isinstance(entry, dict) and len(entry) == 1):
            S.fail(path, 'an object with one of "ones", "twos", "rz"')
        (kind, raw), = entry.items()
        gates = []
        for j, g in enumerate(S.list(raw, f"{path}.{kind}")):
            gp = f"{path}.{kind}[{j}]"
            if kind == "ones":
                S.obj(g, gp, ("q", "kind"))
                gates.append(OneQubitGate(S.str(g["kind"], gp + ".kind"), S.qubit(g["q"], gp + ".q")))
            elif kind == "twos":
                S.obj(g, gp, ("q", "theta", "phi"))
                a, b = S.edge(g["q"], gp + ".q")
                gates.append(FSimGate(S.num(g["theta"], gp + ".theta"), S.num(g["phi"], gp + ".phi"), a, b))
            elif kind == "rz":
                S.obj(g, gp, ("q", "angle"))
                gates.append(RzGate(S.num(g["angle"], gp + ".angle"), S.qubit(g["q"], gp + ".q")))
            else:
                S.fail(path, 'kind "ones", "twos" or "rz"')
        moments.append(Moment(kind, tuple(gates)))
    depth = S.int(doc["depth"], "depth")
    seed = S.int(doc["seed"], "seed")
    return Circuit(qubits, depth, pattern, variant, tuple(moments), seed).validate()


def parse_circuit(text) -> Circuit:
    return circuit_from_json(_loads(text))


# ------------------------------------------------------------- calibration

def write_calibration(calib: CalibrationMap) -> bytes:
    native = [{"edge": [_qjson(e[0]), _qjson(e[1])], "theta": t, "phi": p}
              for e, (t, p) in sorted(calib.native.items())]
    rotations = [{"edge": [_qjson(e[0]), _qjson(e[1])], "k": k, "angles": list(a)}
                 for (e, k), a in sorted(calib.rotations.items())]
    return _dumps({"native": native, "rotations": rotations})


def parse_calibration(text) -> CalibrationMap:
    S = _Shape
    doc = S.obj(_loads(text), "calibration", ("native", "rotations"))
    native, rotations = {}, {}
    for i, r in enumerate(S.list(doc["native"], "native")):
        p = f"native[{i}]"
        S.obj(r, p, ("edge", "theta", "phi"))
        native[make_edge(*S.edge(r["edge"], p + ".edge"))] = (S.num(r["theta"], p + ".theta"),
                                                              S.num(r["phi"], p + ".phi"))
    for i, r in enumerate(S.list(doc["rotations"], "rotations")):
        p = f"rotations[{i}]"
        S.obj(r, p, ("edge", "k", "angles"))
        angles = S.list(r["angles"], p + ".angles")
        if len(angles) != 4:
            S.fail(p + ".angles", "four angles")
        key = (make_edge(*S.edge(r["edge"], p + ".edge")), S.int(r["k"], p + ".k"))
        rotations[key] = tuple(S.num(a, p + ".angles") for a in angles)
    return CalibrationMap(native, rotations)


# ----------------------------------------------------------------- samples

def write_samples(samples: SampleSet) -> bytes:
    if len(samples) == 0:
        return b""
    rows = np.full((len(samples), samples.n + 1), ord("\n"), dtype=np.uint8)
    rows[:, :samples.n] = samples.bits() + ord("0")
    return rows.tobytes()


def parse_samples(text, n: int, qubit_order=None, provenance: str = "", seed=None) -> SampleSet:
    """One bitstring of '0'/'1' per line; a final newline is optional."""
    data = bytes(text.encode() if isinstance(text, str) else text)
    order = tuple(qubit_order) if qubit_order is not None else tuple(GridQubit(0, i) for i in range(n))
    if len(order) != n:
        raise ValidationError(f"qubit order has {len(order)} qubits, expected {n}")
    if not data:
        return SampleSet(n, order, np.zeros(0, dtype=np.int64), provenance, seed)
    if not data.endswith(b"\n"):
        data += b"\n"
    width = n + 1
    arr = np.frombuffer(data, dtype=np.uint8)
    if arr.size % width == 0:
        rows = arr.reshape(-1, width)
        body = rows[:, :n]
        if (rows[:, n] == 10).all() and ((body == 48) | (body == 49)).all():
            return SampleSet.from_bits(body - 48, order, provenance, seed)
    # slow path only to locate the first error
    for lineno, line in enumerate(data[:-1].split(b"\n"), start=1):
        for col, ch in enumerate(line[:n], start=1):
            if ch not in (48, 49):
                raise ParseError(f"line {lineno}, column {col}: illegal character {chr(ch)!r}",
                                 line=lineno, column=col)
        if len(line) != n:
            raise ParseError(f"line {lineno}: expected {n} characters, found {len(line)}", line=lineno)
    raise ParseError("malformed sample file")  # pragma: no cover


def samples_sidecar(samples: SampleSet) -> dict:
    return {"n": samples.n, "qubit_order": [_qjson(q) for q in samples.qubit_order],
            "provenance": samples.provenance, "seed": samples.seed}


def write_sample_files(path, samples: SampleSet) -> None:
    path = Path(path)
    path.write_bytes(write_samples(samples))
    Path(f"{path}.json").write_bytes(_dumps(samples_sidecar(samples)))


def _read_sidecar(path) -> dict:
    side = Path(f"{path}.json")
    if not side.exists():
        raise ValidationError(f"missing sidecar {side}")
    return _loads(side.read_bytes())


def read_sample_files(path) -> SampleSet:
    side = _Shape.obj(_read_sidecar(path), "sidecar", ("n", "qubit_order"))
    order = [_Shape.qubit(q, "qubit_order") for q in _Shape.list(side["qubit_order"], "qubit_order")]
    return parse_samples(Path(path).read_bytes(), _Shape.int(side["n"], "n"), order,
                         side.get("provenance", ""), side.get("seed"))


def reverse_bits(samples: SampleSet) -> SampleSet:
    """The same bitstrings read right to left (last character most significant)."""
    return SampleSet.from_bits(samples.bits()[:, ::-1], samples.qubit_order, samples.provenance, samples.seed)


def resolve_bit_order(samples: SampleSet, probs) -> tuple[SampleSet, bool, float, float]:
    """Pick the character order under which external samples score higher against ``probs``.

    For files whose bit convention is not documented. Returns the samples in
    our convention, whether they had to be reversed, and both F_XEB values so
    the caller can judge how clear the decision was.
    """
    probs = np.asarray(probs, dtype=float)
    flipped = reverse_bits(samples)
    forward = xeb_from_probabilities(probs[samples.indices], samples.n)[0]
    backward = xeb_from_probabilities(probs[flipped.indices], samples.n)[0]
    if backward > forward:
        return flipped, True, forward, backward
    return samples, False, forward, backward


# -------------------------------------------------------------- amplitudes

def write_amplitudes(amplitudes) -> bytes:
    """Text form: ``re im`` per line, shortest round-trip decimals."""
    amps = np.asarray(amplitudes, dtype=complex)
    return "".join(f"{a.real!r} {a.imag!r}\n" for a in amps.tolist()).encode()


def parse_amplitudes(text) -> np.ndarray:
    data = bytes(text.encode() if isinstance(text, str) else text)
    lines = data.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    out = np.empty(len(lines), dtype=complex)
    for i, line in enumerate(lines):
        fields = line.split()
        if len(fields) != 2:
            raise ParseError(f"line {i + 1}: expected 2 fields (re im), found {len(fields)}", line=i + 1)
        try:
            re_, im_ = float(fields[0]), float(fields[1])
        except ValueError:
            raise ParseError(f"line {i + 1}: non-numeric field", line=i + 1) from None
        out[i] = complex(re_, im_)
    return out


def write_amplitude_dump(path, table: AmplitudeTable, circuit_digest: str | None = None) -> None:
    """Binary little-endian (re, im) float64 pairs in index order, plus a JSON sidecar."""
    path = Path(path)
    path.write_bytes(np.asarray(table.amplitudes, dtype="<c16").tobytes())
    Path(f"{path}.json").write_bytes(_dumps({"n": table.n, "qubit_order": [_qjson(q) for q in table.qubit_order],
                                             "circuit_hash": circuit_digest}))


def read_amplitude_dump(path) -> AmplitudeTable:
    side = _Shape.obj(_read_sidecar(path), "sidecar", ("n", "qubit_order"))
    n = _Shape.int(side["n"], "n")
    raw = Path(path).read_bytes()
    if len(raw) != 16 * 2**n:
        raise ParseError(f"amplitude dump has {len(raw)} bytes, expected {16 * 2**n}")
    order = tuple(_Shape.qubit(q, "qubit_order") for q in side["qubit_order"])
    return AmplitudeTable(n, np.frombuffer(raw, dtype="<c16").astype(complex), order)


# --------------------------------------------------------------- manifests

@dataclass(frozen=True)
class ManifestEntry:
    circuit: str | None
    samples: str
    amplitudes: str | None
    n: int
    m: int
    pattern: str
    variant: str


@dataclass(frozen=True)
class DatasetManifest:
    root: str
    circuits: list = field(default_factory=list)

    def path(self, rel: str | None) -> Path | None:
        return None if rel is None else Path(self.root) / rel


def write_manifest(manifest: DatasetManifest) -> bytes:
    return _dumps({"root": manifest.root, "circuits": [
        {"circuit": e.circuit, "samples": e.samples, "amplitudes": e.amplitudes, "n": e.n, "m": e.m,
         "pattern": e.pattern, "variant": e.variant} for e in manifest.circuits]})


def parse_manifest(text, root=None) -> DatasetManifest:
    """``root`` overrides the stored root (e.g. the manifest's own directory)."""
    S = _Shape
    doc = S.obj(_loads(text), "manifest", ("root", "circuits"))
    entries = []
    for i, e in enumerate(S.list(doc["circuits"], "circuits")):
        p = f"circuits[{i}]"
        S.obj(e, p, ("samples", "n", "m", "pattern", "variant"))
        entries.append(ManifestEntry(e.get("circuit"), S.str(e["samples"], p + ".samples"), e.get("amplitudes"),
                                     S.int(e["n"], p + ".n"), S.int(e["m"], p + ".m"),
                                     S.str(e["pattern"], p + ".pattern"), S.str(e["variant"], p + ".variant")))
    return DatasetManifest(str(root) if root is not None else S.str(doc["root"], "root"), entries)


@dataclass(frozen=True)
class AlignmentReport:
    samples: str
    count_match: bool
    n_samples: int
    f_xeb: float
    std_error: float
    max_amplitude_deviation: float | None = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verify_alignment(entry: ManifestEntry, root=".") -> AlignmentReport:
    """F_XEB from the sample and amplitude files alone.

    Line i of the amplitude file holds the amplitude of line i of the sample
    file. When the entry also names a circuit small enough to simulate, the
    file amplitudes are compared with a fresh simulation.
    """
    root = Path(root)
    if entry.amplitudes is None:
        raise AlignmentError(f"{entry.samples}: no amplitude file in the manifest entry")
    amp_path = root / entry.amplitudes
    if not amp_path.exists():
        raise AlignmentError(f"amplitude file {amp_path} not found")
    sample_path = root / entry.samples
    if not sample_path.exists():
        raise AlignmentError(f"sample file {sample_path} not found")
    if Path(f"{sample_path}.json").exists():
        samples = read_sample_files(sample_path)
    else:
        samples = parse_samples(sample_path.read_bytes(), entry.n)
    if samples.n != entry.n:
        raise AlignmentError(f"{entry.samples}: samples have {samples.n} bits, manifest says {entry.n}")
    amps = parse_amplitudes(amp_path.read_bytes())
    if amps.size != len(samples):
        raise AlignmentError(f"{entry.samples}: {len(samples)} samples but {amps.size} amplitudes")
    deviation = None
    if entry.circuit is not None:
        circuit = parse_circuit((root / entry.circuit).read_bytes())
        if circuit.n != samples.n:
            raise AlignmentError(f"{entry.circuit}: circuit has {circuit.n} qubits, samples have {samples.n}")
        if circuit.n <= MAX_QUBITS:
            ref = simulate(circuit).amplitudes[samples.indices]
            deviation = float(np.abs(ref - amps).max()) if amps.size else 0.0
    est, se = xeb_from_probabilities(np.abs(amps) ** 2, samples.n)
    return AlignmentReport(entry.samples, True, len(samples), est, se, deviation)


def write_dataset(root, name: str, circuit: Circuit, samples: SampleSet, table: AmplitudeTable | None = None) -> ManifestEntry:
    """Write circuit, samples (+ sidecar) and per-sample amplitudes under ``root``."""
    root = Path(root)
    os.makedirs(root, exist_ok=True)
    (root / f"{name}.circuit.json").write_bytes(write_circuit(circuit))
    write_sample_files(root / f"{name}.samples.txt", samples)
    amp_name = None
    if table is not None:
        amp_name = f"{name}.amplitudes.txt"
        (root / amp_name).write_bytes(write_amplitudes(table.amplitudes[samples.indices]))
    return ManifestEntry(f"{name}.circuit.json", f"{name}.samples.txt", amp_name, circuit.n, circuit.depth,
                         circuit.pattern.name, circuit.variant.value)

