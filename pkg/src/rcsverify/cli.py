"""Command line interface.

Reports go to stdout as JSON lines. Failures print one line to stderr and
exit with the error's code: 1 failed verdict, 2 parse, 3 validation,
4 alignment or integrity, 64 usage, 65 capacity.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import blind, dataio, spectral
from .calibration import coupler_circuit, fit_two_gate
from .circuits import GridQubit, Variant, derive_elided, derive_patch, generate_random_circuit
from .errors import RCSError, UsageError
from .estimators import (E1_AVERAGE, E2_AVERAGE, EQ_AVERAGE, empirical_model_distance, f_xeb, fidelity_report,
                         formula77, formula77_averaged)
from .noise import apply_readout_errors, pauli_trajectory_sample, sample_noise_model, uniform_rates
from .simulator import probabilities, simulate


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


def _read_circuit(path):
    return dataio.parse_circuit(Path(path).read_bytes())


def _read_calibration(path):
    return None if path is None else dataio.parse_calibration(Path(path).read_bytes())


def cmd_generate(a) -> int:
    if a.count < 1:
        raise UsageError("--count must be at least 1")
    if a.keep_fraction is not None and a.variant != "elided":
        raise UsageError("--keep-fraction only applies to --variant elided")
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(a.count):
        c = generate_random_circuit(a.seed + i, a.n, a.m, a.pattern.upper())
        if a.variant == Variant.PATCH.value:
            c = derive_patch(c)
        elif a.variant == Variant.ELIDED.value:
            frac = 0.5 if a.keep_fraction is None else a.keep_fraction
            c = derive_elided(c, keep_fraction=frac, seed=a.seed + i)
        path = out / f"circuit_n{a.n}_m{a.m}_{a.variant}_s{a.seed + i}.json"
        path.write_bytes(dataio.write_circuit(c))
        _emit({"circuit": str(path), "sha256": dataio.circuit_hash(c), "g1": c.gate_counts()[0],
               "g2": c.gate_counts()[1]})
    return 0


def cmd_simulate(a) -> int:
    c = _read_circuit(a.circuit)
    table = simulate(c, _read_calibration(a.calibration))
    dataio.write_amplitude_dump(a.out, table, dataio.circuit_hash(c))
    _emit({"amplitudes": a.out, "n": c.n})
    return 0


def cmd_sample(a) -> int:
    c = _read_circuit(a.circuit)
    calib = _read_calibration(a.calibration)
    if a.trajectories:
        rates = uniform_rates(c, a.e1, a.e2, a.eq)
        samples = pauli_trajectory_sample(c, calib, rates, a.N, a.seed)
    else:
        table = simulate(c, calib)
        samples = sample_noise_model(probabilities(table), a.phi, a.N, a.seed, c.qubits)
        if a.readout:
            samples = apply_readout_errors(samples, a.readout, a.seed)
    dataio.write_sample_files(a.out, samples)
    if a.amplitudes_out:
        amps = simulate(c, calib).amplitudes[samples.indices]
        Path(a.amplitudes_out).write_bytes(dataio.write_amplitudes(amps))
    _emit({"samples": a.out, "n": c.n, "N": len(samples), "provenance": samples.provenance})
    return 0


def cmd_xeb(a) -> int:
    if a.manifest:
        manifest = dataio.parse_manifest(Path(a.manifest).read_bytes(), root=Path(a.manifest).parent)
        for entry in manifest.circuits:
            _emit(dataio.verify_alignment(entry, manifest.root).to_dict())
        return 0
    if a.samples is None:
        raise UsageError("xeb needs --samples (or --manifest)")
    if a.amplitudes is not None:
        root = Path(a.samples).parent
        samples = dataio.read_sample_files(a.samples)
        entry = dataio.ManifestEntry(a.circuit and str(Path(a.circuit).resolve()), str(Path(a.samples).resolve()),
                                     str(Path(a.amplitudes).resolve()), samples.n, 0, "", "")
        _emit(dataio.verify_alignment(entry, root).to_dict())
        return 0
    if a.circuit is None:
        raise UsageError("xeb needs --amplitudes or --circuit")
    c = _read_circuit(a.circuit)
    samples = dataio.read_sample_files(a.samples)
    probs = probabilities(simulate(c, _read_calibration(a.calibration)))
    _emit(fidelity_report(samples, probs, circuit=c, porter_thomas=a.porter_thomas and c.n <= 20,
                          name=str(a.circuit)).to_dict())
    return 0


def cmd_predict(a) -> int:
    if a.averaged:
        if None in (a.n, a.g1, a.g2):
            raise UsageError("predict --averaged needs --n, --g1 and --g2")
        _emit({"phi": formula77_averaged(a.n, a.g1, a.g2, a.e1, a.e2, a.eq), "n": a.n, "g1": a.g1, "g2": a.g2})
        return 0
    if a.circuit is None:
        raise UsageError("predict needs --averaged or --circuit")
    c = _read_circuit(a.circuit)
    g1, g2 = c.gate_counts()
    _emit({"phi": formula77(uniform_rates(c, a.e1, a.e2, a.eq), c), "n": c.n, "g1": g1, "g2": g2})
    return 0


def cmd_spectral(a) -> int:
    c = _read_circuit(a.circuit)
    samples = dataio.read_sample_files(a.samples)
    probs = probabilities(simulate(c, _read_calibration(a.calibration)))
    spectrum = spectral.level_fidelity(samples, probs, bootstrap=a.bootstrap, seed=a.seed)
    text = spectral.spectrum_csv(spectrum)
    if a.out:
        Path(a.out).write_text(text)
    else:
        sys.stdout.write(text)
    if a.fit:
        fit = spectral.fit_secondary_fidelity(spectrum)
        est, se = f_xeb(samples, probs)
        report = {"phi_hat": fit.phi_hat, "e_hat": fit.e_hat, "fidelity": fit.fidelity, "levels": list(fit.levels),
                  "f_xeb": est, "std_error": se}
        (sys.stdout if a.out else sys.stderr).write(json.dumps(report, sort_keys=True) + "\n")
    return 0


def cmd_calfit(a) -> int:
    if len(a.circuits) != len(a.samples):
        raise UsageError("--circuits and --samples need the same number of files")
    circuits = [_read_circuit(p) for p in a.circuits]
    samples = [dataio.read_sample_files(p) for p in a.samples]
    res = fit_two_gate(circuits, samples, min_samples=a.min_samples, seed=a.seed)
    _emit(res._asdict())
    return 0


def cmd_coupler(a) -> int:
    """Write single-coupler calibration circuits (inputs for calfit)."""
    edge = tuple(tuple(map(int, q.split(","))) for q in a.edge.split(":"))
    if len(edge) != 2:
        raise UsageError("--edge takes row,col:row,col")
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(a.count):
        c = coupler_circuit(a.seed + i, (GridQubit(*edge[0]), GridQubit(*edge[1])), a.m)
        path = out / f"coupler_s{a.seed + i}.json"
        path.write_bytes(dataio.write_circuit(c))
        _emit({"circuit": str(path)})
    return 0


def cmd_distance(a) -> int:
    c = _read_circuit(a.circuit)
    samples = dataio.read_sample_files(a.samples)
    probs = probabilities(simulate(c, _read_calibration(a.calibration)))
    _emit({"tvd": empirical_model_distance(samples, probs, a.phi), "phi": a.phi, "N": len(samples)})
    return 0


def cmd_blind(a) -> int:
    if a.role == "challenge":
        m = blind.challenge(a.out, n=a.n, m=a.m, count=a.count, seed=a.seed, pattern=a.pattern.upper(),
                            calibration_timing=a.calibration_timing)
        for e in m["circuits"]:
            _emit(e)
        return 0
    if a.role == "respond":
        cfg = blind.ProverConfig(a.mode, a.phi, a.readout, a.N, a.seed, a.miscal_seed, a.magnitude,
                                 a.offsets)
        m = blind.respond(a.challenge, a.out, cfg, a.stage)
        for e in m["entries"]:
            _emit(e)
        return 0
    verdicts = blind.verify(a.challenge, a.response, a.threshold)
    for v in verdicts:
        _emit(v.to_dict())
    return 0 if all(v.passed for v in verdicts) else 1


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rcsverify", description="Random circuit sampling fidelity tools.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write random circuits")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--pattern", choices=["efgh", "abcdcdab", "EFGH", "ABCDCDAB"], default="efgh")
    g.add_argument("--variant", choices=[v.value for v in Variant], default="full")
    g.add_argument("--keep-fraction", type=float)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("simulate", help="binary amplitude dump of a circuit")
    s.add_argument("--circuit", required=True)
    s.add_argument("--calibration")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sample", help="noisy samples from a circuit")
    s.add_argument("--circuit", required=True)
    s.add_argument("--calibration")
    s.add_argument("--phi", type=float, default=1.0, help="white-noise mixture fidelity")
    s.add_argument("--readout", type=float, default=0.0, help="symmetric readout flip rate")
    s.add_argument("--trajectories", action="store_true", help="Pauli trajectories instead of the mixture")
    s.add_argument("--e1", type=float, default=E1_AVERAGE)
    s.add_argument("--e2", type=float, default=E2_AVERAGE)
    s.add_argument("--eq", type=float, default=EQ_AVERAGE)
    s.add_argument("--N", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--amplitudes-out", help="also write per-sample amplitudes (text)")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("xeb", help="F_XEB of samples")
    s.add_argument("--circuit")
    s.add_argument("--calibration")
    s.add_argument("--samples")
    s.add_argument("--amplitudes", help="per-sample amplitude file aligned with the samples")
    s.add_argument("--manifest", help="dataset manifest; one report per entry")
    s.add_argument("--porter-thomas", action="store_true")
    s.set_defaults(func=cmd_xeb)

    s = sub.add_parser("predict", help="product-formula fidelity prediction")
    s.add_argument("--averaged", action="store_true")
    s.add_argument("--circuit")
    s.add_argument("--n", type=int)
    s.add_argument("--g1", type=int)
    s.add_argument("--g2", type=int)
    s.add_argument("--e1", type=float, default=E1_AVERAGE)
    s.add_argument("--e2", type=float, default=E2_AVERAGE)
    s.add_argument("--eq", type=float, default=EQ_AVERAGE)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("spectral", help="Fourier-Walsh level spectrum as CSV")
    s.add_argument("--circuit", required=True)
    s.add_argument("--calibration")
    s.add_argument("--samples", required=True)
    s.add_argument("--bootstrap", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--fit", action="store_true", help="also fit the readout decay")
    s.add_argument("--out")
    s.set_defaults(func=cmd_spectral)

    s = sub.add_parser("calfit", help="fit one coupler's fSim angles")
    s.add_argument("--circuits", nargs="+", required=True)
    s.add_argument("--samples", nargs="+", required=True)
    s.add_argument("--min-samples", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_calfit)

    s = sub.add_parser("coupler", help="write single-coupler calibration circuits")
    s.add_argument("--edge", required=True, help="row,col:row,col")
    s.add_argument("--m", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_coupler)

    s = sub.add_parser("distance", help="total variation distance to the mixture model")
    s.add_argument("--circuit", required=True)
    s.add_argument("--calibration")
    s.add_argument("--samples", required=True)
    s.add_argument("--phi", type=float, required=True)
    s.set_defaults(func=cmd_distance)

    b = sub.add_parser("blind", help="challenge / respond / verify exchange")
    roles = b.add_subparsers(dest="role", required=True, parser_class=_Parser)
    r = roles.add_parser("challenge")
    r.add_argument("--n", type=int, required=True)
    r.add_argument("--m", type=int, required=True)
    r.add_argument("--count", type=int, default=1)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--pattern", default="EFGH")
    r.add_argument("--calibration-timing", choices=blind.TIMINGS, default="after")
    r.add_argument("--out", required=True)
    r = roles.add_parser("respond")
    r.add_argument("--challenge", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--mode", choices=blind.MODES, default="honest")
    r.add_argument("--stage", choices=["calibrate", "sample", "all"], default="all")
    r.add_argument("--phi", type=float, default=0.4)
    r.add_argument("--readout", type=float, default=0.0)
    r.add_argument("--N", type=int, default=500_000)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--miscal-seed", type=int, default=0)
    r.add_argument("--magnitude", type=float, default=0.3)
    r.add_argument("--offsets", choices=["fixed", "uniform"], default="fixed")
    r = roles.add_parser("verify")
    r.add_argument("--challenge", required=True)
    r.add_argument("--response", required=True)
    r.add_argument("--threshold", type=float)
    b.set_defaults(func=cmd_blind)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except RCSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code
    except FileNotFoundError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
