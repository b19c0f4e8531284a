import math

import numpy as np
import pytest

from rcsverify.calibration import (CalibrationMap, _BatchOracle, apply_calibration, coupler_circuit,
                                   fit_two_gate, identity_calibration, normalized_xeb, random_miscalibration,
                                   strip_zero_rotations)
from rcsverify.circuits import GridQubit, Moment, FSimGate, generate_random_circuit, make_edge
from rcsverify.errors import ConvergenceError, CoverageError, InsufficientDataError, ValidationError
from rcsverify.simulator import exact_sample, probabilities, simulate

EDGE = make_edge(GridQubit(3, 3), GridQubit(3, 4))
NATIVE = (1.2947043217999283, 0.4859467238431821)


def planted_data(theta, phi, circuits=50, shots=1000, seed=0):
    cs, ss = [], []
    for i in range(circuits):
        c = coupler_circuit(seed * 1000 + i, EDGE, 14)
        cal = identity_calibration(c)
        cal = CalibrationMap({EDGE: (theta, phi)}, cal.rotations)
        p = probabilities(simulate(c, cal))
        cs.append(c)
        ss.append(exact_sample(p, shots, seed * 1000 + i, c.qubits))
    return cs, ss


def test_identity_calibration_values():
    c = generate_random_circuit(1, 12, 14)
    cal = identity_calibration(c)
    for theta, phi in cal.native.values():
        assert theta == pytest.approx(1.57079632679, abs=1e-11)
        assert phi == pytest.approx(0.52359877559, abs=1e-11)
    assert len(cal.rotations) * 4 == 4 * c.gate_counts()[1]
    assert set(cal.native) == set(c.edges_used())


def test_identity_calibration_preserves_amplitudes():
    c = generate_random_circuit(1, 10, 8)
    cc = apply_calibration(c, identity_calibration(c))
    assert strip_zero_rotations(cc).moments == c.moments
    np.testing.assert_allclose(simulate(cc).amplitudes, simulate(c).amplitudes, atol=1e-12)


def test_apply_calibration_native_values_and_structure():
    c = generate_random_circuit(2, 20, 14)
    cal = random_miscalibration(c, 3, 0.2)
    cal.native[EDGE] = NATIVE
    cc = apply_calibration(c, cal)
    assert [g for _, g in cc.one_qubit_gates()] == [g for _, g in c.one_qubit_gates()]
    assert cc.gate_counts()[1] == c.gate_counts()[1]
    assert all((g.theta, g.phi) == NATIVE for _, g in cc.two_qubit_gates() if g.edge == EDGE)


def test_rotation_count_per_edge_occurrence():
    c = generate_random_circuit(2, 20, 14)
    uses = sum(1 for _, g in c.two_qubit_gates() if g.edge == EDGE)
    assert uses == 3
    cc = apply_calibration(c, random_miscalibration(c, 1, 0.1))
    ms = cc.moments
    rz_on_edge = sum(1 for i, mo in enumerate(ms) if mo.kind == "twos" and any(g.edge == EDGE for g in mo.gates)
                     for side in (ms[i - 1], ms[i + 1]) for g in side.gates if g.target in EDGE)
    assert rz_on_edge == 4 * uses
    assert sum(len(mo.gates) for mo in ms if mo.kind == "rz") == 4 * c.gate_counts()[1]


def test_rotations_differ_per_occurrence_natives_do_not():
    c = generate_random_circuit(2, 20, 14)
    cal = random_miscalibration(c, 1, 0.3)
    assert cal.rotations[(EDGE, 0)] != cal.rotations[(EDGE, 1)]
    cc = apply_calibration(c, cal)
    angles = {(g.theta, g.phi) for _, g in cc.two_qubit_gates() if g.edge == EDGE}
    assert len(angles) == 1


def test_coverage_error():
    c = generate_random_circuit(2, 6, 4)
    cal = identity_calibration(c)
    del cal.native[next(iter(cal.native))]
    with pytest.raises(CoverageError):
        apply_calibration(c, cal)


def test_random_miscalibration_properties():
    c = generate_random_circuit(2, 12, 14)
    assert random_miscalibration(c, 5, 0.0) == identity_calibration(c)
    assert random_miscalibration(c, 5, 0.3) == random_miscalibration(c, 5, 0.3)
    cal = random_miscalibration(c, 5, 0.3)
    for theta, phi in cal.native.values():
        assert abs(theta - math.pi / 2) <= 0.3 and abs(phi - math.pi / 6) <= 0.3
    fixed = random_miscalibration(c, 5, 0.3, offsets="fixed")
    for theta, phi in fixed.native.values():
        assert abs(abs(theta - math.pi / 2) - 0.3) < 1e-12
    with pytest.raises(ValidationError):
        random_miscalibration(c, 5, -1.0)


def test_shared_coupler_drift_across_circuits():
    a = generate_random_circuit(1, 20, 14)
    b = generate_random_circuit(2, 24, 10)
    ca, cb = random_miscalibration(a, 7, 0.3), random_miscalibration(b, 7, 0.3)
    assert ca.native[EDGE] == cb.native[EDGE]


def test_batch_oracle_matches_simulator():
    cs = [coupler_circuit(i, EDGE, 6) for i in range(4)]
    model = _BatchOracle(cs)(1.1, 0.4)
    for c, row in zip(cs, model):
        ref = probabilities(simulate(c, CalibrationMap({EDGE: (1.1, 0.4)}, identity_calibration(c).rotations)))
        np.testing.assert_allclose(row, ref, atol=1e-12)


def test_normalized_xeb_is_one_on_matching_model():
    model = np.array([[0.1, 0.2, 0.3, 0.4], [0.5, 0.2, 0.2, 0.1]])
    assert normalized_xeb(model, model) == pytest.approx(1.0)
    assert normalized_xeb(model, np.full_like(model, 0.25)) == 0.0


def test_fit_recovers_standard_gate():
    cs, ss = planted_data(math.pi / 2, math.pi / 6)
    res = fit_two_gate(cs, ss)
    assert abs(res.theta_hat - math.pi / 2) < 0.01
    assert abs(res.phi_hat - math.pi / 6) < 0.02
    assert 0 <= res.theta_hat <= math.pi and 0 <= res.phi_hat < 2 * math.pi


def test_fit_recovers_native_angles():
    cs, ss = planted_data(*NATIVE, seed=1)
    res = fit_two_gate(cs, ss)
    assert abs(res.theta_hat - NATIVE[0]) < 0.01
    assert abs(res.phi_hat - NATIVE[1]) < 0.02


def test_fit_improves_on_starting_point():
    cs, ss = planted_data(1.0, 2.0, circuits=20, seed=2)
    res = fit_two_gate(cs, ss, restarts=1)
    freqs = np.array([np.bincount(s.indices, minlength=4) / len(s) for s in ss])
    start = normalized_xeb(freqs, _BatchOracle(cs)(math.pi / 2, math.pi / 6))
    assert res.objective >= start


def test_fit_single_circuit_accepts_plain_arguments():
    cs, ss = planted_data(math.pi / 2, math.pi / 6, circuits=1, shots=20_000, seed=3)
    res = fit_two_gate(cs[0], ss[0])
    assert res.evaluations > 0


def test_fit_insufficient_data():
    cs, ss = planted_data(1.0, 1.0, circuits=1, shots=10)
    with pytest.raises(InsufficientDataError):
        fit_two_gate(cs, ss)


def test_fit_convergence_error_carries_best():
    cs, ss = planted_data(1.0, 1.0, circuits=5, shots=4000)
    with pytest.raises(ConvergenceError) as info:
        fit_two_gate(cs, ss, max_evals=3, restarts=1)
    assert info.value.best is not None


def test_fit_rejects_wrong_width():
    c = generate_random_circuit(0, 3, 2)
    s = exact_sample(probabilities(simulate(c)), 20_000, 0, c.qubits)
    with pytest.raises(ValidationError):
        fit_two_gate(c, s)


def test_coupler_circuit_fires_every_layer():
    c = coupler_circuit(0, EDGE, 5)
    assert c.gate_counts() == (12, 5)
    assert all(isinstance(g, FSimGate) for _, g in c.two_qubit_gates())
    assert all(isinstance(mo, Moment) for mo in c.moments)
