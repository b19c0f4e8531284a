import numpy as np
import pytest
from scipy import stats

from rcsverify.calibration import apply_calibration, random_miscalibration
from rcsverify.circuits import generate_random_circuit
from rcsverify.errors import CapacityError, CoverageError, ValidationError
from rcsverify.estimators import f_xeb, ideal_xeb
from rcsverify.noise import (BLOCK, ComponentErrorRates, apply_readout_errors, pauli_trajectory_sample,
                             sample_noise_model, trajectory_error_counts, uniform_rates)
from rcsverify.samples import SampleSet
from rcsverify.simulator import (ONE_QUBIT_MATRICES, exact_sample, fsim_matrix, probabilities, rz_diagonal,
                                 simulate)

I2 = np.eye(2)
PAULIS = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]


def embed(m, positions, n):
    """Full 2^n operator for ``m`` acting on qubit positions (0 = most significant)."""
    k = len(positions)
    rest = [i for i in range(n) if i not in positions]
    perm = list(positions) + rest
    t = np.kron(m, np.eye(2 ** (n - k))).reshape([2] * (2 * n))
    inv = np.argsort(perm)
    return t.transpose(list(inv) + [n + i for i in inv]).reshape(2**n, 2**n)


def density_matrix_probs(circuit, e1, e2):
    n = circuit.n
    pos = {q: i for i, q in enumerate(circuit.qubits)}
    rho = np.zeros((2**n, 2**n), complex)
    rho[0, 0] = 1
    two = [np.kron(a, b) for a in [I2] + PAULIS for b in [I2] + PAULIS][1:]
    for mo in circuit.moments:
        for g in mo.gates:
            if mo.kind == "rz":
                # virtual z rotations are noiseless
                full = embed(np.diag(rz_diagonal(g.angle)), [pos[g.target]], n)
                rho = full @ rho @ full.conj().T
                continue
            if mo.kind == "ones":
                u, where, e, errs = ONE_QUBIT_MATRICES[g.kind], [pos[g.target]], e1, PAULIS
            else:
                u, where, e, errs = fsim_matrix(g.theta, g.phi), [pos[g.q_a], pos[g.q_b]], e2, two
            full = embed(u, where, n)
            rho = full @ rho @ full.conj().T
            mixed = sum(embed(p, where, n) @ rho @ embed(p, where, n).conj().T for p in errs) / len(errs)
            rho = (1 - e) * rho + e * mixed
    return np.real(np.diag(rho))


def test_mixture_endpoints():
    c = generate_random_circuit(1, 8, 8)
    p = probabilities(simulate(c))
    s0 = sample_noise_model(p, 0.0, 100_000, 1, c.qubits)
    assert abs(f_xeb(s0, p)[0]) < 0.05
    s1 = sample_noise_model(p, 1.0, 100_000, 1, c.qubits)
    assert abs(f_xeb(s1, p)[0] - ideal_xeb(p)) < 0.05
    assert sample_noise_model(p, 0.3, 1000, 5) == sample_noise_model(p, 0.3, 1000, 5)
    with pytest.raises(ValidationError):
        sample_noise_model(p, 1.2, 10, 0)
    with pytest.raises(ValidationError):
        sample_noise_model(np.full(6, 1 / 6), 0.5, 10, 0)


def test_readout_flip_rates_asymmetric():
    n = 3
    order = [(0, i) for i in range(n)]
    zeros = SampleSet(n, order, np.zeros(200_000, dtype=np.int64))
    ones = SampleSet(n, order, np.full(200_000, 7, dtype=np.int64))
    eq = {q: (0.1, 0.3) for q in zeros.qubit_order}
    up = apply_readout_errors(zeros, eq, 2).bits().mean(axis=0)
    down = 1 - apply_readout_errors(ones, eq, 2).bits().mean(axis=0)
    np.testing.assert_allclose(up, 0.1, atol=0.005)
    np.testing.assert_allclose(down, 0.3, atol=0.005)
    assert apply_readout_errors(zeros, 0.0, 1) == zeros


def test_readout_rejects_bad_rate():
    s = SampleSet(1, [(0, 0)], np.zeros(3, dtype=np.int64))
    with pytest.raises(ValidationError):
        apply_readout_errors(s, 1.5, 0)
    with pytest.raises(ValidationError):
        ComponentErrorRates({}, {}, {(0, 0): (0.1, -0.1)})


def test_trajectory_without_errors_is_exact_distribution():
    c = generate_random_circuit(3, 6, 6)
    p = probabilities(simulate(c))
    s = pauli_trajectory_sample(c, None, uniform_rates(c, 0, 0, 0), 100_000, 4)
    counts = np.bincount(s.indices, minlength=p.size)
    assert stats.chisquare(counts, p * len(s)).pvalue > 1e-3


def test_trajectory_matches_density_matrix():
    c = generate_random_circuit(2, 3, 4)
    e1, e2 = 0.2, 0.3
    ref = density_matrix_probs(c, e1, e2)
    s = pauli_trajectory_sample(c, None, uniform_rates(c, e1, e2, 0), 200_000, 9)
    counts = np.bincount(s.indices, minlength=ref.size)
    assert stats.chisquare(counts, ref * len(s)).pvalue > 1e-3


def test_trajectory_with_calibration_matches_density_matrix():
    c = generate_random_circuit(5, 4, 3)
    cal = random_miscalibration(c, 2, 0.4)
    ref = density_matrix_probs(apply_calibration(c, cal), 0.1, 0.25)
    s = pauli_trajectory_sample(c, cal, uniform_rates(c, 0.1, 0.25, 0), 200_000, 3)
    counts = np.bincount(s.indices, minlength=ref.size)
    assert stats.chisquare(counts, ref * len(s)).pvalue > 1e-3


def test_trajectory_deterministic_and_block_structured():
    c = generate_random_circuit(1, 5, 4)
    rates = uniform_rates(c, 0.05, 0.1, 0.02)
    a = pauli_trajectory_sample(c, None, rates, BLOCK + 100, 11)
    b = pauli_trajectory_sample(c, None, rates, BLOCK + 100, 11)
    assert a == b
    # the first block does not depend on the total count
    short = pauli_trajectory_sample(c, None, rates, BLOCK, 11)
    assert np.array_equal(short.indices, a.indices[:BLOCK])


def test_error_counts_follow_binomials():
    c = generate_random_circuit(4, 6, 6)
    rates = uniform_rates(c, 0.01, 0.05, 0.04)
    gate, flips = trajectory_error_counts(c, rates, 100_000, 2)
    g1, g2 = c.gate_counts()
    assert gate.mean() == pytest.approx(0.01 * g1 + 0.05 * g2, rel=0.02)
    assert flips.mean() == pytest.approx(0.04 * c.n, rel=0.02)
    clean = ((gate == 0) & (flips == 0)).mean()
    assert clean == pytest.approx(0.99**g1 * 0.95**g2 * 0.96**c.n, abs=0.005)


def test_rates_must_cover_every_gate():
    c = generate_random_circuit(1, 4, 2)
    rates = uniform_rates(c, 0.01, 0.01, 0.01)
    partial = ComponentErrorRates(dict(list(rates.e1.items())[1:]), rates.e2, rates.eq)
    with pytest.raises(CoverageError):
        pauli_trajectory_sample(c, None, partial, 10, 0)


def test_trajectory_capacity():
    c = generate_random_circuit(1, 6, 2)
    with pytest.raises(CapacityError):
        pauli_trajectory_sample(c, None, uniform_rates(c, 0, 0, 0), 10, 0, max_qubits=5)


def test_exact_sampler_is_trajectory_limit():
    c = generate_random_circuit(6, 6, 4)
    p = probabilities(simulate(c))
    a = f_xeb(exact_sample(p, 50_000, 1, c.qubits), p)
    b = f_xeb(pauli_trajectory_sample(c, None, uniform_rates(c, 0, 0, 0), 50_000, 1), p)
    assert abs(a[0] - b[0]) < 4 * (a[1] + b[1])
