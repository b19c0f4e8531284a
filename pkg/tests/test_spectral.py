import math

import numpy as np
import pytest
from scipy.linalg import hadamard

from rcsverify.circuits import generate_random_circuit
from rcsverify.errors import FeasibilityError, InsufficientDataError, ValidationError
from rcsverify.estimators import f_xeb, ideal_xeb
from rcsverify.noise import apply_readout_errors, sample_noise_model
from rcsverify.samples import SampleSet
from rcsverify.simulator import exact_sample, probabilities, simulate
from rcsverify.spectral import (LevelSpectrum, fit_secondary_fidelity, fwht, level_fidelity, popcounts,
                                readout_decay_curve, spectrum_csv)


@pytest.fixture(scope="module")
def case():
    c = generate_random_circuit(5, 10, 12)
    return c, probabilities(simulate(c))


def test_fwht_matches_hadamard_matrix():
    x = np.random.default_rng(0).normal(size=32)
    np.testing.assert_allclose(fwht(x), hadamard(32) @ x, atol=1e-12)
    np.testing.assert_allclose(fwht(fwht(x)), 32 * x, atol=1e-12)


def test_fwht_does_not_mutate_input():
    x = np.arange(8.0)
    fwht(x)
    np.testing.assert_array_equal(x, np.arange(8.0))


@pytest.mark.parametrize("bad", [[], [1, 2, 3], np.ones((2, 2))])
def test_fwht_rejects_bad_length(bad):
    with pytest.raises(ValidationError):
        fwht(bad)


def test_popcounts():
    assert popcounts(3).tolist() == [0, 1, 1, 2, 1, 2, 2, 3]
    assert popcounts(0).tolist() == [0]


def test_exact_samples_give_unit_levels(case):
    c, p = case
    sp = level_fidelity(exact_sample(p, 500_000, 2, c.qubits), p, bootstrap=30, seed=1)
    assert math.isnan(sp.phi_by_level[0])
    use = sp.usable()
    assert use[1:].sum() >= 5
    assert (np.abs(sp.phi_by_level[use] - 1) < 5 * sp.std_by_level[use] + 1e-3).all()


def test_weighted_fidelity_equals_normalized_xeb(case):
    c, p = case
    s = sample_noise_model(p, 0.6, 50_000, 3, c.qubits)
    sp = level_fidelity(s, p)
    est, _ = f_xeb(s, p)
    assert sp.weighted_fidelity() == pytest.approx(est / ideal_xeb(p), rel=1e-9)


def test_mixture_scales_every_level(case):
    c, p = case
    s = sample_noise_model(p, 0.5, 1_000_000, 3, c.qubits)
    sp = level_fidelity(s, p, bootstrap=30, seed=2)
    use = sp.usable()
    assert (np.abs(sp.phi_by_level[use] - 0.5) < 5 * sp.std_by_level[use]).all()


def test_bootstrap_is_deterministic(case):
    c, p = case
    s = exact_sample(p, 10_000, 1, c.qubits)
    a = level_fidelity(s, p, bootstrap=5, seed=9).std_by_level
    b = level_fidelity(s, p, bootstrap=5, seed=9).std_by_level
    np.testing.assert_array_equal(a, b)
    with pytest.raises(ValidationError):
        level_fidelity(s, p).band()


def test_level_fidelity_errors(case):
    c, p = case
    with pytest.raises(ValidationError):
        level_fidelity(SampleSet(c.n, c.qubits, np.array([], dtype=np.int64)), p)
    with pytest.raises(ValidationError):
        level_fidelity(exact_sample(p, 10, 1, c.qubits), p[:16])
    wide = SampleSet(21, [(0, i) for i in range(21)], np.zeros(1, dtype=np.int64))
    with pytest.raises(FeasibilityError):
        level_fidelity(wide, None)


def test_decay_curve_uniform_and_weighted(case):
    _, p = case
    curve = readout_decay_curve(0.8, 0.05, 10)
    np.testing.assert_allclose(curve, 0.8 * 0.9 ** np.arange(11), rtol=1e-12)
    # with equal rates the weighting cannot matter
    np.testing.assert_allclose(readout_decay_curve(0.8, 0.05, 10, p)[1:], curve[1:], rtol=1e-12)
    rates = np.linspace(0.0, 0.1, 10)
    assert readout_decay_curve(1.0, rates, 10)[10] == pytest.approx(np.prod(1 - 2 * rates))
    with pytest.raises(ValidationError):
        readout_decay_curve(1.0, [0.1] * 3, 10)
    with pytest.raises(ValidationError):
        readout_decay_curve(1.0, 0.7, 10)


def test_readout_decay_in_samples(case):
    c, p = case
    rates = np.linspace(0.01, 0.08, c.n)
    eq = dict(zip(c.qubits, rates))
    s = apply_readout_errors(exact_sample(p, 1_000_000, 5, c.qubits), eq, 6)
    sp = level_fidelity(s, p, bootstrap=30, seed=3)
    pred = readout_decay_curve(1.0, rates, c.n, p)
    use = sp.usable()
    assert (np.abs(sp.phi_by_level[use] - pred[use]) < 4 * sp.std_by_level[use]).all()


def synthetic(phi, e, n=10):
    k = np.arange(n + 1)
    vals = phi * (1 - 2 * e) ** k
    vals[0] = np.nan
    w = np.ones(n + 1)
    return LevelSpectrum(n, vals, w, vals * w, 0.0)


def test_secondary_fit_exact_on_synthetic_spectrum():
    fit = fit_secondary_fidelity(synthetic(0.4, 0.03))
    assert fit.phi_hat == pytest.approx(0.4, rel=1e-10)
    assert fit.e_hat == pytest.approx(0.03, rel=1e-10)
    phi_hat, e_hat = fit
    assert (phi_hat, e_hat) == (fit.phi_hat, fit.e_hat)
    expected = 0.4 * np.mean(0.94 ** np.arange(1, 11))
    assert fit.fidelity == pytest.approx(expected, rel=1e-10)
    assert fit_secondary_fidelity(synthetic(0.4, 0.03), (2, 5)).levels == (2, 3, 4, 5)


def test_secondary_fit_needs_three_levels():
    with pytest.raises(InsufficientDataError):
        fit_secondary_fidelity(synthetic(0.4, 0.03), (1, 2))


def test_spectrum_csv():
    sp = synthetic(0.5, 0.1, 3)
    lines = spectrum_csv(sp).splitlines()
    assert lines[0] == "k,phi_k,weight_k,band_lo,band_hi"
    assert len(lines) == 5
    assert lines[1].startswith("0,,1.0,,")
    assert float(lines[2].split(",")[1]) == pytest.approx(0.4)
