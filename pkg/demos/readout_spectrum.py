"""Readout noise as geometric decay across Fourier-Walsh levels.

Exact samples of a 12-qubit circuit go through a symmetric 5% readout
channel. The per-level estimates fall like (1 - 2e)^k, and a log-linear fit
recovers both e and the overall fidelity.

    python3 demos/readout_spectrum.py
"""
import numpy as np

from rcsverify import (apply_readout_errors, exact_sample, f_xeb, fit_secondary_fidelity, generate_random_circuit,
                       ideal_xeb, level_fidelity, probabilities, readout_decay_curve, simulate)

e = 0.05
circuit = generate_random_circuit(11, 12, 14)
probs = probabilities(simulate(circuit))
samples = apply_readout_errors(exact_sample(probs, 1_000_000, 3, circuit.qubits), e, seed=4)

spectrum = level_fidelity(samples, probs, bootstrap=100, seed=1)
expected = readout_decay_curve(1.0, e, circuit.n)
print(" k   measured    +-3 sigma    expected")
for k in range(1, circuit.n + 1):
    phi = spectrum.phi_by_level[k]
    if np.isnan(phi):
        print(f"{k:2d}   (weight below floor)")
        continue
    print(f"{k:2d}   {phi:8.4f}   {3 * spectrum.std_by_level[k]:8.4f}   {expected[k]:8.4f}")

fit = fit_secondary_fidelity(spectrum)
est, _ = f_xeb(samples, probs)
print(f"fit: e_hat={fit.e_hat:.4f} phi_hat={fit.phi_hat:.4f} fidelity={fit.fidelity:.4f}")
print(f"F_XEB / (2^n sum p^2 - 1) = {est / ideal_xeb(probs):.4f}")
