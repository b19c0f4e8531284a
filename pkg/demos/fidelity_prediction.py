"""How well does the product of per-gate survival probabilities predict F_XEB?

Samples a 10-qubit, depth-14 circuit under independent Pauli errors and
readout flips at the averaged device rates, then compares the measured
F_XEB with the product-formula prediction. Takes about ten seconds.

    python3 demos/fidelity_prediction.py
"""
from rcsverify import f_xeb, formula77_averaged, generate_random_circuit, ideal_xeb, probabilities, simulate
from rcsverify.noise import pauli_trajectory_sample, sample_noise_model, uniform_rates

n, m = 10, 14
circuit = generate_random_circuit(7, n, m)
probs = probabilities(simulate(circuit))
g1, g2 = circuit.gate_counts()
predicted = formula77_averaged(n, g1, g2)
print(f"n={n} m={m}: {g1} single-qubit gates, {g2} fSim gates")
print(f"predicted fidelity          {predicted:.4f}")

noisy = pauli_trajectory_sample(circuit, None, uniform_rates(circuit, 0.0016, 0.0062, 0.038), 200_000, seed=1)
est, se = f_xeb(noisy, probs)
print(f"Pauli trajectories  F_XEB = {est:.4f} +- {se:.4f}  ({est / predicted - 1:+.1%} vs prediction)")

# a white-noise mixture at the predicted fidelity should score phi * (2^n sum p^2 - 1)
mixed = sample_noise_model(probs, predicted, 200_000, seed=2, qubit_order=circuit.qubits)
est, se = f_xeb(mixed, probs)
print(f"white-noise mixture F_XEB = {est:.4f} +- {se:.4f}  (expected {predicted * ideal_xeb(probs):.4f})")
