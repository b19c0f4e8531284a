"""Calibration maps and XEB-maximizing two-qubit gate fits.

A calibration map replaces each coupler's standard fSim angles with native
ones and wraps the k-th occurrence of every coupler in four z-rotations
(two before the gate, two after). Native angles depend only on the coupler;
the rotations depend on the coupler and the occurrence index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import optimize

from . import rng
from .circuits import (STANDARD_PHI, STANDARD_THETA, Circuit, FSimGate, Moment, RzGate,
                       make_edge)
from .errors import ConvergenceError, CoverageError, InsufficientDataError, ValidationError
from .samples import SampleSet

MIN_FIT_SAMPLES = 10_000


@dataclass(frozen=True)
class CalibrationMap:
    """``native[edge] = (theta, phi)``; ``rotations[(edge, k)] = (pre_a, pre_b, post_a, post_b)``.

    ``a`` and ``b`` refer to the edge's qubits in canonical (sorted) order.
    """

    native: dict = field(default_factory=dict)
    rotations: dict = field(default_factory=dict)


def _occurrences(circuit: Circuit):
    """Yield (moment index, gate, edge, k) with k counting prior uses of the edge."""
    seen: dict = {}
    for i, g in circuit.two_qubit_gates():
        e = g.edge
        k = seen.get(e, 0)
        seen[e] = k + 1
        yield i, g, e, k


def identity_calibration(circuit: Circuit) -> CalibrationMap:
    native, rotations = {}, {}
    for _, _, e, k in _occurrences(circuit):
        native[e] = (STANDARD_THETA, STANDARD_PHI)
        rotations[(e, k)] = (0.0, 0.0, 0.0, 0.0)
    return CalibrationMap(native, rotations)


def random_miscalibration(circuit: Circuit, seed: int, magnitude: float, offsets: str = "uniform") -> CalibrationMap:
    """Standard angles plus random offsets.

    ``offsets="uniform"`` draws each offset from [-magnitude, magnitude];
    ``"fixed"`` sets every offset to +/-magnitude with a random sign, i.e.
    every angle is off by exactly ``magnitude``. Offsets are keyed by coupler
    (and occurrence index for rotations), so two circuits sharing a coupler
    see the same device drift.
    """
    if magnitude < 0:
        raise ValidationError("magnitude must be non-negative")
    if offsets not in ("uniform", "fixed"):
        raise ValidationError(f"unknown offset distribution {offsets!r}")

    def draw(r, size):
        u = r.uniform(-1, 1, size)
        return (np.sign(u) if offsets == "fixed" else u) * magnitude

    native, rotations = {}, {}
    for _, _, e, k in _occurrences(circuit):
        key = (e[0].row, e[0].col, e[1].row, e[1].col)
        if e not in native:
            d = draw(rng.stream(seed, "miscal-native", *key), 2)
            native[e] = (STANDARD_THETA + float(d[0]), STANDARD_PHI + float(d[1]))
        angles = draw(rng.stream(seed, "miscal-rotation", *key, k), 4)
        rotations[(e, k)] = tuple(float(a) for a in angles)
    return CalibrationMap(native, rotations)


def apply_calibration(circuit: Circuit, calib: CalibrationMap) -> Circuit:
    """Substitute native angles and insert rotation layers around each fSim layer."""
    pre_layers: dict = {}
    post_layers: dict = {}
    replaced: dict = {}
    for i, g, e, k in _occurrences(circuit):
        if e not in calib.native:
            raise CoverageError(f"calibration has no native angles for coupler {e[0]}-{e[1]}")
        if (e, k) not in calib.rotations:
            raise CoverageError(f"calibration has no rotations for occurrence {k} of {e[0]}-{e[1]}")
        theta, phi = calib.native[e]
        pre_a, pre_b, post_a, post_b = calib.rotations[(e, k)]
        replaced.setdefault(i, []).append(FSimGate(theta, phi, g.q_a, g.q_b))
        # angles are stored for the canonical edge order, gates may list qubits reversed
        a, b = e
        pre_layers.setdefault(i, []).extend([RzGate(pre_a, a), RzGate(pre_b, b)])
        post_layers.setdefault(i, []).extend([RzGate(post_a, a), RzGate(post_b, b)])

    moments = []
    for i, mo in enumerate(circuit.moments):
        if mo.kind == "twos" and i in replaced:
            moments.append(Moment("rz", tuple(pre_layers[i])))
            moments.append(Moment("twos", tuple(replaced[i])))
            moments.append(Moment("rz", tuple(post_layers[i])))
        else:
            moments.append(mo)
    return circuit.replace(moments=tuple(moments))


def strip_zero_rotations(circuit: Circuit) -> Circuit:
    moments = []
    for mo in circuit.moments:
        if mo.kind == "rz":
            mo = Moment("rz", tuple(g for g in mo.gates if g.angle != 0.0))
            if not mo.gates:
                continue
        moments.append(mo)
    return circuit.replace(moments=tuple(moments))


class FitResult(NamedTuple):
    theta_hat: float
    phi_hat: float
    objective: float
    evaluations: int


def _set_fsim_angles(circuit: Circuit, theta: float, phi: float) -> Circuit:
    moments = []
    for mo in circuit.moments:
        if mo.kind == "twos":
            mo = Moment("twos", tuple(g._replace(theta=theta, phi=phi) for g in mo.gates))
        moments.append(mo)
    return circuit.replace(moments=tuple(moments))


def _step_matrices(circuit: Circuit) -> list:
    """4x4 matrices of the non-fSim moments of a 2-qubit circuit; None marks an fSim."""
    from .simulator import ONE_QUBIT_MATRICES, rz_diagonal

    qa, _ = circuit.qubits
    steps = []
    for mo in circuit.moments:
        if not mo.gates:
            continue
        if mo.kind == "twos":
            steps.append(None)
            continue
        ma = mb = np.eye(2, dtype=complex)
        for g in mo.gates:
            m = ONE_QUBIT_MATRICES[g.kind] if mo.kind == "ones" else np.diag(rz_diagonal(g.angle))
            if g.target == qa:
                ma = m
            else:
                mb = m
        steps.append(np.kron(ma, mb))
    return steps


class _BatchOracle:
    """Outcome probabilities of many 2-qubit circuits as a function of the fSim angles."""

    def __init__(self, circuits):
        # group circuits sharing a moment layout so each group is one batched product
        groups: dict = {}
        for idx, c in enumerate(circuits):
            steps = _step_matrices(c)
            key = tuple(st is None for st in steps)
            groups.setdefault(key, []).append((idx, steps))
        self.size = len(circuits)
        self.groups = []
        for key, members in groups.items():
            stacks = [None if is_f else np.stack([m[1][k] for m in members])
                      for k, is_f in enumerate(key)]
            self.groups.append((np.array([m[0] for m in members]), stacks))

    def __call__(self, theta: float, phi: float) -> np.ndarray:
        from .simulator import fsim_matrix

        f_t = fsim_matrix(theta, phi).T
        out = np.empty((self.size, 4))
        for idx, stacks in self.groups:
            psi = np.zeros((idx.size, 4), dtype=complex)
            psi[:, 0] = 1
            for stack in stacks:
                psi = psi @ f_t if stack is None else np.einsum("cij,cj->ci", stack, psi)
            out[idx] = np.abs(psi) ** 2
        return out


def normalized_xeb(freqs: np.ndarray, model: np.ndarray) -> float:
    """Correlation form of the linear XEB between observed and model distributions.

    Both arrays are (circuits, outcomes). With ``a = freqs - 1/D`` and
    ``b = model - 1/D`` this is ``<a, b> / (|a| |b|)``: the pooled F_XEB
    divided by the geometric mean of the model's and the data's own ideal
    F_XEB. It equals 1 only when the model matches the data up to white
    noise, which the raw F_XEB does not guarantee.
    """
    d = freqs.shape[-1]
    a = (freqs - 1.0 / d).ravel()
    b = (model - 1.0 / d).ravel()
    denom = math.sqrt(float(a @ a) * float(b @ b))
    return float(a @ b) / denom if denom > 0 else 0.0


def raw_xeb(freqs: np.ndarray, model: np.ndarray, weights: np.ndarray) -> float:
    """Pooled F_XEB: sample-weighted mean over circuits of 2^n <freq, model> - 1."""
    d = freqs.shape[-1]
    per = d * (freqs * model).sum(axis=1) - 1.0
    return float(weights @ per / weights.sum())


def fit_two_gate(ideal: Circuit, samples, prob_oracle=None, *, min_samples: int = MIN_FIT_SAMPLES,
                 objective: str = "normalized", restarts: int = 5, seed: int = 0,
                 xatol: float = 1e-4, max_evals: int = 2000, scan: tuple = (25, 49)) -> FitResult:
    """Fit one coupler's (theta, phi) from samples by Nelder-Mead XEB maximization.

    ``ideal`` is a 2-qubit circuit or a sequence of them, ``samples`` the
    matching SampleSet(s). ``objective="normalized"`` (default) maximizes
    :func:`normalized_xeb`; ``"raw"`` maximizes the pooled F_XEB itself,
    which is biased away from the true angles because linear XEB rewards
    concentrated distributions.

    The first restart starts at the standard gate; the others start at the
    best points of a coarse ``scan`` grid over the search box. ``prob_oracle``
    optionally maps a circuit to its 4 outcome probabilities (slow path).
    """
    circuits = [ideal] if isinstance(ideal, Circuit) else list(ideal)
    sample_sets = [samples] if isinstance(samples, SampleSet) else list(samples)
    if len(circuits) != len(sample_sets):
        raise ValidationError("need one SampleSet per circuit")
    total = sum(len(s) for s in sample_sets)
    if total < min_samples:
        raise InsufficientDataError(f"{total} samples, need at least {min_samples}")
    for c in circuits:
        if c.n != 2:
            raise ValidationError("fit_two_gate needs circuits on exactly 2 qubits")
    if objective not in ("normalized", "raw"):
        raise ValidationError(f"unknown objective {objective!r}")

    weights = np.array([len(s) for s in sample_sets], dtype=float)
    freqs = np.array([np.bincount(s.indices, minlength=4) for s in sample_sets]) / np.maximum(weights, 1)[:, None]
    if prob_oracle is None:
        model = _BatchOracle(circuits)
    else:
        def model(theta, phi):
            return np.array([prob_oracle(_set_fsim_angles(c, theta, phi)) for c in circuits])
    evals = 0

    def value(x) -> float:
        nonlocal evals
        evals += 1
        p = model(x[0], x[1])
        return normalized_xeb(freqs, p) if objective == "normalized" else raw_xeb(freqs, p, weights)

    starts = [np.array([STANDARD_THETA, STANDARD_PHI])]
    if restarts > 1:
        thetas = np.linspace(0, math.pi, scan[0])
        phis = np.linspace(0, 2 * math.pi, scan[1], endpoint=False)
        grid = [(value((t, p)), t, p) for t in thetas for p in phis]
        grid.sort(key=lambda g: -g[0])
        starts += [np.array([t, p]) for _, t, p in grid[:restarts - 1]]
    best = None
    for x0 in starts:
        res = optimize.minimize(lambda x: -value(x), x0, method="Nelder-Mead",
                                bounds=[(0, math.pi), (-math.pi, 3 * math.pi)],
                                options={"xatol": xatol, "fatol": 1e-12, "maxfev": max_evals})
        if best is None or -res.fun > best[1]:
            best = (res.x, -res.fun, bool(res.success))
    x, val, ok = best
    result = FitResult(float(x[0]), float(x[1] % (2 * math.pi)), float(val), evals)
    if not ok:
        raise ConvergenceError("Nelder-Mead did not converge within the evaluation budget", best=result)
    return result


def coupler_circuit(seed: int, edge, m: int, pattern="EFGH") -> Circuit:
    """Single-coupler calibration circuit: random 1-gates with the coupler firing in every layer."""
    from .circuits import OneQubitGate, Variant, _one_qubit_choices, as_pattern

    a, b = make_edge(*edge)
    choices = {q: _one_qubit_choices(seed, q, m) for q in (a, b)}
    moments = []
    for layer in range(m + 1):
        moments.append(Moment("ones", tuple(OneQubitGate(choices[q][layer], q) for q in (a, b))))
        if layer < m:
            moments.append(Moment("twos", (FSimGate(STANDARD_THETA, STANDARD_PHI, a, b),)))
    return Circuit((a, b), m, as_pattern(pattern), Variant.FULL, tuple(moments), int(seed))
