"""Noisy sampling: the white-noise mixture, readout flips and Pauli trajectories.

Trajectory sampling
-------------------
Every noisy gate (1-gate or fSim) independently errs with its own
probability; an erring gate is followed by a uniformly random non-identity
Pauli on its support. One bitstring is drawn per trajectory and readout
flips are applied afterwards.

Trajectories are drawn in fixed blocks of ``BLOCK`` with one random stream
per block, so results do not depend on how the work is scheduled. All
error-free trajectories share the ideal final state; the remaining error
configurations are organised in a trie and simulated depth first, each
branch resuming from the state where it diverges from its parent.

The walk runs on the fused program (each fSim merged with the pending
1-qubit ops on its qubits). A branch whose error falls inside a fused
block replays that one block op by op with the Pauli inserted, then
continues on fused blocks. Events are therefore ordered by (block,
position in block) rather than by circuit position; the two orders differ
only for operations on disjoint qubits, which commute.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .calibration import CalibrationMap, apply_calibration
from .circuits import Circuit
from .errors import ValidationError
from .samples import SampleSet
from .simulator import (PAULI, FusedProgram, _check_capacity, apply_matrix_1q, compile_circuit,
                        fuse, sample_from_cdf, zero_state)

BLOCK = 4096
_PAULI_1Q = ("X", "Y", "Z")
# non-identity two-qubit Paulis as (first, second) labels
_PAULI_2Q = tuple((a, b) for a in "IXYZ" for b in "IXYZ" if (a, b) != ("I", "I"))


@dataclass(frozen=True)
class ComponentErrorRates:
    """Per-component error probabilities.

    ``e1`` and ``e2`` are keyed by gate occurrence ``(moment index, qubit)``
    and ``(moment index, edge)``; ``eq`` maps a qubit to its readout pair
    ``(p01, p10)``.
    """

    e1: dict = field(default_factory=dict)
    e2: dict = field(default_factory=dict)
    eq: dict = field(default_factory=dict)

    def __post_init__(self):
        for table in (self.e1, self.e2):
            for k, v in table.items():
                if not 0.0 <= v <= 1.0:
                    raise ValidationError(f"error rate {v} for {k} outside [0, 1]")
        for q, pair in self.eq.items():
            if len(pair) != 2 or not all(0.0 <= p <= 1.0 for p in pair):
                raise ValidationError(f"readout rates {pair} for {q} outside [0, 1]")


def uniform_rates(circuit: Circuit, e1: float, e2: float, eq) -> ComponentErrorRates:
    """Same rate for every 1-gate, every 2-gate and every qubit.

    ``eq`` is either a symmetric rate or a ``(p01, p10)`` pair.
    """
    pair = (float(eq), float(eq)) if np.isscalar(eq) else tuple(map(float, eq))
    return ComponentErrorRates(
        {(i, g.target): float(e1) for i, g in circuit.one_qubit_gates()},
        {(i, g.edge): float(e2) for i, g in circuit.two_qubit_gates()},
        {q: pair for q in circuit.qubits},
    )


def _check_probs(probs: np.ndarray) -> int:
    n = int(round(math.log2(probs.size)))
    if 2**n != probs.size:
        raise ValidationError("probability array length is not a power of two")
    if abs(probs.sum() - 1.0) > 1e-8 or (probs < 0).any():
        raise ValidationError(f"probabilities not normalized (sum={probs.sum():.12g})")
    return n


def sample_noise_model(probs, phi: float, N: int, seed: int, qubit_order=None) -> SampleSet:
    """Draw from phi * P + (1 - phi) * uniform, one mixture coin per sample."""
    if not 0.0 <= phi <= 1.0:
        raise ValidationError(f"fidelity {phi} outside [0, 1]")
    probs = np.asarray(probs, dtype=float)
    n = _check_probs(probs)
    r = rng.stream(seed, "mixture")
    from_ideal = r.random(N) < phi
    u = r.random(N)
    out = r.integers(0, 2**n, size=N, dtype=np.int64)
    out[from_ideal] = sample_from_cdf(np.cumsum(probs), u[from_ideal])
    order = qubit_order if qubit_order is not None else [(0, i) for i in range(n)]
    return SampleSet(n, tuple(order), out, f"mixture phi={phi!r}", seed)


def _flip(indices: np.ndarray, u: np.ndarray, p01: np.ndarray, p10: np.ndarray, n: int) -> np.ndarray:
    """Flip bit i (column i, MSB first) where u[:, i] falls below the applicable rate."""
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    bits = (indices[:, None] >> shifts) & 1
    rate = np.where(bits == 1, p10[None, :], p01[None, :])
    flips = (u < rate).astype(np.int64)
    return indices ^ (flips << shifts).sum(axis=1)


def _readout_arrays(eq, qubit_order):
    p01 = np.empty(len(qubit_order))
    p10 = np.empty(len(qubit_order))
    for i, q in enumerate(qubit_order):
        pair = eq[q] if not np.isscalar(eq) else (eq, eq)
        if np.isscalar(pair):
            pair = (pair, pair)
        if not all(0.0 <= p <= 1.0 for p in pair):
            raise ValidationError(f"readout rates {pair} for {q} outside [0, 1]")
        p01[i], p10[i] = pair
    return p01, p10


def apply_readout_errors(samples: SampleSet, eq, seed: int) -> SampleSet:
    """Flip each bit independently: 0 -> 1 with p01, 1 -> 0 with p10.

    ``eq`` maps qubit -> (p01, p10) or symmetric rate; a bare number applies
    to every qubit.
    """
    p01, p10 = _readout_arrays(eq, samples.qubit_order)
    u = rng.stream(seed, "readout").random((len(samples), samples.n))
    out = _flip(samples.indices, u, p01, p10, samples.n)
    return samples.with_indices(out, provenance=f"{samples.provenance}+readout".lstrip("+"))


def _slot_rates(circuit: Circuit, rates: ComponentErrorRates) -> np.ndarray:
    # keyed on the uncalibrated circuit; calibration inserts rz layers but keeps gate order
    out = []
    for mo_idx, mo in enumerate(circuit.moments):
        if mo.kind == "ones":
            for g in mo.gates:
                out.append(rates.e1.get((mo_idx, g.target), None))
        elif mo.kind == "twos":
            for g in mo.gates:
                out.append(rates.e2.get((mo_idx, g.edge), None))
    if any(r is None for r in out):
        from .errors import CoverageError
        raise CoverageError("error rates do not cover every gate occurrence")
    return np.array(out, dtype=float)


def _draw_block(r: np.random.Generator, size: int, slot_rates: np.ndarray, slot_arity: np.ndarray, n: int):
    """Error events, sampling uniforms and readout uniforms for one block.

    An event is (trajectory, slot, pauli index). The pauli index reuses the
    uniform that triggered the error: given u < e, u / e is uniform.
    """
    u = r.random((size, slot_rates.size))
    hit = u < slot_rates[None, :]
    t_idx, s_idx = np.nonzero(hit)
    choices = np.where(slot_arity[s_idx] == 1, 3, 15)
    with np.errstate(divide="ignore", invalid="ignore"):
        pauli = np.minimum((u[t_idx, s_idx] / slot_rates[s_idx] * choices).astype(np.int64), choices - 1)
    u_sample = r.random(size)
    u_readout = r.random((size, n))
    return t_idx, s_idx, pauli, u_sample, u_readout


def _trajectory_blocks(N: int, seed: int, slot_rates, slot_arity, n):
    for b, start in enumerate(range(0, N, BLOCK)):
        size = min(BLOCK, N - start)
        yield start, _draw_block(rng.stream(seed, "trajectory", b), size, slot_rates, slot_arity, n)


def trajectory_error_counts(circuit: Circuit, rates: ComponentErrorRates, N: int, seed: int,
                            calib: CalibrationMap | None = None):
    """(gate error events, readout flips) per trajectory, as drawn by pauli_trajectory_sample.

    Readout flips are counted against the bits the trajectory actually
    reports, so this needs no state simulation only when every qubit has
    symmetric readout rates; otherwise it falls back to full sampling.
    """
    c = apply_calibration(circuit, calib) if calib is not None else circuit
    slot_rates = _slot_rates(circuit, rates)
    prog = compile_circuit(c)
    arity = np.array([len(b) for b in prog.slot_bits])
    p01, p10 = _readout_arrays(rates.eq, c.qubits)
    if not np.allclose(p01, p10):
        raise ValidationError("error counting without simulation needs symmetric readout rates")
    gate_errors = np.zeros(N, dtype=np.int64)
    flips = np.zeros(N, dtype=np.int64)
    for start, (t_idx, _, _, _, u_ro) in _trajectory_blocks(N, seed, slot_rates, arity, c.n):
        np.add.at(gate_errors, start + t_idx, 1)
        flips[start:start + len(u_ro)] = (u_ro < p01[None, :]).sum(axis=1)
    return gate_errors, flips


def pauli_trajectory_sample(circuit: Circuit, calib: CalibrationMap | None, rates: ComponentErrorRates,
                            N: int, seed: int, *, max_qubits: int | None = None) -> SampleSet:
    """One bitstring per Monte Carlo trajectory of the independent Pauli error model."""
    _check_capacity(circuit.n, max_qubits)
    c = apply_calibration(circuit, calib) if calib is not None else circuit
    n = c.n
    slot_rates = _slot_rates(circuit, rates)
    prog = compile_circuit(c)
    arity = np.array([len(b) for b in prog.slot_bits])
    p01, p10 = _readout_arrays(rates.eq, c.qubits)

    u_sample = np.empty(N)
    u_readout = np.empty((N, n))
    configs: dict = {}
    for start, (t_idx, s_idx, pauli, us, ur) in _trajectory_blocks(N, seed, slot_rates, arity, n):
        u_sample[start:start + us.size] = us
        u_readout[start:start + us.size] = ur
        # np.nonzero on a row-major mask yields events grouped by trajectory, slots ascending
        if t_idx.size:
            cuts = np.flatnonzero(np.diff(t_idx)) + 1
            for ts, ss, ps in zip(np.split(t_idx, cuts), np.split(s_idx, cuts), np.split(pauli, cuts)):
                key = tuple(zip(ss.tolist(), ps.tolist()))
                configs.setdefault(key, []).append(start + int(ts[0]))

    fprog = fuse(prog)
    clean = np.ones(N, dtype=bool)
    root = _TrieNode()
    for key, ids in configs.items():
        clean[ids] = False
        node = root
        for ev in sorted(_event_key(fprog, slot, pauli) for slot, pauli in key):
            node = node.children.setdefault(ev, _TrieNode())
        node.terminal.extend(ids)
    root.terminal = np.flatnonzero(clean).tolist()

    out = np.empty(N, dtype=np.int64)

    def finish(state, ids):
        cdf = np.cumsum(np.abs(state) ** 2)
        out[ids] = sample_from_cdf(cdf, u_sample[ids])

    _walk(fprog, zero_state(n), 0, root, finish)
    out = _flip(out, u_readout, p01, p10, n)
    return SampleSet(n, tuple(c.qubits), out, "pauli-trajectory", seed)


def _event_key(fprog: FusedProgram, slot: int, pauli: int) -> tuple:
    op = int(fprog.base.slot_op[slot])
    return int(fprog.op_block[op]), int(fprog.op_index[op]), slot, pauli


class _TrieNode:
    __slots__ = ("children", "terminal")

    def __init__(self):
        self.children: dict = {}
        self.terminal: list = []


def _apply_pauli(state: np.ndarray, bits: tuple, index: int) -> None:
    labels = (_PAULI_1Q[index],) if len(bits) == 1 else _PAULI_2Q[index]
    for label, bit in zip(labels, bits):
        if label != "I":
            apply_matrix_1q(state, PAULI[label], bit)


def _walk(fprog: FusedProgram, state: np.ndarray, block: int, node: _TrieNode, finish,
          children=None) -> None:
    """Advance ``state`` (owned by this call) from fused block ``block`` to the end.

    ``children`` defaults to all of ``node``'s children; it is narrowed when
    resuming after a partially replayed block.
    """
    items = sorted(node.children.items()) if children is None else children
    for (j, idx, slot, pauli), child in items:
        fprog.run(state, block, j)
        block = j
        branch = state.copy()
        _replay(fprog, branch, j, 0, idx)
        _apply_pauli(branch, fprog.base.slot_bits[slot], pauli)
        _walk_in_block(fprog, branch, j, idx + 1, child, finish)
    fprog.run(state, block, len(fprog))
    if node.terminal:
        finish(state, np.asarray(node.terminal, dtype=np.int64))


def _replay(fprog: FusedProgram, state: np.ndarray, block: int, first: int, last: int) -> None:
    """Apply original ops ``first..last`` (inclusive) of a fused block one at a time."""
    for k in fprog.blocks[block][first:last + 1]:
        fprog.base.run(state, k, k + 1)


def _walk_in_block(fprog: FusedProgram, state: np.ndarray, block: int, pos: int, node: _TrieNode,
                   finish) -> None:
    """Like _walk, but ``state`` has only the first ``pos`` ops of ``block`` applied."""
    later = []
    for key, child in sorted(node.children.items()):
        j, idx, slot, pauli = key
        if j != block:
            later.append((key, child))
            continue
        _replay(fprog, state, block, pos, idx)
        pos = idx + 1
        branch = state.copy()
        _apply_pauli(branch, fprog.base.slot_bits[slot], pauli)
        _walk_in_block(fprog, branch, block, pos, child, finish)
    _replay(fprog, state, block, pos, len(fprog.blocks[block]) - 1)
    _walk(fprog, state, block + 1, node, finish, later)
