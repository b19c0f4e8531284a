"""Exact statevector simulation.

State vectors are flat ``complex128`` arrays of length ``2**n``; the first
qubit in the order is the most significant index bit. Gates are applied in
place by the numba kernels in :mod:`rcsverify._kernels`.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
import numpy as np

from . import _kernels, rng
from .circuits import Circuit, Cut, GridQubit
from .errors import CapacityError, NotFactorizableError, ValidationError
from .samples import SampleSet

MAX_QUBITS = 26

_S = 1 / math.sqrt(2)
ONE_QUBIT_MATRICES = {
    "sx": 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]]),
    "sy": 0.5 * np.array([[1 + 1j, -1 - 1j], [1 + 1j, 1 + 1j]]),
    # pi/2 rotation about (X + Y)/sqrt(2)
    "sw": np.array([[_S, -1j * _S * cmath.exp(-1j * math.pi / 4)],
                    [-1j * _S * cmath.exp(1j * math.pi / 4), _S]]),
}

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def fsim_matrix(theta: float, phi: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[1, 0, 0, 0],
                     [0, c, -1j * s, 0],
                     [0, -1j * s, c, 0],
                     [0, 0, 0, cmath.exp(-1j * phi)]], dtype=complex)


def rz_diagonal(angle: float) -> tuple[complex, complex]:
    return cmath.exp(-0.5j * angle), cmath.exp(0.5j * angle)


@dataclass(frozen=True, eq=False)
class AmplitudeTable:
    n: int
    amplitudes: np.ndarray
    qubit_order: tuple

    def __post_init__(self):
        if self.amplitudes.shape != (2**self.n,):
            raise ValueError("amplitude array must have length 2**n")


@dataclass(frozen=True, eq=False)
class Program:
    """A circuit lowered to kernel arrays.

    ``slot_op[s]`` is the op index of the s-th noisy gate (1-gates and fSim
    gates in circuit order); z-rotations are noiseless and have no slot.
    ``slot_bits[s]`` lists the bit positions that gate acts on.
    """

    n: int
    kinds: np.ndarray
    params: np.ndarray
    bits: np.ndarray
    slot_op: np.ndarray
    slot_bits: tuple

    def __len__(self):
        return int(self.kinds.size)

    def run(self, state: np.ndarray, start: int = 0, stop: int | None = None) -> np.ndarray:
        stop = len(self) if stop is None else stop
        return _kernels.run_program(state, self.kinds, self.params, self.bits, start, stop)


def compile_circuit(circuit: Circuit) -> Program:
    n = circuit.n
    pos = {q: n - 1 - i for i, q in enumerate(circuit.qubits)}
    kinds, params, bits, slot_op, slot_bits = [], [], [], [], []
    for mo in circuit.moments:
        for g in mo.gates:
            if mo.kind == "ones":
                b = (pos[g.target],)
                kinds.append(_kernels.DENSE1)
                params.append(ONE_QUBIT_MATRICES[g.kind].ravel())
            elif mo.kind == "twos":
                b = (pos[g.q_a], pos[g.q_b])
                m = fsim_matrix(g.theta, g.phi)
                kinds.append(_kernels.FSIM)
                params.append((m[1, 1], m[1, 2], m[3, 3]))
            else:
                kinds.append(_kernels.DIAG)
                params.append(rz_diagonal(g.angle))
                bits.append((pos[g.target], 0))
                continue
            slot_op.append(len(kinds) - 1)
            slot_bits.append(b)
            bits.append(b if len(b) == 2 else (b[0], 0))
    table = np.zeros((len(params), 16), dtype=np.complex128)
    for k, p in enumerate(params):
        table[k, :len(p)] = p
    return Program(
        n,
        np.array(kinds, dtype=np.int64),
        table,
        np.array(bits, dtype=np.int64).reshape(-1, 2),
        np.array(slot_op, dtype=np.int64),
        tuple(slot_bits),
    )


def _op_matrix(prog: Program, k: int) -> np.ndarray:
    p = prog.params[k]
    kind = prog.kinds[k]
    if kind == _kernels.DIAG:
        return np.diag(p[:2])
    if kind == _kernels.DENSE1:
        return p[:4].reshape(2, 2)
    if kind == _kernels.FSIM:
        c, mis, phase = p[:3]
        return np.array([[1, 0, 0, 0], [0, c, mis, 0], [0, mis, c, 0], [0, 0, 0, phase]])
    return p.reshape(4, 4)


@dataclass(frozen=True, eq=False)
class FusedProgram:
    """A program with each 2-qubit op merged with the pending 1-qubit ops on its qubits.

    Block ``b`` replaces the original ops ``blocks[b]`` (ascending). Blocks
    preserve the order of ops on every qubit, so running them in sequence
    gives the same state as the original program. 1-qubit ops left over at
    the end become one dense op per qubit.
    """

    base: Program
    kinds: np.ndarray
    params: np.ndarray
    bits: np.ndarray
    blocks: tuple
    op_block: np.ndarray
    op_index: np.ndarray

    def __len__(self):
        return int(self.kinds.size)

    def run(self, state: np.ndarray, start: int = 0, stop: int | None = None) -> np.ndarray:
        stop = len(self) if stop is None else stop
        return _kernels.run_program(state, self.kinds, self.params, self.bits, start, stop)


def fuse(prog: Program) -> FusedProgram:
    pending: dict = {}
    kinds, params, bits, blocks = [], [], [], []

    def emit(kind, matrix_or_params, b, members):
        row = np.zeros(16, dtype=np.complex128)
        flat = np.asarray(matrix_or_params).ravel()
        row[:flat.size] = flat
        kinds.append(kind)
        params.append(row)
        bits.append(b)
        blocks.append(tuple(sorted(members)))

    def product(ops):
        m = np.eye(2, dtype=complex)
        for k in ops:
            m = _op_matrix(prog, k) @ m
        return m

    for k in range(len(prog)):
        kind = prog.kinds[k]
        if kind in (_kernels.DIAG, _kernels.DENSE1):
            pending.setdefault(int(prog.bits[k, 0]), []).append(k)
            continue
        ba, bb = int(prog.bits[k, 0]), int(prog.bits[k, 1])
        pa, pb = pending.pop(ba, []), pending.pop(bb, [])
        if not pa and not pb and kind == _kernels.FSIM:
            emit(kind, prog.params[k, :3], (ba, bb), [k])
        else:
            m = _op_matrix(prog, k) @ np.kron(product(pa), product(pb))
            emit(_kernels.DENSE2, m, (ba, bb), pa + pb + [k])
    for b, ops in sorted(pending.items(), reverse=True):
        emit(_kernels.DENSE1, product(ops), (b, 0), ops)

    op_block = np.empty(len(prog), dtype=np.int64)
    op_index = np.empty(len(prog), dtype=np.int64)
    for j, members in enumerate(blocks):
        for c, k in enumerate(members):
            op_block[k] = j
            op_index[k] = c
    return FusedProgram(prog, np.array(kinds, dtype=np.int64),
                        np.array(params, dtype=np.complex128).reshape(-1, 16),
                        np.array(bits, dtype=np.int64).reshape(-1, 2), tuple(blocks), op_block, op_index)


def apply_matrix_1q(state: np.ndarray, matrix: np.ndarray, bit: int) -> np.ndarray:
    _kernels.apply_1q(state, matrix[0, 0], matrix[0, 1], matrix[1, 0], matrix[1, 1], bit)
    return state


def zero_state(n: int) -> np.ndarray:
    state = np.zeros(2**n, dtype=np.complex128)
    state[0] = 1.0
    return state


def _check_capacity(n: int, max_qubits: int | None) -> None:
    cap = MAX_QUBITS if max_qubits is None else max_qubits
    if n > cap:
        raise CapacityError(
            f"{n} qubits exceeds the simulator cap of {cap}; for patch circuits use "
            "simulate_patch_factored, or raise max_qubits if memory allows")


def simulate(circuit: Circuit, calib=None, *, max_qubits: int | None = None, fused: bool = False) -> AmplitudeTable:
    """Amplitudes of ``circuit`` (calibrated by ``calib`` if given) applied to |0...0>.

    ``fused=True`` runs the gate-fused program (see :func:`fuse`); results
    agree with the default gate-by-gate run to rounding.
    """
    _check_capacity(circuit.n, max_qubits)
    if calib is not None:
        from .calibration import apply_calibration
        circuit = apply_calibration(circuit, calib)
    prog = compile_circuit(circuit)
    state = (fuse(prog) if fused else prog).run(zero_state(circuit.n))
    return AmplitudeTable(circuit.n, state, tuple(circuit.qubits))


def probabilities(table: AmplitudeTable) -> np.ndarray:
    return np.abs(table.amplitudes) ** 2


def subindex(indices: np.ndarray, positions, n: int) -> np.ndarray:
    """Extract the bits at ``positions`` (MSB-first qubit positions) into a new index."""
    indices = np.asarray(indices, dtype=np.int64)
    out = np.zeros_like(indices)
    for p in positions:
        out = (out << 1) | ((indices >> (n - 1 - p)) & 1)
    return out


@dataclass(frozen=True, eq=False)
class FactorizedTable:
    left: AmplitudeTable
    right: AmplitudeTable
    cut: Cut
    qubit_order: tuple

    @property
    def n(self) -> int:
        return len(self.qubit_order)

    def _positions(self, side: AmplitudeTable):
        where = {q: i for i, q in enumerate(self.qubit_order)}
        return [where[q] for q in side.qubit_order]

    def probability(self, indices) -> np.ndarray:
        """Joint probability of outcome indices in ``qubit_order`` encoding."""
        indices = np.asarray(indices, dtype=np.int64)
        pl = probabilities(self.left)[subindex(indices, self._positions(self.left), self.n)]
        pr = probabilities(self.right)[subindex(indices, self._positions(self.right), self.n)]
        return pl * pr

    def joint_probabilities(self) -> np.ndarray:
        _check_capacity(self.n, None)
        return self.probability(np.arange(2**self.n, dtype=np.int64))


def simulate_patch_factored(circuit: Circuit, cut: Cut | None = None, calib=None) -> FactorizedTable:
    """Simulate the two sides of a cut independently.

    Each side keeps the circuit's qubit order restricted to that side.
    """
    from .circuits import default_cut, restrict
    cut = cut or default_cut(circuit.qubits)
    if calib is not None:
        from .calibration import apply_calibration
        circuit = apply_calibration(circuit, calib)
    if set(cut.left) | set(cut.right) != set(circuit.qubits) or cut.left & cut.right:
        raise ValidationError("cut is not a partition of the circuit's qubits")
    for i, g in circuit.two_qubit_gates():
        if cut.crosses(g):
            raise NotFactorizableError(f"moment {i}: fSim on {g.q_a}, {g.q_b} crosses the cut")
    sides = []
    for part in (cut.left, cut.right):
        sub = restrict(circuit, part)
        sides.append(simulate(sub))
    return FactorizedTable(sides[0], sides[1], cut, tuple(circuit.qubits))


def sample_from_cdf(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(cdf, u * cdf[-1], side="right")
    return np.minimum(idx, cdf.size - 1).astype(np.int64)


def exact_sample(probs: np.ndarray, N: int, seed: int, qubit_order=None) -> SampleSet:
    """N i.i.d. draws from ``probs`` by inverse-CDF sampling."""
    probs = np.asarray(probs, dtype=float)
    n = int(round(math.log2(probs.size)))
    if abs(probs.sum() - 1.0) > 1e-8 or (probs < 0).any():
        raise ValidationError(f"probabilities not normalized (sum={probs.sum():.12g})")
    order = tuple(qubit_order) if qubit_order is not None else tuple(GridQubit(0, i) for i in range(n))
    u = rng.stream(seed, "exact-sample").random(N)
    return SampleSet(n, order, sample_from_cdf(np.cumsum(probs), u), "exact", seed)


_kernels.warm_up()
