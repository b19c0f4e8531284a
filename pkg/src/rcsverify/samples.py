"""Ordered bitstring samples."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuits import GridQubit


@dataclass(frozen=True, eq=False)
class SampleSet:
    """N measured bitstrings, stored as outcome indices.

    Bit ``i`` of a bitstring belongs to ``qubit_order[i]``; the first qubit is
    the most significant bit of the index.
    """

    n: int
    qubit_order: tuple
    indices: np.ndarray
    provenance: str = ""
    seed: int | None = field(default=None)

    def __post_init__(self):
        idx = np.ascontiguousarray(self.indices, dtype=np.int64)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "qubit_order", tuple(GridQubit(*q) for q in self.qubit_order))
        if len(self.qubit_order) != self.n:
            raise ValueError("qubit_order length does not match n")
        if idx.ndim != 1:
            raise ValueError("indices must be one-dimensional")
        if idx.size and (idx.min() < 0 or idx.max() >= 2**self.n):
            raise ValueError("outcome index out of range for n qubits")

    def __len__(self):
        return int(self.indices.size)

    def __eq__(self, other):
        return (isinstance(other, SampleSet) and self.n == other.n
                and self.qubit_order == other.qubit_order
                and np.array_equal(self.indices, other.indices))

    def bits(self) -> np.ndarray:
        """(N, n) uint8 array, column i holding qubit_order[i]."""
        shifts = np.arange(self.n - 1, -1, -1, dtype=np.int64)
        return ((self.indices[:, None] >> shifts) & 1).astype(np.uint8)

    def bitstrings(self) -> list[str]:
        return [format(int(i), f"0{self.n}b") for i in self.indices]

    @classmethod
    def from_bits(cls, bits, qubit_order, provenance="", seed=None) -> "SampleSet":
        bits = np.asarray(bits, dtype=np.int64).reshape(-1, len(qubit_order))
        weights = 1 << np.arange(len(qubit_order) - 1, -1, -1, dtype=np.int64)
        return cls(len(qubit_order), tuple(qubit_order), bits @ weights, provenance, seed)

    @classmethod
    def from_bitstrings(cls, strings, qubit_order, provenance="", seed=None) -> "SampleSet":
        idx = np.array([int(s, 2) for s in strings], dtype=np.int64)
        return cls(len(qubit_order), tuple(qubit_order), idx, provenance, seed)

    def with_indices(self, indices, provenance=None) -> "SampleSet":
        return SampleSet(self.n, self.qubit_order, indices,
                         self.provenance if provenance is None else provenance, self.seed)
