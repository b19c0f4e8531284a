"""Circuit data model and seeded generation of grid random circuits.

A circuit alternates layers of random single-qubit gates with layers of
fSim gates. Which couplers fire in a given two-qubit layer is set by the
pattern (``EFGH`` or ``ABCDCDAB``), a periodic schedule over four coupler
classes of the grid.

Qubit order is significant everywhere: the first qubit of ``Circuit.qubits``
is the most significant bit of an outcome index.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from . import rng
from .errors import CapacityError, InvalidCutError, ValidationError

STANDARD_THETA = math.pi / 2
STANDARD_PHI = math.pi / 6

ONE_QUBIT_KINDS = ("sx", "sy", "sw")


class GridQubit(NamedTuple):
    row: int
    col: int

    def __str__(self):
        return f"({self.row}, {self.col})"


Edge = tuple  # (GridQubit, GridQubit) with the smaller qubit first


def make_edge(a: GridQubit, b: GridQubit) -> Edge:
    a, b = GridQubit(*a), GridQubit(*b)
    return (a, b) if a < b else (b, a)


def adjacent(a: GridQubit, b: GridQubit) -> bool:
    return abs(a.row - b.row) + abs(a.col - b.col) == 1


class OneQubitGate(NamedTuple):
    kind: str
    target: GridQubit


class FSimGate(NamedTuple):
    theta: float
    phi: float
    q_a: GridQubit
    q_b: GridQubit

    @property
    def edge(self) -> Edge:
        return make_edge(self.q_a, self.q_b)


class RzGate(NamedTuple):
    angle: float
    target: GridQubit


class Variant(str, enum.Enum):
    FULL = "full"
    ELIDED = "elided"
    PATCH = "patch"


@dataclass(frozen=True)
class Moment:
    """One layer of gates acting on pairwise disjoint qubits.

    ``kind`` is ``"ones"`` (random single-qubit gates), ``"twos"`` (fSim
    gates) or ``"rz"`` (z-rotations inserted by calibration).
    """

    kind: str
    gates: tuple

    def qubits(self) -> list[GridQubit]:
        if self.kind == "twos":
            return [q for g in self.gates for q in (g.q_a, g.q_b)]
        return [g.target for g in self.gates]


@dataclass(frozen=True)
class Grid:
    """Rectangular qubit grid with optional dead sites.

    Qubits are handed out in a compact order: the k x k corner square grows
    one shell at a time (down the new column, then back along the new row),
    and once the row count is exhausted whole columns are appended. Every
    prefix of this order is a connected, nearly square region.
    """

    rows: int = 6
    cols: int = 9
    dead: tuple = (GridQubit(5, 8),)

    @property
    def capacity(self) -> int:
        return self.rows * self.cols - len(self.dead)

    def ordered_qubits(self) -> list[GridQubit]:
        order = []
        for s in range(max(self.rows, self.cols)):
            order.extend(GridQubit(r, s) for r in range(min(s, self.rows - 1) + 1) if s < self.cols)
            if s < self.rows:
                order.extend(GridQubit(s, c) for c in range(min(s, self.cols) - 1, -1, -1))
        dead = set(map(tuple, self.dead))
        return [q for q in order if tuple(q) not in dead]

    def edges(self) -> list[Edge]:
        alive = set(self.ordered_qubits())
        out = []
        for r in range(self.rows):
            for c in range(self.cols):
                q = GridQubit(r, c)
                for nb in (GridQubit(r, c + 1), GridQubit(r + 1, c)):
                    if q in alive and nb in alive:
                        out.append(make_edge(q, nb))
        return out


DEFAULT_GRID = Grid()


def _coupler_class(edge: Edge) -> str:
    a, b = edge
    if a.row == b.row:
        return "h0" if a.col % 2 == 0 else "h1"
    return "v0" if a.row % 2 == 0 else "v1"


_CLASS_ASSIGNMENT = {
    "EFGH": {"E": "v0", "F": "v1", "G": "h0", "H": "h1"},
    "ABCDCDAB": {"A": "h0", "B": "v0", "C": "h1", "D": "v1"},
}
_CYCLES = {"EFGH": "EFGH", "ABCDCDAB": "ABCDCDAB"}


@dataclass(frozen=True)
class Pattern:
    name: str
    coupler_classes: dict = field(compare=False)

    @classmethod
    def build(cls, name: str, grid: Grid = DEFAULT_GRID) -> "Pattern":
        name = name.upper()
        if name not in _CLASS_ASSIGNMENT:
            raise ValidationError(f"unknown pattern {name!r}; expected EFGH or ABCDCDAB")
        by_class: dict[str, list] = {}
        for e in grid.edges():
            by_class.setdefault(_coupler_class(e), []).append(e)
        classes = {label: frozenset(by_class.get(cls_, ()))
                   for label, cls_ in _CLASS_ASSIGNMENT[name].items()}
        return cls(name, classes)

    @property
    def cycle(self) -> str:
        return _CYCLES[self.name]


def as_pattern(pattern, grid: Grid = DEFAULT_GRID) -> Pattern:
    return pattern if isinstance(pattern, Pattern) else Pattern.build(str(pattern), grid)


def layer_sequence(pattern, m: int) -> list[str]:
    """Labels of the first ``m`` two-qubit layers of the periodic schedule."""
    if m < 0:
        raise ValidationError("depth must be non-negative")
    cycle = as_pattern(pattern).cycle if not isinstance(pattern, str) else _CYCLES[pattern.upper()]
    return [cycle[i % len(cycle)] for i in range(m)]


@dataclass(frozen=True)
class Circuit:
    qubits: tuple
    depth: int
    pattern: Pattern
    variant: Variant
    moments: tuple
    seed: int

    @property
    def n(self) -> int:
        return len(self.qubits)

    def one_qubit_gates(self) -> list[tuple[int, OneQubitGate]]:
        return [(i, g) for i, mo in enumerate(self.moments) if mo.kind == "ones" for g in mo.gates]

    def two_qubit_gates(self) -> list[tuple[int, FSimGate]]:
        return [(i, g) for i, mo in enumerate(self.moments) if mo.kind == "twos" for g in mo.gates]

    def gate_counts(self) -> tuple[int, int]:
        """(number of 1-gates, number of 2-gates)."""
        return len(self.one_qubit_gates()), len(self.two_qubit_gates())

    def edges_used(self) -> list[Edge]:
        seen = {}
        for _, g in self.two_qubit_gates():
            seen.setdefault(g.edge, None)
        return list(seen)

    def replace(self, **changes) -> "Circuit":
        fields = dict(qubits=self.qubits, depth=self.depth, pattern=self.pattern,
                      variant=self.variant, moments=self.moments, seed=self.seed)
        fields.update(changes)
        return Circuit(**fields)

    def validate(self) -> "Circuit":
        """Check structural invariants; raise ValidationError naming the moment."""
        qset = set(self.qubits)
        if len(qset) != len(self.qubits):
            raise ValidationError("duplicate qubit in qubit list")
        for i, mo in enumerate(self.moments):
            if mo.kind not in ("ones", "twos", "rz"):
                raise ValidationError(f"moment {i}: unknown kind {mo.kind!r}")
            touched = mo.qubits()
            if len(set(touched)) != len(touched):
                raise ValidationError(f"moment {i}: a qubit is acted on twice")
            missing = set(touched) - qset
            if missing:
                raise ValidationError(f"moment {i}: gate on unknown qubit {sorted(missing)[0]}")
            for g in mo.gates:
                if mo.kind == "ones" and g.kind not in ONE_QUBIT_KINDS:
                    raise ValidationError(f"moment {i}: unknown 1-gate kind {g.kind!r}")
                if mo.kind == "twos":
                    if not adjacent(g.q_a, g.q_b):
                        raise ValidationError(f"moment {i}: fSim on non-adjacent qubits {g.q_a}, {g.q_b}")
                    if not (math.isfinite(g.theta) and math.isfinite(g.phi)):
                        raise ValidationError(f"moment {i}: non-finite fSim angle")
                if mo.kind == "rz" and not math.isfinite(g.angle):
                    raise ValidationError(f"moment {i}: non-finite rotation angle")
        return self


def _one_qubit_choices(seed: int, q: GridQubit, m: int) -> list[str]:
    # never the same generator twice in a row on one qubit
    kinds = []
    for layer in range(m + 1):
        r = rng.stream(seed, "one-qubit-gate", layer, q.row, q.col)
        if layer == 0:
            kinds.append(ONE_QUBIT_KINDS[int(r.integers(3))])
        else:
            options = [k for k in ONE_QUBIT_KINDS if k != kinds[-1]]
            kinds.append(options[int(r.integers(2))])
    return kinds


def generate_random_circuit(seed: int, n: int, m: int, pattern="EFGH",
                            grid: Grid = DEFAULT_GRID) -> Circuit:
    """Full-variant random circuit on the first ``n`` qubits of ``grid``.

    The 1-gate at (layer, qubit) depends only on ``seed``, the layer index
    and the qubit's grid position, so circuits on fewer qubits or of smaller
    depth reuse exactly the same 1-gates.
    """
    if n < 1 or n > grid.capacity:
        raise CapacityError(f"n={n} outside 1..{grid.capacity} for a {grid.rows}x{grid.cols} grid")
    if m < 0:
        raise ValidationError("depth must be non-negative")
    pattern = as_pattern(pattern, grid)
    qubits = tuple(grid.ordered_qubits()[:n])
    qset = set(qubits)
    choices = {q: _one_qubit_choices(seed, q, m) for q in qubits}

    moments = []
    labels = layer_sequence(pattern, m)
    for layer in range(m + 1):
        moments.append(Moment("ones", tuple(OneQubitGate(choices[q][layer], q) for q in qubits)))
        if layer < m:
            edges = sorted(e for e in pattern.coupler_classes[labels[layer]]
                           if e[0] in qset and e[1] in qset)
            moments.append(Moment("twos", tuple(FSimGate(STANDARD_THETA, STANDARD_PHI, a, b)
                                                for a, b in edges)))
    return Circuit(qubits, m, pattern, Variant.FULL, tuple(moments), int(seed))


@dataclass(frozen=True)
class Cut:
    left: frozenset
    right: frozenset

    def crosses(self, gate: FSimGate) -> bool:
        return (gate.q_a in self.left) != (gate.q_b in self.left)


def default_cut(qubits: Sequence[GridQubit]) -> Cut:
    """Vertical cut splitting ``qubits`` into the most nearly equal halves."""
    qubits = [GridQubit(*q) for q in qubits]
    best = None
    for t in sorted({q.col for q in qubits})[1:]:
        left = frozenset(q for q in qubits if q.col < t)
        score = abs(2 * len(left) - len(qubits))
        if best is None or score < best[0]:
            best = (score, left)
    if best is None:
        raise InvalidCutError("all qubits lie in one column; no vertical cut exists")
    left = best[1]
    return Cut(left, frozenset(qubits) - left)


def _check_cut(circuit: Circuit, cut: Cut) -> None:
    allq = set(circuit.qubits)
    if not cut.left or not cut.right:
        raise InvalidCutError("both sides of the cut must be nonempty")
    if cut.left & cut.right:
        raise InvalidCutError("cut sides overlap")
    if set(cut.left) | set(cut.right) != allq:
        raise InvalidCutError("cut does not cover exactly the circuit's qubits")


def _require_full(circuit: Circuit) -> None:
    if circuit.variant != Variant.FULL:
        raise ValidationError(f"expected a full circuit, got {circuit.variant.value}")


def cross_cut_gates(circuit: Circuit, cut: Cut) -> list[tuple[int, FSimGate]]:
    return [(i, g) for i, g in circuit.two_qubit_gates() if cut.crosses(g)]


def _drop_gates(circuit: Circuit, drop: set, variant: Variant) -> Circuit:
    moments = []
    for i, mo in enumerate(circuit.moments):
        if mo.kind == "twos":
            mo = Moment("twos", tuple(g for g in mo.gates if (i, g.edge) not in drop))
        moments.append(mo)
    return circuit.replace(moments=tuple(moments), variant=variant)


def derive_patch(circuit: Circuit, cut: Cut | None = None) -> Circuit:
    """Remove every fSim gate joining the two sides of ``cut``."""
    _require_full(circuit)
    cut = cut or default_cut(circuit.qubits)
    _check_cut(circuit, cut)
    drop = {(i, g.edge) for i, g in cross_cut_gates(circuit, cut)}
    return _drop_gates(circuit, drop, Variant.PATCH)


def derive_elided(circuit: Circuit, cut: Cut | None = None, keep_fraction: float = 0.5,
                  seed: int = 0) -> Circuit:
    """Remove a seeded subset of cross-cut gates, keeping ceil(keep_fraction * count)."""
    _require_full(circuit)
    if not 0.0 <= keep_fraction <= 1.0:
        raise ValidationError(f"keep_fraction {keep_fraction} outside [0, 1]")
    cut = cut or default_cut(circuit.qubits)
    _check_cut(circuit, cut)
    crossing = [(i, g.edge) for i, g in cross_cut_gates(circuit, cut)]
    keep = math.ceil(keep_fraction * len(crossing))
    order = rng.stream(seed, "elide").permutation(len(crossing))
    drop = {crossing[j] for j in order[keep:]}
    return _drop_gates(circuit, drop, Variant.ELIDED)


def interaction_components(circuit: Circuit) -> list[frozenset]:
    """Connected components of the graph whose edges are the circuit's fSim gates."""
    parent = {q: q for q in circuit.qubits}

    def find(q):
        while parent[q] != q:
            parent[q] = parent[parent[q]]
            q = parent[q]
        return q

    for _, g in circuit.two_qubit_gates():
        parent[find(g.q_a)] = find(g.q_b)
    groups: dict = {}
    for q in circuit.qubits:
        groups.setdefault(find(q), set()).add(q)
    return [frozenset(s) for s in groups.values()]


def restrict(circuit: Circuit, qubits: Iterable[GridQubit]) -> Circuit:
    """Sub-circuit on ``qubits``; raises if a kept gate touches a dropped qubit."""
    keep = [q for q in circuit.qubits if q in set(qubits)]
    kset = set(keep)
    moments = []
    for i, mo in enumerate(circuit.moments):
        gates = []
        for g in mo.gates:
            touched = {g.q_a, g.q_b} if mo.kind == "twos" else {g.target}
            if touched <= kset:
                gates.append(g)
            elif touched & kset:
                raise ValidationError(f"moment {i}: gate crosses the restriction boundary")
        moments.append(Moment(mo.kind, tuple(gates)))
    return circuit.replace(qubits=tuple(keep), moments=tuple(moments))
