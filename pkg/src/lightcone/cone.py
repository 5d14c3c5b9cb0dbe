"""Gate dependency DAG, past causal cones and reduced circuits.

The cone of an observable is found by walking the circuit backwards in the
Heisenberg picture. We track a set of Pauli strings that over-approximates
the support of the evolved observable. A gate unit whose unitary commutes
with every tracked string cannot influence the expectation value and is
dropped; otherwise its gates join the cone and each string is replaced by
the Pauli components of its conjugated local part.

Units are single gates, except that a CNOT, one single-qubit gate on either
of its wires and an identical CNOT that are adjacent on both wires form one
unit (a ZZ/XX-type rotation block). Without this a ZZ block would never
commute with a Z-type string even though its product does.

Parametric angles (symbolic or literal) are evaluated at generic values, so
the cone is a structural property valid for every parameter setting.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .circuit import Circuit, CircuitError, Gate, GateKind
from .pauli import Hamiltonian, PauliTerm, pauli_matrix

Node = Union[int, tuple]

# switch from exact string sets to per-wire letter boxes above this size
STRING_SET_CAP = 4096

_LETTER = "IXYZ"
# (x bit, z bit) for I, X, Y, Z
_BITS = ((0, 0), (1, 0), (1, 1), (0, 1))
_GENERIC = ((0.618, 0.2), (1.2345, 0.37))


# ------------------------------------------------------------------------ DAG


@dataclass(frozen=True)
class CircuitDag:
    """Gate nodes ``0..G-1`` plus boundary nodes ``("in", q)`` and ``("out", q)``.

    An edge ``(u, v, q)`` means gate ``v`` consumes wire ``q`` last touched by ``u``.
    """

    circuit: Circuit
    edges: tuple[tuple[Node, Node, int], ...]
    _next: Mapping[tuple[Node, int], Node] = field(repr=False)
    _prev: Mapping[tuple[Node, int], Node] = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.circuit.gates)

    def next_on_wire(self, node: Node, qubit: int) -> Node:
        return self._next[(node, qubit)]

    def prev_on_wire(self, node: Node, qubit: int) -> Node:
        return self._prev[(node, qubit)]

    def predecessors(self, node: Node) -> list[Node]:
        return [u for u, v, _ in self.edges if v == node]

    def successors(self, node: Node) -> list[Node]:
        return [v for u, v, _ in self.edges if u == node]

    def wire_path(self, qubit: int) -> list[Node]:
        path: list[Node] = [("in", qubit)]
        while path[-1] != ("out", qubit):
            path.append(self._next[(path[-1], qubit)])
        return path


def build_dag(circuit: Circuit) -> CircuitDag:
    last: dict[int, Node] = {q: ("in", q) for q in range(circuit.n_qubits)}
    edges: list[tuple[Node, Node, int]] = []
    nxt: dict[tuple[Node, int], Node] = {}
    prv: dict[tuple[Node, int], Node] = {}

    def link(u: Node, v: Node, q: int) -> None:
        edges.append((u, v, q))
        nxt[(u, q)] = v
        prv[(v, q)] = u

    for i, gate in enumerate(circuit.gates):
        for q in gate.qubits:
            link(last[q], i, q)
            last[q] = i
    for q in range(circuit.n_qubits):
        link(last[q], ("out", q), q)
    return CircuitDag(circuit, tuple(edges), nxt, prv)


# ---------------------------------------------------------------------- units


def _gate_units(dag: CircuitDag) -> list[tuple[int, ...]]:
    """Partition gate indices into units, sorted by their last gate index."""
    gates = dag.circuit.gates
    claimed: set[int] = set()
    units: list[tuple[int, ...]] = []
    for i, g in enumerate(gates):
        if i in claimed:
            continue
        unit: tuple[int, ...] = (i,)
        if g.kind is GateKind.CNOT:
            c, t = g.qubits
            nc, nt = dag.next_on_wire(i, c), dag.next_on_wire(i, t)

            def closing(node: Node) -> bool:
                return isinstance(node, int) and gates[node].kind is GateKind.CNOT and gates[node].qubits == (c, t)

            if nc == nt and closing(nc):
                unit = (i, nc)
            else:
                for wire, mid, other in ((c, nc, nt), (t, nt, nc)):
                    if isinstance(mid, int) and len(gates[mid].qubits) == 1 and mid not in claimed:
                        if dag.next_on_wire(mid, wire) == other and closing(other):
                            unit = (i, mid, other)
                            break
        claimed.update(unit)
        units.append(unit)
    units.sort(key=lambda u: u[-1])
    return units


def _unit_signature(gates: Sequence[Gate]) -> tuple[tuple[int, ...], tuple]:
    wires = tuple(sorted({q for g in gates for q in g.qubits}))
    pos = {q: j for j, q in enumerate(wires)}
    sig = tuple((g.kind.value, tuple(pos[q] for q in g.qubits), g.angle is not None) for g in gates)
    return wires, sig


@lru_cache(maxsize=None)
def _unit_unitaries(sig: tuple) -> tuple[np.ndarray, ...]:
    from .simulator import circuit_unitary

    k = 1 + max(max(qs) for _, qs, _ in sig)
    out = []
    for base, step in _GENERIC:
        gates = tuple(
            Gate(GateKind(kind), qs, (base + step * j) if has_angle else None)
            for j, (kind, qs, has_angle) in enumerate(sig)
        )
        out.append(circuit_unitary(Circuit(k, gates)))
    return tuple(out)


@lru_cache(maxsize=None)
def _conjugate(sig: tuple, local: tuple[int, ...]) -> tuple[bool, frozenset]:
    """(commutes, image codes) for the local Pauli ``local`` under the unit ``sig``."""
    k = len(local)
    label = tuple((j, _LETTER[c]) for j, c in enumerate(local) if c)
    p = pauli_matrix(PauliTerm(1.0, label), k)
    commutes = True
    images: set[tuple[int, ...]] = set()
    for u in _unit_unitaries(sig):
        heis = u.conj().T @ p @ u
        commutes &= bool(np.allclose(heis, p, atol=1e-9))
        for codes in itertools.product(range(4), repeat=k):
            qlabel = tuple((j, _LETTER[c]) for j, c in enumerate(codes) if c)
            coef = np.trace(pauli_matrix(PauliTerm(1.0, qlabel), k) @ heis) / (1 << k)
            if abs(coef) > 1e-9:
                images.add(codes)
    return commutes, frozenset(images)


# ------------------------------------------------------------- string sets


def _local_code(x: int, z: int, q: int) -> int:
    xb, zb = (x >> q) & 1, (z >> q) & 1
    return _BITS.index((xb, zb))


def _start_strings(support: Sequence[int], letters: Mapping[int, str] | None) -> list[list[int]]:
    """Per-wire allowed letter codes for the initial operator."""
    choices = []
    for q in support:
        if letters is None:
            choices.append([0, 1, 2, 3])
        elif letters[q] == "Z":
            choices.append([3])
        else:
            # X and Y share a cone so XX and YY terms map onto one circuit
            choices.append([1, 2])
    return choices


def _strings_from_box(wires: Sequence[int], choices: Sequence[Sequence[int]]) -> set[tuple[int, int]]:
    out = set()
    for combo in itertools.product(*choices):
        x = z = 0
        for q, c in zip(wires, combo):
            xb, zb = _BITS[c]
            x |= xb << q
            z |= zb << q
        out.add((x, z))
    return out


def _box_from_strings(strings: Iterable[tuple[int, int]], n: int) -> list[set[int]]:
    box = [{0} for _ in range(n)]
    for x, z in strings:
        for q in range(n):
            box[q].add(_local_code(x, z, q))
    return box


def past_causal_cone(
    dag: CircuitDag, support: Iterable[int], letters: Mapping[int, str] | None = None
) -> frozenset[int]:
    """Gate indices that can influence an observable supported on ``support``.

    With ``letters`` (qubit -> Pauli letter) the observable is that Pauli
    string, with X and Y treated alike. Without it, any operator on the
    support is assumed.
    """
    circuit = dag.circuit
    n = circuit.n_qubits
    wires = sorted(set(support))
    for q in wires:
        if not 0 <= q < n:
            raise CircuitError(f"support qubit {q} outside circuit of {n} qubits")
    if letters is not None and set(letters) != set(wires):
        raise CircuitError("letters must cover exactly the support")
    choices = _start_strings(wires, letters)
    size = 1
    for c in choices:
        size *= len(c)
    strings: set[tuple[int, int]] | None = None
    box: list[set[int]] | None = None
    if size > STRING_SET_CAP:
        box = [{0} for _ in range(n)]
        for q, c in zip(wires, choices):
            box[q] = set(c)
    else:
        strings = _strings_from_box(wires, choices)

    gates = circuit.gates
    cone: set[int] = set()
    for unit in reversed(_gate_units(dag)):
        unit_gates = [gates[i] for i in unit]
        uw, sig = _unit_signature(unit_gates)
        if strings is not None:
            locals_ = {}
            for s in strings:
                locals_.setdefault(tuple(_local_code(s[0], s[1], q) for q in uw), []).append(s)
            if all(_conjugate(sig, loc)[0] for loc in locals_):
                continue
            cone.update(unit)
            clear = sum(1 << q for q in uw)
            new: set[tuple[int, int]] = set()
            for loc, group in locals_.items():
                images = _conjugate(sig, loc)[1]
                for x, z in group:
                    x0, z0 = x & ~clear, z & ~clear
                    for img in images:
                        xi, zi = x0, z0
                        for q, c in zip(uw, img):
                            xb, zb = _BITS[c]
                            xi |= xb << q
                            zi |= zb << q
                        new.add((xi, zi))
            if len(new) > STRING_SET_CAP:
                strings, box = None, _box_from_strings(new, n)
            else:
                strings = new
        else:
            combos = list(itertools.product(*(sorted(box[q]) for q in uw)))
            if all(_conjugate(sig, loc)[0] for loc in combos):
                continue
            cone.update(unit)
            grown = [set(box[q]) for q in uw]
            for loc in combos:
                for img in _conjugate(sig, loc)[1]:
                    for j, c in enumerate(img):
                        grown[j].add(c)
            for q, s in zip(uw, grown):
                box[q] = s
    return frozenset(cone)


# ---------------------------------------------------------------- reduction


@dataclass(frozen=True)
class ReducedAnsatz:
    """A term together with the sub-circuit that determines its expectation value.

    ``relabel`` maps original qubit indices to reduced ones; ``term`` keeps the
    original labels and ``reduced_term`` is the relabeled copy.
    """

    term: PauliTerm
    circuit: Circuit
    relabel: Mapping[int, int]
    cone_gates: frozenset[int]
    original_qubits: int
    original_gates: int

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(sorted(self.relabel))

    @property
    def reduced_term(self) -> PauliTerm:
        return self.term.relabel(self.relabel)

    @property
    def key(self) -> tuple:
        return (self.qubits, self.cone_gates)

    def to_dict(self) -> dict:
        from .circuit import serialize

        return {
            "term": self.term.label,
            "reduced_term": self.reduced_term.label,
            "qubit_map": {str(k): v for k, v in sorted(self.relabel.items())},
            "cone_gates": sorted(self.cone_gates),
            "qubits": self.circuit.n_qubits,
            "gates": len(self.circuit.gates),
            "qubit_delta": self.circuit.n_qubits - self.original_qubits,
            "gate_delta": len(self.circuit.gates) - self.original_gates,
            "circuit": serialize(self.circuit),
        }


def restrict(circuit: Circuit, gate_ids: Iterable[int], keep_qubits: Iterable[int] = ()) -> tuple[Circuit, dict[int, int]]:
    """Sub-circuit of the given gates over their qubits plus ``keep_qubits``, relabeled ascending."""
    ids = sorted(set(gate_ids))
    qubits = set(keep_qubits)
    for i in ids:
        qubits.update(circuit.gates[i].qubits)
    mapping = {q: j for j, q in enumerate(sorted(qubits))}
    gates = tuple(circuit.gates[i].relabel(mapping) for i in ids)
    return Circuit(max(len(mapping), 1), gates), mapping


def reduce_ansatz(circuit: Circuit, term: PauliTerm, dag: CircuitDag | None = None) -> ReducedAnsatz:
    if term.is_identity:
        raise CircuitError("the identity term has no causal cone")
    dag = dag or build_dag(circuit)
    cone = past_causal_cone(dag, term.support, term.letters)
    reduced, mapping = restrict(circuit, cone, term.support)
    return ReducedAnsatz(term, reduced, mapping, cone, circuit.n_qubits, len(circuit.gates))


@dataclass(frozen=True)
class ReducedSet:
    """Per-term reductions plus the distinct circuits they map onto.

    ``circuits[term_index[label]]`` is the representative reduction for a
    term; representatives are the first term reaching each distinct cone.
    """

    entries: tuple[ReducedAnsatz, ...]
    circuits: tuple[ReducedAnsatz, ...]
    term_index: Mapping[str, int]

    def __len__(self) -> int:
        return len(self.circuits)

    def __iter__(self):
        return iter(self.circuits)

    def __getitem__(self, i: int) -> ReducedAnsatz:
        return self.circuits[i]

    def entry(self, term: PauliTerm) -> ReducedAnsatz:
        for e in self.entries:
            if e.term.paulis == term.paulis:
                return e
        raise KeyError(term.label)

    def terms_of(self, index: int) -> list[PauliTerm]:
        return [e.term for e in self.entries if self.term_index[e.term.label] == index]


def reduced_set(circuit: Circuit, hamiltonian: Hamiltonian) -> ReducedSet:
    """Reduce every non-identity term and deduplicate equal cones.

    Two terms share a circuit when their cones keep the same gates over the
    same original qubits, which implies equal relabeled circuits.
    """
    if hamiltonian.n_qubits > circuit.n_qubits:
        raise CircuitError(
            f"Hamiltonian acts on {hamiltonian.n_qubits} qubits but circuit has {circuit.n_qubits}"
        )
    dag = build_dag(circuit)
    entries = tuple(reduce_ansatz(circuit, t, dag) for t in hamiltonian.measured_terms)
    circuits: list[ReducedAnsatz] = []
    seen: dict[tuple, int] = {}
    index: dict[str, int] = {}
    for e in entries:
        if e.key not in seen:
            seen[e.key] = len(circuits)
            circuits.append(e)
        index[e.term.label] = seen[e.key]
    return ReducedSet(entries, tuple(circuits), index)
