"""Weighted Pauli strings, Hamiltonians, graphs and the two benchmark Hamiltonians."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np


class HamiltonianError(ValueError):
    pass


class SizeLimitError(RuntimeError):
    """Dense enumeration or simulation guard exceeded."""


PAULI_LETTERS = ("X", "Y", "Z")


@dataclass(frozen=True)
class PauliTerm:
    """``coefficient * P`` with ``P`` given as sorted ``(qubit, letter)`` pairs."""

    coefficient: float
    paulis: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        ps = tuple(sorted((int(q), str(p).upper()) for q, p in self.paulis))
        qs = [q for q, _ in ps]
        if len(set(qs)) != len(qs):
            raise HamiltonianError(f"repeated qubit in Pauli string {ps}")
        for q, p in ps:
            if p not in PAULI_LETTERS:
                raise HamiltonianError(f"bad Pauli letter {p!r}")
            if q < 0:
                raise HamiltonianError(f"negative qubit index {q}")
        object.__setattr__(self, "paulis", ps)
        object.__setattr__(self, "coefficient", float(self.coefficient))

    @classmethod
    def from_label(cls, coefficient: float, label: str) -> "PauliTerm":
        """``PauliTerm.from_label(-2.143, "X0 X1")``"""
        pairs = [(int(m.group(2)), m.group(1)) for m in re.finditer(r"([XYZ])(\d+)", label)]
        return cls(coefficient, tuple(pairs))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.paulis)

    @property
    def letters(self) -> dict[int, str]:
        return dict(self.paulis)

    @property
    def is_identity(self) -> bool:
        return not self.paulis

    @property
    def is_diagonal(self) -> bool:
        return all(p == "Z" for _, p in self.paulis)

    @property
    def label(self) -> str:
        return " ".join(f"{p}{q}" for q, p in self.paulis) or "I"

    def masks(self) -> tuple[int, int, int]:
        """``(xmask, zmask, n_y)`` of the symplectic representation."""
        x = z = ny = 0
        for q, p in self.paulis:
            if p in "XY":
                x |= 1 << q
            if p in "ZY":
                z |= 1 << q
            if p == "Y":
                ny += 1
        return x, z, ny

    def relabel(self, mapping: Mapping[int, int]) -> "PauliTerm":
        return PauliTerm(self.coefficient, tuple((mapping[q], p) for q, p in self.paulis))

    def with_coefficient(self, c: float) -> "PauliTerm":
        return PauliTerm(c, self.paulis)

    def __str__(self) -> str:
        return f"{self.coefficient!r} {self.label}" if self.paulis else repr(self.coefficient)


class Hamiltonian:
    """Sum of Pauli terms with merged duplicates; the identity term (if any) comes first."""

    def __init__(self, terms: Iterable[PauliTerm], n_qubits: int | None = None):
        merged: dict[tuple, float] = {}
        for t in terms:
            merged[t.paulis] = merged.get(t.paulis, 0.0) + t.coefficient
        items = [(k, c) for k, c in merged.items() if c != 0.0]
        items.sort(key=lambda kc: 0 if not kc[0] else 1)  # stable: identity first, then input order
        self.terms: tuple[PauliTerm, ...] = tuple(PauliTerm(c, k) for k, c in items)
        top = max((q for t in self.terms for q in t.support), default=-1)
        if n_qubits is None:
            n_qubits = max(top + 1, 1)
        if n_qubits < 1:
            raise HamiltonianError("n_qubits must be positive")
        if top >= n_qubits:
            raise HamiltonianError(f"qubit index {top} out of range for {n_qubits} qubit(s)")
        self.n_qubits = int(n_qubits)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Hamiltonian):
            return NotImplemented
        return self.n_qubits == other.n_qubits and set(self.terms) == set(other.terms)

    def __repr__(self) -> str:
        return f"Hamiltonian({serialize_hamiltonian(self)!r}, n_qubits={self.n_qubits})"

    @property
    def identity_coefficient(self) -> float:
        return sum(t.coefficient for t in self.terms if t.is_identity)

    @property
    def measured_terms(self) -> tuple[PauliTerm, ...]:
        """Non-identity terms, in order."""
        return tuple(t for t in self.terms if not t.is_identity)

    @property
    def is_diagonal(self) -> bool:
        return all(t.is_diagonal for t in self.terms)

    def max_abs_coefficient(self) -> float:
        return max((abs(t.coefficient) for t in self.measured_terms), default=0.0)

    def diagonal(self) -> np.ndarray:
        if not self.is_diagonal:
            raise HamiltonianError("Hamiltonian is not diagonal")
        idx = np.arange(1 << self.n_qubits)
        out = np.zeros(idx.shape[0])
        for t in self.terms:
            sign = np.ones(idx.shape[0])
            for q in t.support:
                sign *= 1.0 - 2.0 * ((idx >> q) & 1)
            out += t.coefficient * sign
        return out

    def to_matrix(self) -> np.ndarray:
        if self.n_qubits > 12:
            raise SizeLimitError(f"dense matrix of {self.n_qubits} qubits refused")
        dim = 1 << self.n_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for t in self.terms:
            out += t.coefficient * pauli_matrix(t, self.n_qubits)
        return out


_SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_matrix(term: PauliTerm, n_qubits: int) -> np.ndarray:
    """Dense matrix of the bare Pauli string (coefficient not applied)."""
    letters = term.letters
    m = np.array([[1.0 + 0j]])
    for q in reversed(range(n_qubits)):
        m = np.kron(m, _SINGLE[letters.get(q, "I")])
    return m


# ------------------------------------------------------------------ text format

_HAM_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<pauli>[XYZ])(?P<idx>\d+)|(?P<sign>[+-])|(?P<star>\*))")


def parse_hamiltonian(text: str, n_qubits: int | None = None) -> Hamiltonian:
    """Parse ``coef [P q]*`` terms joined by ``+``/``-``, e.g. ``28.657 - 2.143 X0 X1``."""
    text = "\n".join(line.split("#", 1)[0] for line in text.splitlines())
    terms: list[PauliTerm] = []
    pos = 0
    sign = 1.0
    coef: float | None = None
    paulis: list[tuple[int, str]] = []
    started = False
    dangling = False

    def flush(at):
        nonlocal coef, paulis, sign, started
        if not started:
            raise HamiltonianError(f"empty term at position {at}")
        try:
            terms.append(PauliTerm(sign * (1.0 if coef is None else coef), tuple(paulis)))
        except HamiltonianError as exc:
            raise HamiltonianError(f"{exc} (term ending at position {at})") from None
        coef, paulis, sign, started = None, [], 1.0, False

    while pos < len(text):
        if not text[pos:].strip():
            break
        m = _HAM_TOKEN.match(text, pos)
        if not m:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise HamiltonianError(f"unexpected character {text[bad]!r} at position {bad}")
        at = m.start(m.lastgroup if m.lastgroup != "idx" else "pauli")
        if m.group("sign"):
            if started:
                flush(at)
            sign *= -1.0 if m.group("sign") == "-" else 1.0
            dangling = True
        elif m.group("num"):
            if started:
                raise HamiltonianError(f"missing '+' or '-' before {m.group('num')!r} at position {at}")
            coef = float(m.group("num"))
            started, dangling = True, False
        elif m.group("pauli"):
            paulis.append((int(m.group("idx")), m.group("pauli")))
            started, dangling = True, False
        elif m.group("star"):
            if coef is None:
                raise HamiltonianError(f"'*' without coefficient at position {at}")
        pos = m.end()
    if started:
        flush(len(text))
    elif dangling or not terms:
        raise HamiltonianError("expression ends without a term")
    return Hamiltonian(terms, n_qubits)


def serialize_hamiltonian(h: Hamiltonian) -> str:
    parts = []
    for i, t in enumerate(h.terms):
        c = t.coefficient
        body = repr(abs(c)) + ("" if t.is_identity else " " + t.label)
        if i == 0:
            parts.append(("-" if c < 0 else "") + body)
        else:
            parts.append(("- " if c < 0 else "+ ") + body)
    return " ".join(parts) if parts else "0.0"


# ------------------------------------------------------------------ graphs


@dataclass(frozen=True)
class Graph:
    n_vertices: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n_vertices < 1:
            raise HamiltonianError("graph needs at least one vertex")
        seen = set()
        norm = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise HamiltonianError(f"self-loop on vertex {u}")
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise HamiltonianError(f"edge ({u}, {v}) out of range")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise HamiltonianError(f"duplicate edge {key}")
            seen.add(key)
            norm.append((u, v))
        object.__setattr__(self, "edges", tuple(norm))


def parse_graph(text: str) -> Graph:
    n = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split("#", 1)[0].split()
        if not parts:
            continue
        try:
            if parts[0] == "vertices" and len(parts) == 2 and n is None:
                n = int(parts[1])
            elif parts[0] == "edge" and len(parts) == 3 and n is not None:
                edges.append((int(parts[1]), int(parts[2])))
            else:
                raise ValueError
        except ValueError:
            raise HamiltonianError(f"line {lineno}: expected 'vertices N' header then 'edge u v' lines") from None
    if n is None:
        raise HamiltonianError("missing 'vertices N' header")
    return Graph(n, tuple(edges))


def dragon_graph() -> Graph:
    """T_{3,2}: triangle (2,3,4) with a two-edge tail 0-1-2, 0-based labels."""
    return Graph(5, ((0, 1), (1, 2), (2, 3), (3, 4), (2, 4)))


# ------------------------------------------------------------------ benchmarks

_DEUTERON_HOPPING = ((0, 1, -2.143), (1, 2, -3.913), (2, 3, -5.671))
_DEUTERON_FIELDS = (0.218, -6.125, -9.625, -13.125)


def deuteron_hamiltonian() -> Hamiltonian:
    """Four-qubit deuteron Hamiltonian (MeV), 0-based qubit labels."""
    terms = [PauliTerm(28.657)]
    for letter in "XY":
        terms.extend(PauliTerm(h, ((a, letter), (b, letter))) for a, b, h in _DEUTERON_HOPPING)
    terms.extend(PauliTerm(h, ((q, "Z"),)) for q, h in enumerate(_DEUTERON_FIELDS))
    return Hamiltonian(terms, 4)


def maxcut_hamiltonian(graph: Graph) -> Hamiltonian:
    """Negated cut operator ``-(|E| - sum Z_i Z_j)/2``; its minimum is minus the max cut."""
    m = len(graph.edges)
    if m == 0:
        raise HamiltonianError("graph has no edges")
    terms = [PauliTerm(-m / 2)]
    terms.extend(PauliTerm(0.5, ((u, "Z"), (v, "Z"))) for u, v in graph.edges)
    return Hamiltonian(terms, graph.n_vertices)


def exact_min_expectation(h: Hamiltonian) -> float:
    """Brute-force minimum: basis enumeration if diagonal (n <= 20), else dense eigvalsh (n <= 10)."""
    if h.is_diagonal:
        if h.n_qubits > 20:
            raise SizeLimitError(f"diagonal enumeration limited to 20 qubits, got {h.n_qubits}")
        return float(h.diagonal().min())
    if h.n_qubits > 10:
        raise SizeLimitError(f"dense diagonalization limited to 10 qubits, got {h.n_qubits}")
    return float(np.linalg.eigvalsh(h.to_matrix())[0])
