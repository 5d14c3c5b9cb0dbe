"""Statevector simulation, shot sampling, trajectory noise and readout correction.

Amplitudes are little-endian (qubit 0 is the least significant bit of the
basis index). Rotations follow R_P(theta) = exp(-i theta P / 2) and
XX(theta) = exp(-i theta X⊗X / 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .circuit import Circuit, CircuitError, Gate, GateKind, h, rz
from .pauli import Hamiltonian, PauliTerm, SizeLimitError

MAX_QUBITS = 24
MAX_UNITARY_QUBITS = 10
# trajectories reuse noiseless prefix states up to this width
_PREFIX_CACHE_QUBITS = 16


class ReadoutError(ValueError):
    """Raised when a confusion matrix cannot be inverted."""


# ----------------------------------------------------------------- matrices

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULIS = (_I2, _X, _Y, _Z)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def _angle(gate: Gate) -> float:
    if not isinstance(gate.angle, (int, float)):
        raise CircuitError(f"unbound parameter {gate.symbol!r} in {gate}")
    return float(gate.angle)


def gate_matrix(gate: Gate) -> np.ndarray:
    """Unitary of a bound gate: 2x2 for one qubit, 4x4 (local index b0 + 2*b1) for two."""
    k = gate.kind
    if k is GateKind.H:
        return _H.copy()
    if k is GateKind.CNOT:
        m = np.zeros((4, 4), dtype=complex)
        for src, dst in ((0, 0), (1, 3), (2, 2), (3, 1)):
            m[dst, src] = 1.0
        return m
    t = _angle(gate)
    c, s = math.cos(t / 2), math.sin(t / 2)
    if k is GateKind.RX:
        return np.array([[c, -1j * s], [-1j * s, c]])
    if k is GateKind.RY:
        return np.array([[c, -s], [s, c]], dtype=complex)
    if k is GateKind.RZ:
        return np.diag([complex(math.cos(t / 2), -math.sin(t / 2)), complex(c, s)])
    if k is GateKind.CRY:
        m = np.eye(4, dtype=complex)
        m[1, 1], m[1, 3], m[3, 1], m[3, 3] = c, -s, s, c
        return m
    if k is GateKind.XX:
        return c * np.eye(4, dtype=complex) - 1j * s * np.kron(_X, _X)
    raise CircuitError(f"no matrix for gate kind {k}")  # pragma: no cover


def _lower(gates: Sequence[Gate]):
    g = len(gates)
    mats = np.zeros((g, 4, 4), dtype=np.complex128)
    qa = np.zeros(g, dtype=np.int64)
    qb = np.zeros(g, dtype=np.int64)
    arity = np.ones(g, dtype=np.int64)
    for i, gate in enumerate(gates):
        m = gate_matrix(gate)
        mats[i, : m.shape[0], : m.shape[1]] = m
        qa[i] = gate.qubits[0]
        if len(gate.qubits) == 2:
            qb[i] = gate.qubits[1]
            arity[i] = 2
    return mats, qa, qb, arity


def _check_size(n: int, limit: int = MAX_QUBITS) -> None:
    if n > limit:
        raise SizeLimitError(f"statevector limited to {limit} qubits, got {n}")


# ------------------------------------------------------------------ states


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def zero_state(n_qubits: int) -> StateVector:
    _check_size(n_qubits)
    psi = np.zeros(1 << n_qubits, dtype=np.complex128)
    psi[0] = 1.0
    return StateVector(n_qubits, psi)


def simulate(circuit: Circuit, initial: StateVector | None = None) -> StateVector:
    """Apply a bound circuit to ``|0...0>`` (or a copy of ``initial``)."""
    _check_size(circuit.n_qubits)
    if initial is None:
        state = zero_state(circuit.n_qubits)
    else:
        if initial.n_qubits != circuit.n_qubits:
            raise CircuitError("initial state width does not match circuit")
        state = StateVector(initial.n_qubits, initial.amplitudes.astype(np.complex128, copy=True))
    if len(circuit.gates):
        mats, qa, qb, arity = _lower(circuit.gates)
        _kernels.run_gates(state.amplitudes, circuit.n_qubits, mats, qa, qb, arity)
    return state


def _check_term(term: PauliTerm, n: int) -> None:
    if term.support and term.support[-1] >= n:
        raise IndexError(f"term {term.label} acts outside {n} qubits")


def expectation(state: StateVector, term: PauliTerm) -> float:
    """Exact <psi|P|psi> for the Pauli string of ``term`` (coefficient not applied)."""
    _check_term(term, state.n_qubits)
    if term.is_identity:
        return 1.0
    x, z, ny = term.masks()
    return float(_kernels.pauli_expectation(state.amplitudes, x, z, ny))


def energy(state: StateVector, hamiltonian: Hamiltonian) -> float:
    return hamiltonian.identity_coefficient + sum(
        t.coefficient * expectation(state, t) for t in hamiltonian.measured_terms
    )


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Dense unitary, column ``j`` is the image of basis state ``j``."""
    n = circuit.n_qubits
    _check_size(n, MAX_UNITARY_QUBITS)
    dim = 1 << n
    u = np.eye(dim, dtype=np.complex128)
    if not len(circuit.gates):
        return u
    mats, qa, qb, arity = _lower(circuit.gates)
    for j in range(dim):
        col = np.ascontiguousarray(u[:, j])
        _kernels.run_gates(col, n, mats, qa, qb, arity)
        u[:, j] = col
    return u


# ------------------------------------------------------------ measurement


def basis_change_gates(term: PauliTerm) -> tuple[Gate, ...]:
    """Gates rotating ``term`` onto Z: H for X, RZ(-pi/2) then H for Y."""
    gates: list[Gate] = []
    for q, p in term.paulis:
        if p == "X":
            gates.append(h(q))
        elif p == "Y":
            gates += [rz(-math.pi / 2, q), h(q)]
    return tuple(gates)


def measurement_circuit(circuit: Circuit, term: PauliTerm) -> Circuit:
    _check_term(term, circuit.n_qubits)
    return circuit.append(*basis_change_gates(term))


def readout_flip_for(n_qubits: int, joint_fidelity: float) -> float:
    """Per-qubit symmetric flip probability q with (1 - q)^n = joint fidelity."""
    if not 0.0 < joint_fidelity <= 1.0:
        raise ValueError("joint fidelity must lie in (0, 1]")
    return 1.0 - joint_fidelity ** (1.0 / n_qubits)


# joint readout fidelities for the two device widths used by the benchmarks
_JOINT_READOUT = {4: 0.971, 5: 0.943}


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing gate noise plus per-qubit readout confusion.

    ``overrides`` maps gate-kind names to error probabilities and wins over
    ``p1``/``p2``. With ``virtual_rz`` the RZ gates are noiseless (frame
    updates). ``confusion`` optionally gives a 2x2 row-stochastic matrix
    ``M[prepared, measured]`` per qubit; otherwise every qubit flips
    symmetrically with probability ``readout_flip``.
    """

    p1: float = 0.005
    p2: float = 0.015
    readout_flip: float = 0.0
    virtual_rz: bool = True
    overrides: Mapping[str, float] = field(default_factory=dict)
    confusion: tuple | None = None
    seed: int | None = None

    def __post_init__(self):
        probs = [self.p1, self.p2, self.readout_flip, *self.overrides.values()]
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("noise probabilities must lie in [0, 1]")
        for name in self.overrides:
            GateKind(name)
        if self.confusion is not None:
            mats = tuple(np.asarray(m, dtype=float) for m in self.confusion)
            for m in mats:
                if m.shape != (2, 2) or np.any(m < 0) or not np.allclose(m.sum(axis=1), 1.0, atol=1e-12):
                    raise ValueError("confusion matrices must be 2x2 row-stochastic")
            object.__setattr__(self, "confusion", mats)

    @classmethod
    def default(cls, n_qubits: int = 4, seed: int | None = None) -> "NoiseModel":
        fid = _JOINT_READOUT.get(n_qubits)
        q = readout_flip_for(n_qubits, fid) if fid else readout_flip_for(4, _JOINT_READOUT[4])
        return cls(readout_flip=q, seed=seed)

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls(p1=0.0, p2=0.0)

    def gate_error(self, kind: GateKind) -> float:
        if kind.value in self.overrides:
            return float(self.overrides[kind.value])
        if kind is GateKind.RZ and self.virtual_rz:
            return 0.0
        return self.p1 if kind.arity == 1 else self.p2

    def confusion_matrix(self, qubit: int) -> np.ndarray:
        if self.confusion is not None:
            if qubit >= len(self.confusion):
                raise IndexError(f"no confusion matrix for qubit {qubit}")
            return self.confusion[qubit]
        q = self.readout_flip
        return np.array([[1 - q, q], [q, 1 - q]])

    def to_dict(self) -> dict:
        d = {
            "p1": self.p1,
            "p2": self.p2,
            "readout_flip": self.readout_flip,
            "virtual_rz": self.virtual_rz,
            "overrides": dict(self.overrides),
            "seed": self.seed,
        }
        if self.confusion is not None:
            d["confusion"] = [m.tolist() for m in self.confusion]
        return d

    @classmethod
    def from_dict(cls, data: Mapping) -> "NoiseModel":
        known = {"p1", "p2", "readout_flip", "virtual_rz", "overrides", "confusion", "seed", "joint_readout_fidelity", "n_qubits"}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown noise keys: {sorted(extra)}")
        kw = {k: data[k] for k in ("p1", "p2", "readout_flip", "virtual_rz", "overrides", "seed") if k in data}
        if "joint_readout_fidelity" in data:
            kw["readout_flip"] = readout_flip_for(int(data.get("n_qubits", 4)), float(data["joint_readout_fidelity"]))
        if data.get("confusion") is not None:
            kw["confusion"] = tuple(data["confusion"])
        return cls(**kw)


@dataclass(frozen=True)
class MeasurementRecord:
    """Outcome of sampling one Pauli term.

    ``counts`` keys list the measured bits in support order, left to right.
    ``counts`` are raw; ``estimate`` uses the readout-corrected distribution
    when ``readout_corrected`` is set.
    """

    circuit_id: str
    term: PauliTerm
    basis_gates: tuple[str, ...]
    shots: int
    counts: dict
    estimate: float
    stderr: float
    interval: tuple[float, float]
    readout_corrected: bool = False

    def to_dict(self) -> dict:
        return {
            "circuit_id": self.circuit_id,
            "term": self.term.label,
            "coefficient": self.term.coefficient,
            "basis_gates": list(self.basis_gates),
            "shots": self.shots,
            "counts": dict(self.counts),
            "estimate": self.estimate,
            "stderr": self.stderr,
            "interval": list(self.interval),
            "readout_corrected": self.readout_corrected,
        }


def wilson_interval(successes: float, shots: int, z: float = 1.0) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    p = successes / shots
    denom = 1.0 + z * z / shots
    centre = (p + z * z / (2 * shots)) / denom
    half = z / denom * math.sqrt(max(p * (1 - p), 0.0) / shots + z * z / (4 * shots * shots))
    return max(0.0, centre - half), min(1.0, centre + half)


def parity_estimate(probs: np.ndarray, shots: int) -> tuple[float, float, tuple[float, float]]:
    """Parity mean, Gaussian 1-sigma error and Wilson interval from an outcome distribution."""
    k = int(probs.shape[0]).bit_length() - 1
    p_even = float(_kernels.z_parity_probs(np.ascontiguousarray(probs, dtype=np.float64), (1 << k) - 1))
    p_even = min(max(p_even, 0.0), 1.0)
    est = 2.0 * p_even - 1.0
    stderr = 2.0 * math.sqrt(p_even * (1.0 - p_even) / shots)
    lo, hi = wilson_interval(p_even * shots, shots)
    return est, stderr, (2.0 * lo - 1.0, 2.0 * hi - 1.0)


def _marginal_index(n: int, support: Sequence[int]) -> np.ndarray:
    idx = np.arange(1 << n)
    out = np.zeros(1 << n, dtype=np.int64)
    for j, q in enumerate(support):
        out |= ((idx >> q) & 1) << j
    return out


def _marginal(probs: np.ndarray, midx: np.ndarray, k: int) -> np.ndarray:
    m = np.bincount(midx, weights=probs, minlength=1 << k)
    return m / m.sum()


def _pauli_error(arity: int, code: int) -> np.ndarray:
    if arity == 1:
        out = np.zeros((4, 4), dtype=complex)
        out[:2, :2] = _PAULIS[code]
        return out
    return np.kron(_PAULIS[code >> 2], _PAULIS[code & 3])


def _trajectory_counts(circuit: Circuit, shots: int, noise: NoiseModel, rng, midx, k) -> np.ndarray:
    """Outcome counts over measured bits with stochastic Pauli errors after each gate."""
    n = circuit.n_qubits
    gates = circuit.gates
    mats, qa, qb, arity = _lower(gates)
    errs = np.array([noise.gate_error(g.kind) for g in gates])
    G = len(gates)
    hits = rng.random((shots, G)) < errs
    codes = np.zeros((shots, G), dtype=np.int8)
    rows, cols = np.nonzero(hits)
    if rows.size:
        codes[rows, cols] = rng.integers(1, np.where(arity[cols] == 1, 4, 16))
    patterns, counts = np.unique(codes, axis=0, return_counts=True)

    prefix = None
    if n <= _PREFIX_CACHE_QUBITS:
        prefix = [zero_state(n).amplitudes]
        for g in range(G):
            nxt = prefix[-1].copy()
            _kernels.run_gates(nxt, n, mats[g : g + 1], qa[g : g + 1], qb[g : g + 1], arity[g : g + 1])
            prefix.append(nxt)

    total = np.zeros(1 << k, dtype=np.int64)
    for pattern, count in zip(patterns, counts):
        nz = np.flatnonzero(pattern)
        first = int(nz[0]) if nz.size else G
        if prefix is not None:
            psi = prefix[first].copy()
            start = first
        else:
            psi = zero_state(n).amplitudes
            start = 0
        m_list, a_list, b_list, r_list = [], [], [], []
        for g in range(start, G):
            m_list.append(mats[g])
            a_list.append(qa[g])
            b_list.append(qb[g])
            r_list.append(arity[g])
            if pattern[g]:
                m_list.append(_pauli_error(int(arity[g]), int(pattern[g])))
                a_list.append(qa[g])
                b_list.append(qb[g])
                r_list.append(arity[g])
        if m_list:
            _kernels.run_gates(
                psi, n, np.array(m_list), np.array(a_list, dtype=np.int64),
                np.array(b_list, dtype=np.int64), np.array(r_list, dtype=np.int64),
            )
        total += rng.multinomial(int(count), _marginal(np.abs(psi) ** 2, midx, k))
    return total


def _flip_readout(counts: np.ndarray, mats: Sequence[np.ndarray], rng) -> np.ndarray:
    k = len(mats)
    outcomes = np.repeat(np.arange(1 << k), counts)
    for j, m in enumerate(mats):
        bit = (outcomes >> j) & 1
        p_flip = np.where(bit == 1, m[1, 0], m[0, 1])
        flips = rng.random(outcomes.shape[0]) < p_flip
        outcomes ^= flips.astype(np.int64) << j
    return np.bincount(outcomes, minlength=1 << k)


def _bitstring(index: int, k: int) -> str:
    return "".join(str((index >> j) & 1) for j in range(k))


def sample(
    circuit: Circuit,
    term: PauliTerm,
    shots: int,
    noise: NoiseModel | None = None,
    *,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
    readout_correct: bool = False,
    circuit_id: str = "",
    basis_appended: bool = False,
) -> MeasurementRecord:
    """Estimate the Pauli string of ``term`` from ``shots`` samples of ``circuit``.

    Basis-change gates are appended unless ``basis_appended`` says the caller
    already did so (for example after native compilation). Randomness comes
    from ``rng``, else ``seed``, else the noise model's seed.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    n = circuit.n_qubits
    _check_size(n)
    _check_term(term, n)
    if rng is None:
        rng = np.random.default_rng(seed if seed is not None else (noise.seed if noise else None))
    basis = tuple(str(g) for g in basis_change_gates(term))
    if term.is_identity:
        return MeasurementRecord(circuit_id, term, (), shots, {"": shots}, 1.0, 0.0, (1.0, 1.0), readout_correct)
    run = circuit if basis_appended else measurement_circuit(circuit, term)
    support = term.support
    k = len(support)
    midx = _marginal_index(n, support)

    noisy_gates = noise is not None and any(noise.gate_error(g.kind) > 0 for g in run.gates)
    if noisy_gates:
        counts = _trajectory_counts(run, shots, noise, rng, midx, k)
    else:
        probs = simulate(run).probabilities()
        counts = rng.multinomial(shots, _marginal(probs, midx, k))
    mats = [noise.confusion_matrix(q) for q in support] if noise is not None else None
    if mats is not None and any(not np.array_equal(m, np.eye(2)) for m in mats):
        counts = _flip_readout(counts, mats, rng)

    dist = counts / shots
    if readout_correct and mats is not None:
        dist = correct_readout(counts, mats) / shots
    est, stderr, interval = parity_estimate(dist, shots)
    table = {_bitstring(i, k): int(c) for i, c in enumerate(counts) if c}
    return MeasurementRecord(circuit_id, term, basis, shots, table, est, stderr, interval, bool(readout_correct and mats is not None))


def correct_readout(counts, matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Invert per-qubit confusion on a count vector over ``len(matrices)`` bits.

    ``matrices[j]`` is row-stochastic ``M[prepared, measured]`` for bit ``j``
    of the outcome index. The corrected vector is clipped to be non-negative
    and rescaled to the original total.
    """
    c = np.asarray(counts, dtype=float)
    k = len(matrices)
    if c.shape != (1 << k,):
        raise ValueError(f"expected {1 << k} counts for {k} qubits, got shape {c.shape}")
    total = c.sum()
    if total <= 0:
        raise ValueError("counts must have a positive total")
    p = (c / total).reshape((2,) * k) if k else c / total
    for j, m in enumerate(matrices):
        m = np.asarray(m, dtype=float)
        if abs(np.linalg.det(m)) < 1e-12:
            raise ReadoutError(f"confusion matrix for bit {j} is singular")
        inv = np.linalg.inv(m.T)
        axis = k - 1 - j
        p = np.moveaxis(np.tensordot(inv, p, axes=([1], [axis])), 0, axis)
    p = np.clip(p.reshape(-1), 0.0, None)
    return p / p.sum() * total
