import numpy as np
import pytest

from lightcone.circuit import Circuit, Gate, GateKind, Sym


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_circuit(rng, n_qubits, n_gates, kinds=None, symbolic=False):
    """Random canonical circuit; with ``symbolic`` every rotation gets its own parameter."""
    kinds = kinds or [GateKind.H, GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.CNOT, GateKind.CRY]
    if n_qubits < 2:
        kinds = [k for k in kinds if k.arity == 1]
    gates = []
    for i in range(n_gates):
        kind = kinds[rng.integers(len(kinds))]
        qubits = tuple(int(q) for q in rng.choice(n_qubits, size=kind.arity, replace=False))
        angle = None
        if kind.parametric:
            angle = Sym(f"t{i}") if symbolic else float(rng.uniform(-2 * np.pi, 2 * np.pi))
        gates.append(Gate(kind, qubits, angle))
    return Circuit(n_qubits, tuple(gates))


def noisy_expectation_dm(circuit, term, noise):
    """Exact mean of the noisy parity estimate via density-matrix evolution.

    Independent of the trajectory sampler: each gate is followed by a uniform
    non-identity Pauli channel with the model's error rate, then symmetric
    readout flips damp the parity. ``circuit`` must already hold the basis change.
    """
    import itertools

    from lightcone.pauli import PauliTerm, pauli_matrix
    from lightcone.simulator import circuit_unitary

    n = circuit.n_qubits
    rho = np.zeros((1 << n, 1 << n), dtype=complex)
    rho[0, 0] = 1.0
    for g in circuit.gates:
        u = circuit_unitary(Circuit(n, (g,)))
        rho = u @ rho @ u.conj().T
        p = noise.gate_error(g.kind)
        if p:
            ops = [
                pauli_matrix(PauliTerm(1.0, tuple((q, l) for q, l in zip(g.qubits, combo) if l != "I")), n)
                for combo in itertools.product("IXYZ", repeat=len(g.qubits))
            ][1:]
            mixed = sum(o @ rho @ o.conj().T for o in ops) / len(ops)
            rho = (1 - p) * rho + p * mixed
    z = PauliTerm(1.0, tuple((q, "Z") for q in term.support))
    value = float(np.real(np.trace(pauli_matrix(z, n) @ rho)))
    for q in term.support:
        m = noise.confusion_matrix(q)
        assert m[0, 1] == m[1, 0], "symmetric readout only"
        value *= 1 - 2 * m[0, 1]
    return value
