import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lightcone import cone as cone_mod
from lightcone.circuit import Circuit, CircuitError, GateKind, bind, cnot, h
from lightcone.cone import _gate_units, build_dag, past_causal_cone, reduce_ansatz, reduced_set
from lightcone.pauli import Hamiltonian, PauliTerm
from lightcone.problems import get_problem
from lightcone.simulator import expectation, simulate

from conftest import random_circuit


def _term(label):
    return PauliTerm.from_label(1.0, label)


def _expect(circuit, term):
    return expectation(simulate(circuit), term)


def _random_params(rng, circuit):
    return {p: float(rng.uniform(-np.pi, np.pi)) for p in circuit.parameters}


# ----------------------------------------------------------------- DAG


def test_dag_deuteron_nodes_and_edges():
    dag = build_dag(get_problem("deuteron").circuit)
    assert dag.n_nodes == 7
    # the X(pi) on q0 feeds only the first CNOT
    assert dag.successors(0) == [2]


def test_dag_empty_and_small():
    assert build_dag(Circuit(2)).n_nodes == 0
    dag = build_dag(Circuit(2, (h(0), h(1), cnot(0, 1))))
    assert sorted(dag.predecessors(2)) == [0, 1]


def test_dag_wires_thread_in_to_out():
    c = get_problem("dragon").circuit
    dag = build_dag(c)
    for q in range(c.n_qubits):
        path = dag.wire_path(q)
        assert path[0] == ("in", q) and path[-1] == ("out", q)
        gates = path[1:-1]
        assert gates == sorted(gates)
        assert gates == [i for i, g in enumerate(c.gates) if q in g.qubits]


# ------------------------------------------------------ benchmark structure


def test_deuteron_reduced_set_matches_term_table():
    p = get_problem("deuteron")
    rs = reduced_set(p.circuit, p.hamiltonian)
    groups = sorted(tuple(sorted(t.label for t in rs.terms_of(i))) for i in range(len(rs)))
    assert groups == sorted([
        ("X0 X1", "Y0 Y1"),
        ("X1 X2", "Y1 Y2"),
        ("X2 X3", "Y2 Y3", "Z2"),
        ("Z0",),
        ("Z1",),
        ("Z3",),
    ])
    assert [r.circuit.n_qubits for r in rs] == [3, 3, 3, 2, 2, 3]


def test_deuteron_single_qubit_cones():
    p = get_problem("deuteron")
    dag = build_dag(p.circuit)
    # Z on q0: X(pi), RY(phi), first CNOT on qubits {0, 1}
    assert past_causal_cone(dag, [0], {0: "Z"}) == {0, 1, 2}
    # Z on q3: RY(phi) then both controlled rotations, no CNOTs
    z3 = past_causal_cone(dag, [3], {3: "Z"})
    assert z3 == {1, 3, 5}
    assert all(p.circuit.gates[i].kind is not GateKind.CNOT for i in z3)


def test_dragon_reduced_qubit_counts():
    p = get_problem("dragon")
    rs = reduced_set(p.circuit, p.hamiltonian)
    assert [r.circuit.n_qubits for r in rs] == [3, 5, 4, 3, 4]


def test_dragon_first_edge_cone_structure():
    p = get_problem("dragon")
    red = reduce_ansatz(p.circuit, _term("Z0 Z1"))
    c = red.circuit
    assert red.qubits == (0, 1, 2)
    assert c.count(GateKind.CNOT) == 4  # two ZZ blocks
    mixers = [g.qubits[0] for g in c.gates if g.kind is GateKind.RX]
    assert mixers == [0, 1]  # the third qubit carries no mixer


def test_idle_qubit_term():
    c = Circuit(3, (h(0), cnot(0, 1)))
    red = reduce_ansatz(c, _term("Z2"))
    assert red.circuit.n_qubits == 1 and len(red.circuit) == 0
    assert red.reduced_term.label == "Z0"


def test_identity_only_hamiltonian_gives_empty_set():
    c = get_problem("deuteron").circuit
    assert len(reduced_set(c, Hamiltonian([PauliTerm(3.0)], 4))) == 0


def test_unknown_support_qubit():
    dag = build_dag(Circuit(2, (h(0),)))
    with pytest.raises(CircuitError):
        past_causal_cone(dag, [5])


def test_relabel_is_ascending_and_injective():
    p = get_problem("dragon")
    for e in reduced_set(p.circuit, p.hamiltonian).entries:
        keys = sorted(e.relabel)
        assert [e.relabel[k] for k in keys] == list(range(len(keys)))
        assert set(e.term.support) <= set(keys)


# ------------------------------------------------------------ equivalence


@pytest.mark.parametrize("name", ["deuteron", "dragon"])
def test_benchmark_equivalence_50_params(name):
    p = get_problem(name)
    rs = reduced_set(p.circuit, p.hamiltonian)
    rng = np.random.default_rng(11)
    for _ in range(50):
        params = _random_params(rng, p.circuit)
        full = simulate(bind(p.circuit, params))
        for e in rs.entries:
            sub = bind(e.circuit, {k: params[k] for k in e.circuit.parameters})
            assert _expect(sub, e.reduced_term) == pytest.approx(expectation(full, e.term), abs=1e-10)


def _random_term(rng, n):
    k = int(rng.integers(1, min(n, 3) + 1))
    qubits = rng.choice(n, size=k, replace=False)
    return PauliTerm(1.0, tuple((int(q), str(rng.choice(list("XYZ")))) for q in qubits))


_KINDS = [GateKind.H, GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.CNOT, GateKind.CRY, GateKind.XX]


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(0, 40))
def test_random_circuit_equivalence(seed, n, g):
    rng = np.random.default_rng(seed)
    c = random_circuit(rng, n, g, _KINDS)
    t = _random_term(rng, n)
    red = reduce_ansatz(c, t)
    assert red.circuit.n_qubits <= n and len(red.circuit) <= len(c)
    assert _expect(red.circuit, red.reduced_term) == pytest.approx(_expect(c, t), abs=1e-10)


def test_box_fallback_is_sound(monkeypatch):
    monkeypatch.setattr(cone_mod, "STRING_SET_CAP", 2)
    rng = np.random.default_rng(5)
    for _ in range(40):
        c = random_circuit(rng, 5, 25, _KINDS)
        t = _random_term(rng, 5)
        red = reduce_ansatz(c, t)
        assert _expect(red.circuit, red.reduced_term) == pytest.approx(_expect(c, t), abs=1e-10)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dead_units_are_removable(seed):
    rng = np.random.default_rng(seed)
    c = random_circuit(rng, 5, 25, _KINDS)
    t = _random_term(rng, 5)
    dag = build_dag(c)
    cone = past_causal_cone(dag, t.support, t.letters)
    ref = _expect(c, t)
    for unit in _gate_units(dag):
        if set(unit) & cone:
            continue
        kept = tuple(gt for i, gt in enumerate(c.gates) if i not in unit)
        assert _expect(Circuit(5, kept), t) == pytest.approx(ref, abs=1e-10)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_reduction_is_idempotent(seed):
    rng = np.random.default_rng(seed)
    c = random_circuit(rng, 6, 30, _KINDS)
    t = _random_term(rng, 6)
    once = reduce_ansatz(c, t)
    twice = reduce_ansatz(once.circuit, once.reduced_term)
    assert twice.circuit == once.circuit


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_cone_monotone_in_support(seed):
    rng = np.random.default_rng(seed)
    c = random_circuit(rng, 6, 30, _KINDS)
    dag = build_dag(c)
    big = sorted(set(int(q) for q in rng.choice(6, size=3, replace=False)))
    small = big[: int(rng.integers(1, 3))]
    assert past_causal_cone(dag, small) <= past_causal_cone(dag, big)


def test_full_support_with_final_layer_takes_everything():
    c = Circuit(3, (cnot(0, 1), cnot(1, 2), h(0), h(1), h(2)))
    assert past_causal_cone(build_dag(c), [0, 1, 2]) == set(range(5))
