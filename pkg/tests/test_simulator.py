import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lightcone.circuit import Circuit, CircuitError, Sym, bind, cnot, cry, h, rx, ry, rz, xx
from lightcone.pauli import PauliTerm, SizeLimitError, pauli_matrix
from lightcone.problems import get_problem
from lightcone.simulator import (
    NoiseModel,
    ReadoutError,
    basis_change_gates,
    circuit_unitary,
    correct_readout,
    energy,
    expectation,
    gate_matrix,
    measurement_circuit,
    readout_flip_for,
    sample,
    simulate,
    wilson_interval,
)

from conftest import noisy_expectation_dm, random_circuit

X = np.array([[0, 1], [1, 0]], complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0 + 0j, -1.0])


def _expm_rotation(p, theta):
    return math.cos(theta / 2) * np.eye(p.shape[0]) - 1j * math.sin(theta / 2) * p


def test_rx_pi_convention():
    psi = simulate(Circuit(1, (rx(math.pi, 0),))).amplitudes
    assert np.allclose(psi, [0, -1j])


@pytest.mark.parametrize("theta", [0.3, -1.7, 2.9])
def test_rotation_matrices_are_exponentials(theta):
    assert np.allclose(gate_matrix(rx(theta, 0)), _expm_rotation(X, theta))
    assert np.allclose(gate_matrix(ry(theta, 0)), _expm_rotation(Y, theta))
    assert np.allclose(gate_matrix(rz(theta, 0)), _expm_rotation(Z, theta))
    # local index is b0 + 2*b1 so the first qubit is the low factor of kron
    assert np.allclose(gate_matrix(xx(theta, 0, 1)), _expm_rotation(np.kron(X, X), theta))


def test_little_endian_and_controlled_gates():
    # X on qubit 0 then CNOT(0 -> 2) sets bits 0 and 2
    psi = simulate(Circuit(3, (rx(math.pi, 0), cnot(0, 2)))).amplitudes
    assert abs(psi[0b101]) == pytest.approx(1.0)
    # CRY acts only when the control is |1>
    c = Circuit(2, (cry(1.0, 0, 1),))
    assert np.allclose(simulate(c).amplitudes, [1, 0, 0, 0])
    c = Circuit(2, (rx(math.pi, 0), cry(1.0, 0, 1)))
    probs = simulate(c).probabilities()
    assert probs[0b11] == pytest.approx(math.sin(0.5) ** 2)


def test_unitary_matches_kron_construction():
    c = Circuit(2, (h(0), cnot(0, 1), ry(0.4, 1)))
    hm = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    cx = np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]])
    u = np.kron(_expm_rotation(Y, 0.4), np.eye(2)) @ cx @ np.kron(np.eye(2), hm)
    assert np.allclose(circuit_unitary(c), u)


def test_deuteron_optimum_energy():
    p = get_problem("deuteron")
    e = energy(simulate(bind(p.circuit, p.optimum)), p.hamiltonian)
    assert e == pytest.approx(-2.14, abs=0.01)


def test_dragon_optimum_value():
    p = get_problem("dragon")
    e = energy(simulate(bind(p.circuit, p.optimum)), p.hamiltonian)
    assert e == pytest.approx(-3.45, abs=0.01)


def test_expectation_trivial_cases():
    s = simulate(Circuit(1))
    assert expectation(s, PauliTerm.from_label(1.0, "Z0")) == 1.0
    assert expectation(s, PauliTerm.from_label(1.0, "X0")) == 0.0
    with pytest.raises(IndexError):
        expectation(s, PauliTerm.from_label(1.0, "Z3"))


def test_guards():
    with pytest.raises(CircuitError):
        simulate(Circuit(1, (rx(Sym("a"), 0),)))
    with pytest.raises(SizeLimitError):
        simulate(Circuit(25))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(0, 25))
def test_norm_preserved_and_expectation_matches_dense(seed, n, g):
    rng = np.random.default_rng(seed)
    c = random_circuit(rng, n, g)
    s = simulate(c)
    assert s.norm == pytest.approx(1.0, abs=1e-12)
    letters = rng.choice(list("IXYZ"), n)
    term = PauliTerm(1.0, tuple((q, p) for q, p in enumerate(letters) if p != "I"))
    dense = np.vdot(s.amplitudes, pauli_matrix(term, n) @ s.amplitudes).real
    assert expectation(s, term) == pytest.approx(dense, abs=1e-12)


@pytest.mark.parametrize("letter", "XY")
def test_basis_change_rotates_onto_z(letter):
    term = PauliTerm.from_label(1.0, f"{letter}0")
    u = circuit_unitary(Circuit(1, basis_change_gates(term)))
    single = {"X": X, "Y": Y}[letter]
    # U^dag Z U equals the measured Pauli
    assert np.allclose(u.conj().T @ Z @ u, single)


def test_deterministic_sample_has_zero_error():
    rec = sample(Circuit(1), PauliTerm.from_label(1.0, "Z0"), 1000, seed=0)
    assert rec.estimate == 1.0 and rec.stderr == 0.0
    assert sum(rec.counts.values()) == 1000


def test_sample_agrees_with_exact_within_4_sigma():
    p = get_problem("deuteron")
    c = bind(p.circuit, p.optimum)
    s = simulate(c)
    for t in p.hamiltonian.measured_terms:
        rec = sample(c, t, 20000, seed=5)
        sigma = max(rec.stderr, 1e-3)
        assert abs(rec.estimate - expectation(s, t)) < 4 * sigma
        assert -1.0 <= rec.estimate <= 1.0
        assert rec.interval[0] <= rec.estimate + 1e-12 <= rec.interval[1] + 2e-12


def test_sampling_is_seed_deterministic():
    p = get_problem("dragon")
    c = bind(p.circuit, p.optimum)
    t = p.hamiltonian.measured_terms[0]
    nm = NoiseModel.default(5)
    assert sample(c, t, 500, nm, seed=9) == sample(c, t, 500, nm, seed=9)


def test_noise_biases_towards_zero():
    c = Circuit(2, (h(0), cnot(0, 1)) + (cnot(0, 1),) * 8)
    t = PauliTerm.from_label(1.0, "Z0 Z1")
    clean = sample(c, t, 4000, seed=1).estimate
    noisy = sample(c, t, 4000, NoiseModel(p1=0.05, p2=0.1), seed=1).estimate
    assert clean == 1.0
    assert noisy < 0.9


@pytest.mark.parametrize("label", ["Z0 Z1", "X1 Y2", "Z2"])
def test_trajectory_mean_matches_density_matrix(label):
    rng = np.random.default_rng(3)
    c = random_circuit(rng, 3, 14)
    t = PauliTerm.from_label(1.0, label)
    nm = NoiseModel(p1=0.03, p2=0.08, readout_flip=0.02)
    mc = measurement_circuit(c, t)
    want = noisy_expectation_dm(mc, t, nm)
    rec = sample(mc, t, 200_000, nm, seed=4, basis_appended=True)
    assert abs(rec.estimate - want) <= 4 * max(rec.stderr, 1e-3)
    ideal = expectation(simulate(mc), PauliTerm(1.0, tuple((q, "Z") for q in t.support)))
    if abs(ideal) > 0.1:
        assert abs(want) < abs(ideal) - 0.01


def test_default_noise_parameters():
    nm = NoiseModel.default(4)
    assert nm.p1 == 0.005 and nm.p2 == 0.015
    assert (1 - nm.readout_flip) ** 4 == pytest.approx(0.971)
    assert (1 - NoiseModel.default(5).readout_flip) ** 5 == pytest.approx(0.943)
    assert readout_flip_for(4, 0.971) == pytest.approx(0.0073, abs=1e-4)
    from lightcone.circuit import GateKind

    assert nm.gate_error(GateKind.RZ) == 0.0
    assert nm.gate_error(GateKind.XX) == 0.015


def test_noise_model_validation_and_roundtrip():
    with pytest.raises(ValueError):
        NoiseModel(p1=1.5)
    with pytest.raises(ValueError):
        NoiseModel(confusion=([[0.9, 0.2], [0.1, 0.9]],))
    nm = NoiseModel(p1=0.01, confusion=([[0.95, 0.05], [0.1, 0.9]],), overrides={"XX": 0.02})
    assert NoiseModel.from_dict(nm.to_dict()).to_dict() == nm.to_dict()


def test_identity_confusion_leaves_counts():
    counts = np.array([10.0, 20.0, 30.0, 40.0])
    assert np.allclose(correct_readout(counts, [np.eye(2), np.eye(2)]), counts)


def test_readout_correction_recovers_population():
    flip = 0.03
    m = np.array([[1 - flip, flip], [flip, 1 - flip]])
    rec = sample(Circuit(1), PauliTerm.from_label(1.0, "Z0"), 100_000, NoiseModel(p1=0, p2=0, readout_flip=flip), seed=3)
    raw = np.array([rec.counts.get("0", 0), rec.counts.get("1", 0)], float)
    assert raw[0] / raw.sum() == pytest.approx(0.97, abs=0.01)
    fixed = correct_readout(raw, [m])
    assert fixed[0] / fixed.sum() == pytest.approx(1.0, abs=0.01)


def test_corrected_record_estimate():
    nm = NoiseModel(p1=0, p2=0, readout_flip=0.05)
    c = Circuit(2, (rx(math.pi, 1),))
    t = PauliTerm.from_label(1.0, "Z0 Z1")
    raw = sample(c, t, 50_000, nm, seed=2)
    fixed = sample(c, t, 50_000, nm, seed=2, readout_correct=True)
    # parity survives when neither or both bits flip: 1 - 2*(2*0.05*0.95)
    assert raw.estimate == pytest.approx(-0.81, abs=0.01)
    assert fixed.estimate == pytest.approx(-1.0, abs=0.01)
    assert fixed.readout_corrected


def test_singular_confusion_raises():
    with pytest.raises(ReadoutError):
        correct_readout(np.array([5.0, 5.0]), [np.array([[0.5, 0.5], [0.5, 0.5]])])


def test_wilson_interval_is_asymmetric_near_edges():
    lo, hi = wilson_interval(99, 100)
    assert lo < 0.99 < hi
    assert (hi - 0.99) < (0.99 - lo)
