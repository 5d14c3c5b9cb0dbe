"""Compilation to the trapped-ion gate set {RX, RY, RZ, XX} and peephole clean-up.

Rewrites are stored as :class:`RewriteRule` objects. Each rule is checked
numerically when it is registered, so a wrong identity fails at import time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .circuit import (
    NATIVE_KINDS,
    Angle,
    Circuit,
    CircuitError,
    Gate,
    GateKind,
    Sym,
    add_angles,
    cnot,
    negate,
    rx,
    ry,
    rz,
    xx,
)
from .pauli import SizeLimitError
from .simulator import MAX_UNITARY_QUBITS, circuit_unitary, simulate

PI = math.pi
_ROTATIONS = (GateKind.RX, GateKind.RY, GateKind.RZ)

# builders take (angle, a, b); single-qubit rules ignore b
Builder = Callable[[Angle, int, int], list]


@dataclass(frozen=True)
class RewriteRule:
    name: str
    pattern: Builder
    replacement: Builder
    n_qubits: int = 2

    def self_test(self, samples: int = 20, tol: float = 1e-10, seed: int = 7) -> None:
        """Check pattern and replacement agree up to global phase at random angles."""
        rng = np.random.default_rng(seed)
        b = 1 if self.n_qubits == 2 else 0
        for theta in rng.uniform(-2 * PI, 2 * PI, samples):
            lhs = Circuit(self.n_qubits, tuple(self.pattern(float(theta), 0, b)))
            rhs = Circuit(self.n_qubits, tuple(self.replacement(float(theta), 0, b)))
            if not unitary_equiv(lhs, rhs, tol):
                raise AssertionError(f"rewrite rule {self.name!r} fails at angle {theta}")


RULES: dict[str, RewriteRule] = {}


def register(rule: RewriteRule) -> RewriteRule:
    rule.self_test()
    RULES[rule.name] = rule
    return rule


def _half(a: Angle) -> Angle:
    return a * 0.5


def _cnot_native(c: int, t: int) -> list:
    return [ry(PI / 2, c), xx(PI / 2, c, t), rx(-PI / 2, c), rx(-PI / 2, t), ry(-PI / 2, c)]


# ---------------------------------------------------------------- identities


def _unitary_equiv_raw(u1: np.ndarray, u2: np.ndarray, tol: float) -> bool:
    idx = np.unravel_index(np.argmax(np.abs(u2)), u2.shape)
    if abs(u2[idx]) < 1e-12:
        return False
    phase = u1[idx] / u2[idx]
    if abs(abs(phase) - 1.0) > max(tol, 1e-12) * 10:
        return False
    phase /= abs(phase)
    return float(np.linalg.norm(u1 - phase * u2)) <= tol


def unitary_equiv(c1: Circuit, c2: Circuit, tol: float = 1e-9) -> bool:
    """True when the two bound circuits agree up to a global phase."""
    if c1.n_qubits != c2.n_qubits:
        return False
    if c1.n_qubits > MAX_UNITARY_QUBITS:
        raise SizeLimitError(f"unitary comparison limited to {MAX_UNITARY_QUBITS} qubits")
    return _unitary_equiv_raw(circuit_unitary(c1), circuit_unitary(c2), tol)


def state_equiv(c1: Circuit, c2: Circuit, tol: float = 1e-9) -> bool:
    """True when both circuits prepare the same state from |0...0> up to phase."""
    if c1.n_qubits != c2.n_qubits:
        return False
    a, b = simulate(c1).amplitudes, simulate(c2).amplitudes
    return abs(abs(np.vdot(a, b)) - 1.0) <= tol


H_RULE = register(RewriteRule("h", lambda t, a, b: [Gate(GateKind.H, (a,))], lambda t, a, b: [rz(PI, a), ry(PI / 2, a)], 1))
CNOT_RULE = register(RewriteRule("cnot", lambda t, c, x: [cnot(c, x)], lambda t, c, x: _cnot_native(c, x)))
CRY_RULE = register(
    RewriteRule(
        "cry",
        lambda t, c, x: [Gate(GateKind.CRY, (c, x), t)],
        lambda t, c, x: [ry(_half(t), x), cnot(c, x), ry(negate(_half(t)), x), cnot(c, x)],
    )
)
# CNOT . R(theta) . CNOT sandwiches, keyed by (rotation kind, rotation on control?)
SANDWICH_RULES = {
    (GateKind.RY, False): register(
        RewriteRule(
            "cnot-ry-target-cnot",
            lambda t, c, x: [cnot(c, x), ry(t, x), cnot(c, x)],
            lambda t, c, x: [
                rx(-PI / 2, c), rz(-PI / 2, c), rz(-PI / 2, x),
                xx(t, c, x),
                rz(PI / 2, c), rx(PI / 2, c), rz(PI / 2, x),
            ],
        )
    ),
    (GateKind.RZ, False): register(
        RewriteRule(
            "cnot-rz-target-cnot",
            lambda t, c, x: [cnot(c, x), rz(t, x), cnot(c, x)],
            lambda t, c, x: [ry(PI / 2, c), ry(PI / 2, x), xx(t, c, x), ry(-PI / 2, c), ry(-PI / 2, x)],
        )
    ),
    (GateKind.RX, False): register(
        RewriteRule("cnot-rx-target-cnot", lambda t, c, x: [cnot(c, x), rx(t, x), cnot(c, x)], lambda t, c, x: [rx(t, x)])
    ),
    (GateKind.RZ, True): register(
        RewriteRule("cnot-rz-control-cnot", lambda t, c, x: [cnot(c, x), rz(t, c), cnot(c, x)], lambda t, c, x: [rz(t, c)])
    ),
    (GateKind.RX, True): register(
        RewriteRule("cnot-rx-control-cnot", lambda t, c, x: [cnot(c, x), rx(t, c), cnot(c, x)], lambda t, c, x: [xx(t, c, x)])
    ),
}


# ---------------------------------------------------------------- lowering


def _next_on(gates: Sequence[Gate | None], start: int, wires: set[int]) -> int | None:
    for j in range(start, len(gates)):
        g = gates[j]
        if g is not None and wires.intersection(g.qubits):
            return j
    return None


def _fuse_sandwiches(gates: list) -> list:
    """Replace CNOT . rotation . CNOT blocks (adjacent on both wires) by their native form."""
    work: list = list(gates)
    out: list = []
    for i in range(len(work)):
        g = work[i]
        if g is None:
            continue
        if g.kind is GateKind.CNOT:
            c, t = g.qubits
            j = _next_on(work, i + 1, {c, t})
            if j is not None and work[j].kind in _ROTATIONS:
                mid = work[j]
                k = _next_on(work, j + 1, {c, t})
                rule = SANDWICH_RULES.get((mid.kind, mid.qubits[0] == c))
                if k is not None and rule is not None and work[k].kind is GateKind.CNOT and work[k].qubits == (c, t):
                    out.extend(rule.replacement(mid.angle, c, t))
                    work[j] = work[k] = None
                    continue
        out.append(g)
    return out


def to_native(circuit: Circuit, fuse: bool = True) -> Circuit:
    """Rewrite a canonical circuit into {RX, RY, RZ, XX}.

    Controlled-RY becomes two CNOTs around target rotations. With ``fuse``
    each CNOT . rotation . CNOT block collapses to at most one XX gate;
    otherwise every CNOT is expanded separately.
    """
    gates: list = []
    for g in circuit.gates:
        if g.kind is GateKind.CRY:
            gates.extend(CRY_RULE.replacement(g.angle, *g.qubits))
        elif g.kind not in (GateKind.H, GateKind.CNOT) and g.kind not in NATIVE_KINDS:
            raise CircuitError(f"cannot compile gate kind {g.kind}")  # pragma: no cover
        else:
            gates.append(g)
    if fuse:
        gates = _fuse_sandwiches(gates)
    out: list = []
    for g in gates:
        if g.kind is GateKind.CNOT:
            out.extend(_cnot_native(*g.qubits))
        elif g.kind is GateKind.H:
            out.extend(H_RULE.replacement(None, g.qubits[0], 0))
        else:
            out.append(g)
    return Circuit(circuit.n_qubits, tuple(out))


# ---------------------------------------------------------------- peephole


def _is_zero(a: Angle | None) -> bool:
    """Angle that makes a rotation the identity up to global phase (multiple of 2*pi)."""
    if isinstance(a, Sym) or a is None:
        return False
    r = math.remainder(float(a), 2 * PI)
    return abs(r) < 1e-12


def _normalise(a: Angle) -> Angle:
    if isinstance(a, Sym):
        return a
    r = math.remainder(float(a), 4 * PI)
    return 0.0 if abs(r) < 1e-15 else r


def _commutes_with_x(g: Gate) -> bool:
    return g.kind in (GateKind.RX, GateKind.XX)


def _merge_pass(gates: list) -> bool:
    """Merge one pair of mergeable gates; returns True on change.

    RX gates slide along their wire through XX gates (both are X-type); XX gates
    on the same pair slide through RX and other XX gates on their wires.
    """
    for i, g in enumerate(gates):
        if g is None or g.kind not in (*_ROTATIONS, GateKind.XX):
            continue
        wires = set(g.qubits)
        for j in range(i + 1, len(gates)):
            h = gates[j]
            if h is None or not wires.intersection(h.qubits):
                continue
            same = h.kind is g.kind and set(h.qubits) == wires
            if same:
                total = add_angles(g.angle, h.angle)
                if total is not None:
                    gates[i] = None
                    gates[j] = h.with_angle(_normalise(total))
                    return True
            if g.kind in (GateKind.RX, GateKind.XX) and _commutes_with_x(h):
                continue
            break
    return False


def peephole_optimize(circuit: Circuit, absorb_final_rz: bool = False) -> Circuit:
    """Merge same-axis neighbours, drop identity rotations, cancel XX pairs.

    With ``absorb_final_rz`` any RZ that is the last gate on its wire is
    removed; that leaves Z-basis measurement statistics unchanged but not
    the unitary.
    """
    gates: list = list(circuit.gates)
    changed = True
    while changed:
        changed = False
        for i, g in enumerate(gates):
            if g is not None and g.kind.parametric and _is_zero(g.angle):
                gates[i] = None
                changed = True
        while _merge_pass(gates):
            changed = True
        gates = [g for g in gates if g is not None]
    if absorb_final_rz:
        seen: set[int] = set()
        keep = []
        for g in reversed(gates):
            if g.kind is GateKind.RZ and g.qubits[0] not in seen:
                continue
            seen.update(g.qubits)
            keep.append(g)
        gates = keep[::-1]
    return Circuit(circuit.n_qubits, tuple(gates))


def compile_circuit(circuit: Circuit, opt_level: int = 1, absorb_final_rz: bool = False) -> Circuit:
    """``opt_level`` 0: gate-by-gate expansion; 1: also fuse CNOT sandwiches. Both end with the peephole pass."""
    if opt_level not in (0, 1):
        raise ValueError("opt_level must be 0 or 1")
    return peephole_optimize(to_native(circuit, fuse=opt_level == 1), absorb_final_rz)


def gate_counts(circuit: Circuit) -> dict[str, int]:
    counts = {k.value: 0 for k in GateKind}
    for g in circuit.gates:
        counts[g.kind.value] += 1
    counts["total"] = len(circuit.gates)
    return counts


def count_report(before: Circuit, after: Circuit) -> list[dict]:
    """Gate-count rows before and after compilation."""
    b, a = gate_counts(before), gate_counts(after)
    return [{"gate": k, "before": b[k], "after": a[k]} for k in b if b[k] or a[k]]
