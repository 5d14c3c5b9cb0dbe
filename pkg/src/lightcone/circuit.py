"""Gate set, parameterized circuits, binding and the line-oriented text format.

Unitary conventions (used everywhere in the package):

* ``RX/RY/RZ(t) = exp(-i t P / 2)``
* ``XX(t) = exp(-i t X⊗X / 2)``
* ``CRY(t)`` applies ``RY(t)`` to the target when the control is ``|1>``
* ``H`` and ``CNOT`` are the usual matrices.

Qubits are 0-based. Circuits are immutable; every transformation returns a new
``Circuit``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence, Union


class CircuitError(ValueError):
    """Invalid circuit structure (arity, indices, parameters)."""


class CircuitSyntaxError(CircuitError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class GateKind(str, Enum):
    H = "H"
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    CNOT = "CNOT"
    CRY = "CRY"
    XX = "XX"

    @property
    def arity(self) -> int:
        return 2 if self in (GateKind.CNOT, GateKind.CRY, GateKind.XX) else 1

    @property
    def parametric(self) -> bool:
        return self not in (GateKind.H, GateKind.CNOT)


CANONICAL_KINDS = frozenset({GateKind.H, GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.CNOT, GateKind.CRY})
NATIVE_KINDS = frozenset({GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.XX})
ROTATION_AXIS = {GateKind.RX: "X", GateKind.RY: "Y", GateKind.RZ: "Z"}


@dataclass(frozen=True)
class Sym:
    """Symbolic angle ``scale * <name> + offset``."""

    name: str
    scale: float = 1.0
    offset: float = 0.0

    def value(self, x: float) -> float:
        return self.scale * x + self.offset

    def __mul__(self, k: float) -> "Angle":
        return _make_sym(self.name, self.scale * k, self.offset * k)

    __rmul__ = __mul__

    def __truediv__(self, k: float) -> "Angle":
        return _make_sym(self.name, self.scale / k, self.offset / k)

    def __add__(self, k: float) -> "Angle":
        if isinstance(k, Sym):
            return add_angles(self, k)
        return _make_sym(self.name, self.scale, self.offset + k)

    __radd__ = __add__

    def __sub__(self, k: float) -> "Angle":
        return self + (-k)

    def __neg__(self) -> "Angle":
        return _make_sym(self.name, -self.scale, -self.offset)

    def __str__(self) -> str:
        return format_angle(self)


Angle = Union[float, Sym]


def _make_sym(name: str, scale: float, offset: float) -> Angle:
    if scale == 0.0:
        return float(offset)
    return Sym(name, float(scale), float(offset))


def add_angles(a: Angle, b: Angle) -> Angle | None:
    """Sum of two angles, or ``None`` when they reference different symbols."""
    if isinstance(a, Sym) and isinstance(b, Sym):
        if a.name != b.name:
            return None
        return _make_sym(a.name, a.scale + b.scale, a.offset + b.offset)
    if isinstance(a, Sym):
        return a + float(b)
    if isinstance(b, Sym):
        return b + float(a)
    return float(a) + float(b)


def negate(a: Angle) -> Angle:
    return -a if isinstance(a, Sym) else -float(a)


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    qubits: tuple[int, ...]
    angle: Angle | None = None

    def relabel(self, mapping: Mapping[int, int]) -> "Gate":
        return Gate(self.kind, tuple(mapping[q] for q in self.qubits), self.angle)

    def with_angle(self, angle: Angle | None) -> "Gate":
        return Gate(self.kind, self.qubits, angle)

    @property
    def symbol(self) -> str | None:
        return self.angle.name if isinstance(self.angle, Sym) else None

    def __str__(self) -> str:
        head = self.kind.value
        if self.kind.parametric:
            head += f"({format_angle(self.angle)})"
        return head + " " + " ".join(str(q) for q in self.qubits)


# gate constructors; argument order mirrors the text format


def h(q: int) -> Gate:
    return Gate(GateKind.H, (q,))


def rx(theta: Angle, q: int) -> Gate:
    return Gate(GateKind.RX, (q,), theta)


def ry(theta: Angle, q: int) -> Gate:
    return Gate(GateKind.RY, (q,), theta)


def rz(theta: Angle, q: int) -> Gate:
    return Gate(GateKind.RZ, (q,), theta)


def cnot(control: int, target: int) -> Gate:
    return Gate(GateKind.CNOT, (control, target))


def cry(theta: Angle, control: int, target: int) -> Gate:
    return Gate(GateKind.CRY, (control, target), theta)


def xx(theta: Angle, a: int, b: int) -> Gate:
    return Gate(GateKind.XX, (a, b), theta)


def _check_gate(gate: Gate, n_qubits: int) -> None:
    kind = gate.kind
    if len(gate.qubits) != kind.arity:
        raise CircuitError(f"{kind.value} acts on {kind.arity} qubit(s), got {len(gate.qubits)}")
    for q in gate.qubits:
        if not isinstance(q, int) or q < 0 or q >= n_qubits:
            raise CircuitError(f"qubit index {q} out of range for {n_qubits} qubit(s)")
    if kind.arity == 2 and gate.qubits[0] == gate.qubits[1]:
        raise CircuitError(f"{kind.value} needs two distinct qubits, got {gate.qubits}")
    if kind.parametric and gate.angle is None:
        raise CircuitError(f"{kind.value} requires an angle")
    if not kind.parametric and gate.angle is not None:
        raise CircuitError(f"{kind.value} takes no angle")


def _infer_parameters(gates: Iterable[Gate]) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for g in gates:
        if isinstance(g.angle, Sym):
            seen.setdefault(g.angle.name, None)
    return tuple(seen)


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()
    parameters: tuple[str, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not isinstance(self.n_qubits, int) or self.n_qubits < 1:
            raise CircuitError(f"n_qubits must be a positive integer, got {self.n_qubits!r}")
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            _check_gate(g, self.n_qubits)
        used = _infer_parameters(self.gates)
        if self.parameters is None:
            object.__setattr__(self, "parameters", used)
        elif tuple(self.parameters) != used:
            raise CircuitError(f"declared parameters {tuple(self.parameters)} do not match used {used}")

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    @property
    def is_bound(self) -> bool:
        return not self.parameters

    def qubits_used(self) -> set[int]:
        return {q for g in self.gates for q in g.qubits}

    def count(self, kind: GateKind) -> int:
        return sum(1 for g in self.gates if g.kind is kind)

    def depth(self) -> int:
        level = [0] * self.n_qubits
        for g in self.gates:
            d = max(level[q] for q in g.qubits) + 1
            for q in g.qubits:
                level[q] = d
        return max(level, default=0)

    def append(self, *gates: Gate) -> "Circuit":
        return Circuit(self.n_qubits, self.gates + tuple(gates))

    def __str__(self) -> str:
        return serialize(self)


def build_circuit(n_qubits: int, gates: Sequence[Gate]) -> Circuit:
    """Validate and build a circuit; parameters are inferred in first-use order."""
    return Circuit(n_qubits, tuple(gates))


def bind(circuit: Circuit, params: Mapping[str, float]) -> Circuit:
    """Resolve every symbolic angle. ``params`` must name exactly the circuit's parameters."""
    names = set(params)
    missing = [p for p in circuit.parameters if p not in names]
    extra = sorted(names - set(circuit.parameters))
    if missing:
        raise CircuitError(f"missing parameter(s): {', '.join(missing)}")
    if extra:
        raise CircuitError(f"unknown parameter(s): {', '.join(extra)}")
    out = []
    for g in circuit.gates:
        if isinstance(g.angle, Sym):
            g = g.with_angle(float(g.angle.value(float(params[g.angle.name]))))
        out.append(g)
    return Circuit(circuit.n_qubits, tuple(out))


# ------------------------------------------------------------------ text format


def format_angle(a: Angle | None) -> str:
    if a is None:
        return ""
    if not isinstance(a, Sym):
        return repr(float(a))
    if a.scale == 1.0:
        s = a.name
    elif a.scale == -1.0:
        s = f"-{a.name}"
    else:
        s = f"{a.scale!r}*{a.name}"
    if a.offset > 0:
        s += f"+{a.offset!r}"
    elif a.offset < 0:
        s += f"-{-a.offset!r}"
    return s


def serialize(circuit: Circuit) -> str:
    lines = [f"qubits {circuit.n_qubits}"]
    lines.extend(str(g) for g in circuit.gates)
    return "\n".join(lines) + "\n"


_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[^\W\d]\w*)|(?P<op>[-+*/()]))")


class _ExprError(Exception):
    def __init__(self, message: str, pos: int):
        super().__init__(message)
        self.pos = pos


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    pos = 0
    out = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise _ExprError(f"unexpected character {text[pos:].lstrip()[0]!r}", pos + len(text[pos:]) - len(text[pos:].lstrip()))
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    return out


class _Affine:
    """scale*sym + offset during expression evaluation."""

    __slots__ = ("sym", "scale", "offset")

    def __init__(self, sym, scale, offset):
        self.sym, self.scale, self.offset = sym, scale, offset


def parse_angle(text: str) -> Angle:
    """Parse a literal (``pi`` allowed) or an affine expression in one symbol."""
    try:
        return _parse_angle(text)
    except _ExprError as exc:
        raise CircuitError(f"{exc} (at offset {exc.pos})") from None


def _parse_angle(text: str) -> Angle:
    tokens = _tokenize(text)
    if not tokens:
        raise _ExprError("empty angle expression", 0)
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else None

    def take():
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        return tok

    def combine(a: _Affine, b: _Affine, sign: float, at: int) -> _Affine:
        if a.sym and b.sym and a.sym != b.sym:
            raise _ExprError("angle may reference at most one symbol", at)
        return _Affine(a.sym or b.sym, a.scale + sign * b.scale, a.offset + sign * b.offset)

    def expr():
        left = term()
        while peek() and peek()[1] in "+-":
            _, op, at = take()
            left = combine(left, term(), 1.0 if op == "+" else -1.0, at)
        return left

    def term():
        left = factor()
        while peek() and peek()[1] in "*/":
            _, op, at = take()
            right = factor()
            if op == "*":
                if left.sym and right.sym:
                    raise _ExprError("angle must be affine in its symbol", at)
                if right.sym:
                    left, right = right, left
                k = right.offset
                left = _Affine(left.sym, left.scale * k, left.offset * k)
            else:
                if right.sym:
                    raise _ExprError("cannot divide by a symbol", at)
                k = right.offset
                if k == 0:
                    raise _ExprError("division by zero", at)
                left = _Affine(left.sym, left.scale / k, left.offset / k)
        return left

    def factor():
        tok = peek()
        if tok is None:
            raise _ExprError("unexpected end of expression", len(text))
        kind, val, at = take()
        if val == "-":
            f = factor()
            return _Affine(f.sym, -f.scale, -f.offset)
        if val == "+":
            return factor()
        if val == "(":
            inner = expr()
            if not peek() or peek()[1] != ")":
                raise _ExprError("missing ')'", at)
            take()
            return inner
        if kind == "num":
            return _Affine(None, 0.0, float(val))
        if kind == "name":
            if val == "pi":
                return _Affine(None, 0.0, math.pi)
            return _Affine(val, 1.0, 0.0)
        raise _ExprError(f"unexpected {val!r}", at)

    result = expr()
    if pos != len(tokens):
        raise _ExprError(f"unexpected {tokens[pos][1]!r}", tokens[pos][2])
    if result.sym is None:
        return float(result.offset)
    return _make_sym(result.sym, result.scale, result.offset)


_GATE_LINE = re.compile(r"^(?P<kind>[A-Za-z]+)\s*(?:\((?P<expr>[^()]*(?:\([^()]*\)[^()]*)*)\))?(?P<rest>.*)$")


def parse_circuit(text: str) -> Circuit:
    n_qubits = None
    gates: list[Gate] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        indent = len(line) - len(line.lstrip())
        line = line.strip()
        if not line:
            continue
        if n_qubits is None:
            parts = line.split()
            if len(parts) != 2 or parts[0] != "qubits":
                raise CircuitSyntaxError("expected header 'qubits N'", lineno, indent + 1)
            try:
                n_qubits = int(parts[1])
            except ValueError:
                raise CircuitSyntaxError(f"bad qubit count {parts[1]!r}", lineno, indent + line.index(parts[1]) + 1) from None
            if n_qubits < 1:
                raise CircuitSyntaxError("qubit count must be positive", lineno, indent + line.index(parts[1]) + 1)
            continue
        m = _GATE_LINE.match(line)
        if not m:
            raise CircuitSyntaxError("cannot parse gate", lineno, indent + 1)
        name = m.group("kind").upper()
        try:
            kind = GateKind(name)
        except ValueError:
            raise CircuitSyntaxError(f"unknown gate {m.group('kind')!r}", lineno, indent + 1) from None
        angle = None
        if m.group("expr") is not None:
            if not kind.parametric:
                raise CircuitSyntaxError(f"{kind.value} takes no angle", lineno, indent + m.start("expr"))
            try:
                angle = _parse_angle(m.group("expr"))
            except _ExprError as exc:
                raise CircuitSyntaxError(str(exc), lineno, indent + m.start("expr") + exc.pos + 1) from None
        elif kind.parametric:
            raise CircuitSyntaxError(f"{kind.value} requires an angle", lineno, indent + len(m.group("kind")) + 1)
        qubits = []
        rest = m.group("rest")
        offset = m.start("rest")
        for qm in re.finditer(r"\S+", rest):
            try:
                qubits.append(int(qm.group()))
            except ValueError:
                raise CircuitSyntaxError(f"bad qubit index {qm.group()!r}", lineno, indent + offset + qm.start() + 1) from None
        gate = Gate(kind, tuple(qubits), angle)
        try:
            _check_gate(gate, n_qubits)
        except CircuitError as exc:
            raise CircuitSyntaxError(str(exc), lineno, indent + 1) from None
        gates.append(gate)
    if n_qubits is None:
        raise CircuitSyntaxError("missing header 'qubits N'", 1, 1)
    return Circuit(n_qubits, tuple(gates))
