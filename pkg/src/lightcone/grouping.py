"""Sub-Hamiltonians, minimal circuit covers and shot budgets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .cone import ReducedAnsatz, ReducedSet
from .pauli import Hamiltonian, PauliTerm


class GroupingError(ValueError):
    pass


@dataclass(frozen=True)
class SubHamiltonian:
    """One reduced circuit with the terms measurable from it.

    ``terms`` lists every term whose cone lies inside this circuit's cone;
    ``owned`` is the subset this circuit reports in the energy sum.
    """

    index: int
    reduced: ReducedAnsatz
    terms: tuple[PauliTerm, ...]
    owned: tuple[PauliTerm, ...]

    @property
    def label(self) -> str:
        return " or ".join(t.label for t in self.owned) or self.reduced.term.label

    @property
    def depth(self) -> int:
        return self.reduced.circuit.depth()

    @property
    def n_qubits(self) -> int:
        return self.reduced.circuit.n_qubits


def measurable(term_entry: ReducedAnsatz, circuit: ReducedAnsatz) -> bool:
    """A term can be read from ``circuit`` when its own cone sits inside it."""
    return term_entry.cone_gates <= circuit.cone_gates and set(term_entry.term.support) <= set(circuit.qubits)


def _measurable_terms(reduced: ReducedSet, idx: int) -> tuple[PauliTerm, ...]:
    host = reduced.circuits[idx]
    return tuple(e.term for e in reduced.entries if measurable(e, host))


def group_all(reduced: ReducedSet, hamiltonian: Hamiltonian | None = None, strategy: str = "accuracy") -> list[SubHamiltonian]:
    """Sub-Hamiltonians for every distinct circuit; each term owned by its own cone circuit.

    ``strategy="cover"`` delegates to :func:`minimal_cover`.
    """
    _check_covered(reduced, hamiltonian)
    if strategy == "cover":
        return minimal_cover(reduced, hamiltonian)
    if strategy != "accuracy":
        raise GroupingError(f"unknown strategy {strategy!r}")
    out = []
    for i, host in enumerate(reduced.circuits):
        owned = tuple(e.term for e in reduced.entries if reduced.term_index[e.term.label] == i)
        out.append(SubHamiltonian(i, host, _measurable_terms(reduced, i), owned))
    return out


def _check_covered(reduced: ReducedSet, hamiltonian: Hamiltonian | None) -> None:
    if hamiltonian is None:
        return
    missing = [t.label for t in hamiltonian.measured_terms if t.label not in reduced.term_index]
    if missing:
        raise GroupingError(f"terms without a reduced circuit: {missing}")


class _Budget(Exception):
    pass


def _exact_cover(masks: Sequence[int], full: int, node_limit: int) -> tuple[int, ...]:
    """Smallest set of masks covering ``full``; lexicographically first among ties."""
    best: tuple[int, ...] | None = None
    nodes = 0
    n_terms = full.bit_length()

    def rec(chosen: tuple[int, ...], covered: int) -> None:
        nonlocal best, nodes
        nodes += 1
        if nodes > node_limit:
            raise _Budget
        if covered == full:
            cand = tuple(sorted(chosen))
            if best is None or (len(cand), cand) < (len(best), best):
                best = cand
            return
        if best is not None and len(chosen) + 1 > len(best):
            return
        # branch on the uncovered term with the fewest options
        options: list[int] | None = None
        for t in range(n_terms):
            if (full >> t) & 1 and not (covered >> t) & 1:
                opts = [i for i, m in enumerate(masks) if (m >> t) & 1]
                if options is None or len(opts) < len(options):
                    options = opts
        for i in options or []:
            if i not in chosen:
                rec(chosen + (i,), covered | masks[i])

    rec((), 0)
    assert best is not None
    return best


def _greedy_cover(masks: Sequence[int], full: int) -> tuple[int, ...]:
    chosen: list[int] = []
    covered = 0
    while covered != full:
        gain = [bin(m & ~covered).count("1") for m in masks]
        i = max(range(len(masks)), key=lambda j: (gain[j], -j))
        chosen.append(i)
        covered |= masks[i]
    return tuple(sorted(chosen))


def minimal_cover(
    reduced: ReducedSet,
    hamiltonian: Hamiltonian | None = None,
    *,
    exact_limit: int = 40,
    node_limit: int = 200_000,
) -> list[SubHamiltonian]:
    """Fewest circuits from which every term is measurable.

    Exact branch-and-bound when there are at most ``exact_limit`` circuits and
    the search stays under ``node_limit`` nodes, greedy otherwise. Each term
    is owned by the shallowest selected circuit that can measure it (ties go to
    fewer qubits, then lower index).
    """
    _check_covered(reduced, hamiltonian)
    entries = reduced.entries
    if not entries:
        return []
    masks = []
    for host in reduced.circuits:
        m = 0
        for t, e in enumerate(entries):
            if measurable(e, host):
                m |= 1 << t
        masks.append(m)
    full = (1 << len(entries)) - 1
    chosen: tuple[int, ...]
    if len(masks) <= exact_limit:
        try:
            chosen = _exact_cover(masks, full, node_limit)
        except _Budget:
            chosen = _greedy_cover(masks, full)
    else:
        chosen = _greedy_cover(masks, full)

    owners: dict[int, list[PauliTerm]] = {i: [] for i in chosen}
    for t, e in enumerate(entries):
        hosts = [i for i in chosen if (masks[i] >> t) & 1]
        best = min(hosts, key=lambda i: (reduced.circuits[i].circuit.depth(), reduced.circuits[i].circuit.n_qubits, i))
        owners[best].append(e.term)
    return [
        SubHamiltonian(i, reduced.circuits[i], _measurable_terms(reduced, i), tuple(owners[i]))
        for i in chosen
    ]


# --------------------------------------------------------------------- shots


@dataclass(frozen=True)
class RoundingPolicy:
    """Turns the variance bound into a prescribed shot count.

    Round to the nearest ``multiple``; raise anything below ``floor`` to
    ``floor`` unless the raw bound is under ``exempt_below`` (a term so small
    that a handful of shots suffices).
    """

    multiple: int = 50
    floor: int = 500
    exempt_below: float = 10.0

    def apply(self, raw: float) -> int:
        bound = max(1, math.ceil(raw))
        if raw < self.exempt_below:
            return bound
        shots = int(math.floor(raw / self.multiple + 0.5)) * self.multiple if self.multiple > 0 else bound
        return max(shots, self.floor, 1)


@dataclass(frozen=True)
class ShotBudget:
    """Shot estimate for one circuit.

    ``raw`` is T*h_max^2/eps^2, ``bound`` its ceiling (the value that meets
    the target) and ``shots`` the count after the rounding policy.
    """

    index: int
    label: str
    coefficients: tuple[float, ...]
    n_terms: int
    h_max: float
    epsilon: float
    raw: float
    bound: int
    shots: int

    def to_row(self) -> dict:
        return {
            "term_group": self.label,
            "abs_h": " ".join(f"{abs(c):g}" for c in self.coefficients),
            "h_max": self.h_max,
            "T": self.n_terms,
            "S_raw": round(self.raw, 3),
            "S": self.bound,
            "S_prescribed": self.shots,
        }


def shot_bound(n_terms: int, h_max: float, epsilon: float) -> float:
    if epsilon <= 0:
        raise GroupingError("epsilon must be positive")
    return n_terms * h_max * h_max / (epsilon * epsilon)


def estimate_shots(
    sub: SubHamiltonian,
    epsilon: float,
    rounding: RoundingPolicy | None = None,
    *,
    scope: str = "group",
    hamiltonian: Hamiltonian | None = None,
) -> ShotBudget:
    """Shots for one circuit so the estimated energy error stays near ``epsilon``.

    ``scope="group"`` uses the circuit's own term list; ``scope="hamiltonian"``
    uses the whole Hamiltonian's term count and largest coefficient.
    """
    if epsilon <= 0:
        raise GroupingError("epsilon must be positive")
    rounding = rounding or RoundingPolicy()
    if scope == "group":
        terms: Iterable[PauliTerm] = sub.terms
    elif scope == "hamiltonian":
        if hamiltonian is None:
            raise GroupingError("scope 'hamiltonian' needs the Hamiltonian")
        terms = hamiltonian.measured_terms
    else:
        raise GroupingError(f"unknown scope {scope!r}")
    coefs = tuple(t.coefficient for t in terms)
    if not coefs:
        raise GroupingError("sub-Hamiltonian has no measured terms")
    h_max = max(abs(c) for c in coefs)
    raw = shot_bound(len(coefs), h_max, epsilon)
    return ShotBudget(sub.index, sub.label, coefs, len(coefs), h_max, epsilon, raw, max(1, math.ceil(raw)), rounding.apply(raw))


def total_budget(budgets: Iterable[ShotBudget], prescribed: bool = False) -> int:
    return sum(b.shots if prescribed else b.bound for b in budgets)


def baseline_budget(hamiltonian: Hamiltonian, shots_per_basis: int = 5000) -> int:
    """Shots for the unreduced strategy: every term measured on the full circuit."""
    return len(hamiltonian.measured_terms) * shots_per_basis


def back_solve_epsilon(n_terms: int, h_max: float, shots: float) -> float:
    """Invert the shot bound: eps = sqrt(T*h_max^2/S)."""
    return math.sqrt(n_terms * h_max * h_max / shots)
