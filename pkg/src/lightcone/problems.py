"""Built-in benchmark problems: the deuteron UCC ansatz and QAOA MAXCUT on the dragon graph."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .circuit import Circuit, Sym, cnot, cry, h, rx, ry, rz
from .pauli import Graph, Hamiltonian, deuteron_hamiltonian, dragon_graph, maxcut_hamiltonian

DEUTERON_OPTIMUM = {"phi": 0.858, "lam1": 0.958, "lam2": 0.758}
DRAGON_OPTIMUM = {"gamma": 1.358, "beta": 2.462}


def deuteron_ansatz() -> Circuit:
    """Seven-gate UCC ansatz on four qubits (parameters phi, lam1, lam2)."""
    phi, lam1, lam2 = Sym("phi"), Sym("lam1"), Sym("lam2")
    return Circuit(
        4,
        (
            rx(math.pi, 0),
            ry(phi, 1),
            cnot(1, 0),
            cry(lam1, 1, 2),
            cnot(2, 1),
            cry(lam2, 2, 3),
            cnot(3, 2),
        ),
    )


def qaoa_ansatz(graph: Graph, p: int = 1) -> Circuit:
    """Depth-``p`` QAOA: Hadamards, then per layer CNOT·RZ(gamma/2)·CNOT per edge and RX(beta) mixers.

    For ``p == 1`` the parameters are ``gamma`` and ``beta``; otherwise
    ``gamma1, beta1, gamma2, ...``.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    n = graph.n_vertices
    gates = [h(q) for q in range(n)]
    for layer in range(1, p + 1):
        suffix = "" if p == 1 else str(layer)
        gamma, beta = Sym("gamma" + suffix), Sym("beta" + suffix)
        for u, v in graph.edges:
            gates += [cnot(u, v), rz(0.5 * gamma, v), cnot(u, v)]
        gates += [rx(beta, q) for q in range(n)]
    return Circuit(n, tuple(gates))


@dataclass(frozen=True)
class Problem:
    name: str
    circuit: Circuit
    hamiltonian: Hamiltonian
    optimum: dict = field(default_factory=dict)
    # published energy at the in-silico optimum
    reference_energy: float | None = None


def get_problem(name: str, p: int = 1) -> Problem:
    key = name.lower()
    if key == "deuteron":
        return Problem("deuteron", deuteron_ansatz(), deuteron_hamiltonian(), dict(DEUTERON_OPTIMUM), -2.14)
    if key == "dragon":
        g = dragon_graph()
        opt = dict(DRAGON_OPTIMUM) if p == 1 else {}
        return Problem("dragon", qaoa_ansatz(g, p), maxcut_hamiltonian(g), opt, -3.45)
    raise KeyError(f"unknown builtin problem {name!r} (choose 'deuteron' or 'dragon')")


BUILTIN_PROBLEMS = ("deuteron", "dragon")
