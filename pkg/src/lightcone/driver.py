"""End-to-end pipeline: reduce, plan shots, optionally compile, sample and aggregate."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .circuit import Circuit, bind, parse_circuit
from .cone import ReducedSet, reduced_set
from .grouping import RoundingPolicy, ShotBudget, estimate_shots, group_all, minimal_cover
from .native import compile_circuit
from .pauli import Hamiltonian, PauliTerm, parse_graph, parse_hamiltonian, maxcut_hamiltonian
from .problems import get_problem, qaoa_ansatz
from .simulator import (
    MeasurementRecord,
    NoiseModel,
    energy as exact_energy_of,
    measurement_circuit,
    sample,
    simulate,
    expectation,
)

STRATEGIES = ("full", "reduced-accuracy", "reduced-cover")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message starts with the offending key path."""


# ------------------------------------------------------------------- config


@dataclass
class OptimizerSettings:
    initial: dict | None = None
    scale: float = 0.5
    max_iter: int = 400
    tol: float = 1e-6
    restarts: int = 0
    maximize: bool = False


@dataclass
class BudgetSettings:
    epsilon: float
    scope: str = "group"
    prescribed: bool = False
    multiple: int = 50
    floor: int = 500
    exempt_below: float = 10.0

    @property
    def rounding(self) -> RoundingPolicy:
        return RoundingPolicy(self.multiple, self.floor, self.exempt_below)


@dataclass
class ExperimentConfig:
    problem: str | None = "deuteron"
    circuit_file: str | None = None
    hamiltonian_file: str | None = None
    graph_file: str | None = None
    p: int = 1
    strategy: str = "full"
    strategies: list[str] | None = None
    shots: int | None = 5000
    budget: BudgetSettings | None = None
    noise: Any = "off"
    readout_correct: bool = False
    native: bool = False
    opt_level: int = 1
    seed: int = 0
    mode: str = "evaluate"
    params: Any = "optimum"
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    repetitions: int = 100
    convergence_shots: list[int] = field(default_factory=lambda: [250, 500, 1000, 2000, 5000])
    base_dir: str = "."

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def need(cond: bool, key: str, msg: str) -> None:
            if not cond:
                raise ConfigError(f"config.{key}: {msg}")

        sources = self.problem is not None, self.circuit_file is not None or self.hamiltonian_file is not None, self.graph_file is not None
        need(sum(sources) == 1, "problem", "give exactly one of problem, circuit_file+hamiltonian_file, graph_file")
        if sources[1]:
            need(self.circuit_file is not None and self.hamiltonian_file is not None, "circuit_file", "circuit_file and hamiltonian_file go together")
        need(self.strategy in STRATEGIES, "strategy", f"must be one of {STRATEGIES}")
        for s in self.strategies or []:
            need(s in STRATEGIES, "strategies", f"unknown strategy {s!r}")
        need(self.shots is None or (isinstance(self.shots, int) and self.shots >= 1), "shots", "must be a positive integer or null (exact)")
        need(isinstance(self.p, int) and self.p >= 1, "p", "must be a positive integer")
        need(self.mode in ("evaluate", "optimize"), "mode", "must be 'evaluate' or 'optimize'")
        if self.mode == "evaluate":
            need(self.params is not None, "params", "fixed-point mode needs parameter values (or 'optimum')")
        need(self.opt_level in (0, 1), "opt_level", "must be 0 or 1")
        need(isinstance(self.repetitions, int) and self.repetitions >= 1, "repetitions", "must be a positive integer")
        need(all(isinstance(s, int) and s >= 1 for s in self.convergence_shots), "convergence_shots", "must be positive integers")
        o = self.optimizer
        need(o.max_iter >= 1, "optimizer.max_iter", "must be positive")
        need(o.scale > 0, "optimizer.scale", "must be positive")
        need(o.tol > 0, "optimizer.tol", "must be positive")
        need(o.restarts >= 0, "optimizer.restarts", "must be non-negative")
        if self.budget is not None:
            need(self.budget.epsilon > 0, "budget.epsilon", "must be positive")
            need(self.budget.scope in ("group", "hamiltonian"), "budget.scope", "must be 'group' or 'hamiltonian'")
        need(
            self.noise in ("off", "default") or isinstance(self.noise, (dict, str)),
            "noise",
            "must be 'off', 'default', a file path or an object",
        )

    @classmethod
    def from_dict(cls, data: Mapping, base_dir: str | Path = ".") -> "ExperimentConfig":
        if not isinstance(data, Mapping):
            raise ConfigError("config: top level must be a JSON object")
        known = {f for f in cls.__dataclass_fields__ if f != "base_dir"}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"config.{sorted(extra)[0]}: unknown key")
        kw = dict(data)
        try:
            if "optimizer" in kw:
                kw["optimizer"] = OptimizerSettings(**kw["optimizer"])
            if kw.get("budget") is not None:
                kw["budget"] = BudgetSettings(**kw["budget"])
        except TypeError as exc:
            raise ConfigError(f"config.{'optimizer' if 'optimizer' in str(exc) else 'budget'}: {exc}") from exc
        return cls(**kw, base_dir=str(base_dir))

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config: file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON in {path}: {exc}") from exc
        return cls.from_dict(data, path.parent)

    def resolve(self, name: str) -> Path:
        return Path(self.base_dir) / name

    def noise_model(self, n_qubits: int) -> NoiseModel | None:
        if self.noise == "off" or self.noise is None:
            return None
        if self.noise == "default":
            return NoiseModel.default(n_qubits)
        try:
            data = self.noise if isinstance(self.noise, dict) else json.loads(self.resolve(self.noise).read_text())
            return NoiseModel.from_dict(data)
        except (OSError, json.JSONDecodeError, ValueError, TypeError) as exc:
            raise ConfigError(f"config.noise: {exc}") from exc


# ------------------------------------------------------------------ problem


@dataclass(frozen=True)
class LoadedProblem:
    name: str
    circuit: Circuit
    hamiltonian: Hamiltonian
    optimum: dict


def load_problem(config: ExperimentConfig) -> LoadedProblem:
    try:
        if config.problem is not None:
            p = get_problem(config.problem, config.p)
            return LoadedProblem(p.name, p.circuit, p.hamiltonian, dict(p.optimum))
        if config.graph_file is not None:
            g = parse_graph(config.resolve(config.graph_file).read_text())
            return LoadedProblem("qaoa", qaoa_ansatz(g, config.p), maxcut_hamiltonian(g), {})
        circuit = parse_circuit(config.resolve(config.circuit_file).read_text())
        ham = parse_hamiltonian(config.resolve(config.hamiltonian_file).read_text(), circuit.n_qubits)
        return LoadedProblem("custom", circuit, ham, {})
    except KeyError as exc:
        raise ConfigError(f"config.problem: {exc.args[0]}") from exc
    except OSError as exc:
        raise ConfigError(f"config: cannot read input file: {exc}") from exc


def resolve_params(config: ExperimentConfig, problem: LoadedProblem) -> dict:
    params = config.params
    if params == "optimum":
        if not problem.optimum and problem.circuit.parameters:
            raise ConfigError("config.params: no stored optimum for this problem; give explicit values")
        params = problem.optimum
    if isinstance(params, (list, tuple)):
        if len(params) != len(problem.circuit.parameters):
            raise ConfigError(f"config.params: expected {len(problem.circuit.parameters)} values")
        params = dict(zip(problem.circuit.parameters, params))
    if not isinstance(params, Mapping):
        raise ConfigError("config.params: must be an object, a list or 'optimum'")
    missing = [p for p in problem.circuit.parameters if p not in params]
    if missing:
        raise ConfigError(f"config.params: missing {missing}")
    return {k: float(params[k]) for k in problem.circuit.parameters}


# --------------------------------------------------------------------- plan


@dataclass(frozen=True)
class Measurement:
    term: PauliTerm
    local_term: PauliTerm
    circuit: Circuit  # state preparation plus basis change, possibly compiled


@dataclass(frozen=True)
class PlannedCircuit:
    circuit_id: str
    circuit: Circuit
    qubit_map: Mapping[int, int]
    terms: tuple[PauliTerm, ...]
    shots: int | None
    measurements: tuple[Measurement, ...]
    budget: ShotBudget | None = None


@dataclass(frozen=True)
class Plan:
    strategy: str
    problem: LoadedProblem
    circuits: tuple[PlannedCircuit, ...]
    reduced: ReducedSet | None = None

    @property
    def total_shots(self) -> int:
        return sum((pc.shots or 0) * len(pc.measurements) for pc in self.circuits)


def _measurements(circuit: Circuit, terms: Sequence[PauliTerm], mapping: Mapping[int, int], config: ExperimentConfig) -> tuple[Measurement, ...]:
    out = []
    for t in terms:
        local = t.relabel(mapping)
        mc = measurement_circuit(circuit, local)
        if config.native:
            mc = compile_circuit(mc, config.opt_level)
        out.append(Measurement(t, local, mc))
    return tuple(out)


def build_plan(config: ExperimentConfig, problem: LoadedProblem | None = None, strategy: str | None = None, shots: int | None | str = "config") -> Plan:
    problem = problem or load_problem(config)
    strategy = strategy or config.strategy
    base_shots = config.shots if shots == "config" else shots
    ham = problem.hamiltonian
    if strategy == "full":
        ident = {q: q for q in range(problem.circuit.n_qubits)}
        terms = ham.measured_terms
        pc = PlannedCircuit("full", problem.circuit, ident, terms, base_shots, _measurements(problem.circuit, terms, ident, config))
        return Plan(strategy, problem, (pc,) if terms else ())
    rs = reduced_set(problem.circuit, ham)
    groups = group_all(rs, ham) if strategy == "reduced-accuracy" else minimal_cover(rs, ham)
    planned = []
    for sub in groups:
        red = sub.reduced
        budget = None
        n_shots = base_shots
        if config.budget is not None and base_shots is not None:
            budget = estimate_shots(sub, config.budget.epsilon, config.budget.rounding, scope=config.budget.scope, hamiltonian=ham)
            n_shots = budget.shots if config.budget.prescribed else budget.bound
        cid = f"c{sub.index}[{red.term.label}]"
        planned.append(
            PlannedCircuit(cid, red.circuit, dict(red.relabel), sub.owned, n_shots, _measurements(red.circuit, sub.owned, red.relabel, config), budget)
        )
    return Plan(strategy, problem, tuple(planned), rs)


# ----------------------------------------------------------------- evaluate


@dataclass(frozen=True)
class EnergyReport:
    strategy: str
    params: dict
    energy: float
    stderr: float
    total_shots: int
    exact_energy: float
    records: tuple[MeasurementRecord, ...]
    n_circuits: int

    @property
    def error(self) -> float:
        return self.energy - self.exact_energy

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "params": self.params,
            "energy": self.energy,
            "stderr": self.stderr,
            "total_shots": self.total_shots,
            "exact_energy": self.exact_energy,
            "delta_vs_exact": self.error,
            "n_circuits": self.n_circuits,
            "records": [r.to_dict() for r in self.records],
        }


def _bind_subset(circuit: Circuit, params: Mapping[str, float]) -> Circuit:
    return bind(circuit, {p: params[p] for p in circuit.parameters})


def _exact_record(cid: str, m: Measurement, bound: Circuit) -> MeasurementRecord:
    zterm = PauliTerm(1.0, tuple((q, "Z") for q in m.local_term.support))
    value = expectation(simulate(bound), zterm)
    return MeasurementRecord(cid, m.term, (), 0, {}, value, 0.0, (value, value))


def evaluate(
    config: ExperimentConfig,
    params: Mapping[str, float],
    plan: Plan | None = None,
    rng: np.random.Generator | None = None,
) -> EnergyReport:
    """Energy estimate at ``params``: identity coefficient plus the weighted owned-term estimates."""
    plan = plan or build_plan(config)
    problem = plan.problem
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    noise = config.noise_model(problem.circuit.n_qubits)
    records: list[MeasurementRecord] = []
    total = problem.hamiltonian.identity_coefficient
    var = 0.0
    for pc in plan.circuits:
        for m in pc.measurements:
            bound = _bind_subset(m.circuit, params)
            if pc.shots is None:
                rec = _exact_record(pc.circuit_id, m, bound)
            else:
                rec = sample(
                    bound, m.local_term.with_coefficient(m.term.coefficient), pc.shots, noise, rng=rng,
                    readout_correct=config.readout_correct, circuit_id=pc.circuit_id, basis_appended=True,
                )
                rec = replace(rec, term=m.term)
            records.append(rec)
            total += m.term.coefficient * rec.estimate
            var += (m.term.coefficient * rec.stderr) ** 2
    exact = exact_energy_of(simulate(_bind_subset(problem.circuit, params)), problem.hamiltonian)
    return EnergyReport(
        plan.strategy, dict(params), float(total), math.sqrt(var), sum(r.shots for r in records), float(exact), tuple(records), len(plan.circuits)
    )


# ----------------------------------------------------------------- optimize


@dataclass
class OptimizeResult:
    params: dict
    energy: float
    trace: list[dict]
    converged: bool
    evaluations: int


def optimize(config: ExperimentConfig, plan: Plan | None = None) -> OptimizeResult:
    """Nelder-Mead on the (sampled or exact) energy, with optional random restarts."""
    plan = plan or build_plan(config)
    problem = plan.problem
    names = problem.circuit.parameters
    opts = config.optimizer
    sign = -1.0 if opts.maximize else 1.0
    rng = np.random.default_rng(config.seed)
    trace: list[dict] = []
    evals = 0

    if not names or not problem.hamiltonian.measured_terms:
        e = evaluate(config, {}, plan, rng).energy if names == () else problem.hamiltonian.identity_coefficient
        start = {n: float((opts.initial or {}).get(n, 0.0)) for n in names}
        return OptimizeResult(start, float(e), [{"iteration": 0, "energy": float(e), "params": start}], True, 1)

    def objective(x: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        return sign * evaluate(config, dict(zip(names, map(float, x))), plan, rng).energy

    starts = []
    if opts.initial is not None:
        starts.append(np.array([float(opts.initial[n]) for n in names]))
    while len(starts) < 1 + opts.restarts:
        starts.append(rng.uniform(-math.pi, math.pi, len(names)))

    best = None
    for run, x0 in enumerate(starts):
        simplex = np.vstack([x0] + [x0 + opts.scale * np.eye(len(names))[i] for i in range(len(names))])
        seen: dict[tuple, float] = {}

        def f(x, _seen=seen):
            val = objective(x)
            _seen[tuple(np.round(x, 12))] = val
            return val

        def callback(xk, _seen=seen, _run=run):
            val = _seen.get(tuple(np.round(xk, 12)))
            trace.append({"run": _run, "iteration": len([t for t in trace if t["run"] == _run]) + 1,
                          "energy": None if val is None else sign * val, "params": dict(zip(names, map(float, xk)))})

        res = minimize(f, x0, method="Nelder-Mead", callback=callback,
                       options={"maxiter": opts.max_iter, "xatol": opts.tol, "fatol": opts.tol, "initial_simplex": simplex})
        if best is None or res.fun < best.fun:
            best = res
    assert best is not None
    return OptimizeResult(dict(zip(names, map(float, best.x))), float(sign * best.fun), trace, bool(best.success), evals)


# ---------------------------------------------------------------- calibrate


def calibrate_epsilon(config: ExperimentConfig, params: Mapping[str, float], repetitions: int | None = None) -> float:
    """Empirical 1-sigma spread of the full-strategy energy over repeated runs."""
    reps = config.repetitions if repetitions is None else repetitions
    if reps < 2:
        raise ConfigError("config.repetitions: calibration needs at least 2 repetitions")
    plan = build_plan(config, strategy="full")
    if config.shots is None:
        return 0.0
    energies = [evaluate(config, params, plan, np.random.default_rng([config.seed, r])).energy for r in range(reps)]
    return float(np.std(energies, ddof=1))


# --------------------------------------------------------------- experiment


def _write_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        path.write_text("")
        return
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def term_rows(report: EnergyReport, problem: LoadedProblem) -> list[dict]:
    """Per-term estimates against the noiseless in-silico values."""
    state = simulate(_bind_subset(problem.circuit, report.params))
    rows = []
    for r in report.records:
        ideal = expectation(state, r.term)
        rows.append({
            "circuit_id": r.circuit_id, "term": r.term.label, "coefficient": r.term.coefficient, "shots": r.shots,
            "estimate": r.estimate, "stderr": r.stderr, "in_silico": ideal, "abs_delta": abs(r.estimate - ideal),
        })
    return rows


def convergence_rows(config: ExperimentConfig, params: Mapping[str, float], problem: LoadedProblem, strategy: str) -> list[dict]:
    """Energy and per-term deviation as the shots per circuit grow."""
    rows = []
    for i, s in enumerate(config.convergence_shots):
        plan = build_plan(replace(config, budget=None), problem, strategy, shots=s)
        rep = evaluate(config, params, plan, np.random.default_rng([config.seed, 1000 + i]))
        for tr in term_rows(rep, problem):
            rows.append({"shots": s, "total_shots": rep.total_shots, "energy": rep.energy, "energy_stderr": rep.stderr,
                         "abs_energy_error": abs(rep.error), "term": tr["term"], "estimate": tr["estimate"],
                         "stderr": tr["stderr"], "abs_delta": tr["abs_delta"]})
    return rows


def run_experiment(config: ExperimentConfig | str | Path, out_dir: str | Path = "reports") -> dict[str, dict]:
    """Run every requested strategy and write ``report_<strategy>.json`` plus CSV tables."""
    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.load(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem = load_problem(config)
    results: dict[str, dict] = {}
    for strategy in config.strategies or [config.strategy]:
        plan = build_plan(config, problem, strategy)
        summary: dict[str, Any] = {"problem": problem.name, "strategy": strategy, "seed": config.seed}
        if config.mode == "optimize":
            opt = optimize(config, plan)
            params = opt.params
            summary["optimizer"] = {"converged": opt.converged, "evaluations": opt.evaluations, "trace": opt.trace}
        else:
            params = resolve_params(config, problem)
        report = evaluate(config, params, plan)
        summary.update(report.to_dict())
        summary["baseline_shots"] = len(problem.hamiltonian.measured_terms) * (config.shots or 0)
        if plan.reduced is not None:
            summary["reduced_circuits"] = [r.to_dict() for r in plan.reduced.circuits]
        budgets = [pc.budget.to_row() for pc in plan.circuits if pc.budget is not None]
        if budgets:
            summary["budget"] = budgets
        path = out / f"report_{strategy}.json"
        path.write_text(json.dumps(summary, indent=2))
        _write_csv(out / f"terms_{strategy}.csv", term_rows(report, problem))
        if config.shots is not None:
            _write_csv(out / f"convergence_{strategy}.csv", convergence_rows(config, params, problem, strategy))
        results[strategy] = summary
    return results
