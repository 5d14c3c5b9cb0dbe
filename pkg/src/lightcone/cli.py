"""Command line interface: ``lightcone reduce|plan|compile|run|experiment|calibrate``.

Exit codes: 0 success, 2 configuration or input error, 3 numeric guard.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

from .circuit import CircuitError, serialize
from .cone import reduced_set
from .driver import (
    ConfigError,
    ExperimentConfig,
    build_plan,
    calibrate_epsilon,
    convergence_rows,
    evaluate,
    load_problem,
    resolve_params,
    run_experiment,
)
from .grouping import estimate_shots, group_all, minimal_cover
from .native import compile_circuit, count_report
from .pauli import HamiltonianError, SizeLimitError
from .simulator import ReadoutError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _config(args) -> ExperimentConfig:
    if getattr(args, "config", None):
        cfg = ExperimentConfig.load(args.config)
    else:
        kw = {}
        if args.circuit or args.hamiltonian:
            kw.update(problem=None, circuit_file=args.circuit, hamiltonian_file=args.hamiltonian)
        else:
            kw["problem"] = args.problem
        cfg = ExperimentConfig(**kw)
    over = {}
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "shots", None) is not None:
        over["shots"] = None if args.shots == 0 else args.shots
    if getattr(args, "noise", None) is not None:
        over["noise"] = args.noise
    if getattr(args, "readout_correct", False):
        over["readout_correct"] = True
    if getattr(args, "strategy", None) and args.command in ("run", "calibrate"):
        over["strategy"] = args.strategy
    if getattr(args, "native", False):
        over["native"] = True
    if getattr(args, "opt_level", None) is not None:
        over["opt_level"] = args.opt_level
    if getattr(args, "params", None):
        over["params"] = json.loads(args.params) if args.params.strip().startswith(("{", "[")) else args.params
    return replace(cfg, **over) if over else cfg


def _emit(text: str, out: str | None, name: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    (path / name).write_text(text)
    print(path / name)


def _csv_text(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _jsonl(rows: list[dict]) -> str:
    return "".join(json.dumps(r) + "\n" for r in rows)


def cmd_reduce(args) -> int:
    cfg = _config(args)
    prob = load_problem(cfg)
    rs = reduced_set(prob.circuit, prob.hamiltonian)
    rows = []
    for e in rs.entries:
        d = e.to_dict()
        d["circuit_index"] = rs.term_index[e.term.label]
        rows.append(d)
    if args.format == "csv":
        text = _csv_text([{k: v for k, v in r.items() if k not in ("circuit", "qubit_map", "cone_gates")} for r in rows])
    else:
        text = _jsonl(rows)
    _emit(text, args.out, f"reduce.{args.format if args.format == 'csv' else 'jsonl'}")
    return EXIT_OK


def cmd_plan(args) -> int:
    cfg = _config(args)
    prob = load_problem(cfg)
    rs = reduced_set(prob.circuit, prob.hamiltonian)
    groups = group_all(rs, prob.hamiltonian) if args.strategy == "accuracy" else minimal_cover(rs, prob.hamiltonian)
    rows = []
    for sub in groups:
        b = estimate_shots(sub, args.epsilon, scope=args.scope, hamiltonian=prob.hamiltonian)
        row = b.to_row()
        row["owned"] = " ".join(t.label for t in sub.owned)
        rows.append(row)
    text = _csv_text(rows) if args.format == "csv" else json.dumps(rows, indent=2) + "\n"
    _emit(text, args.out, f"plan.{args.format}")
    return EXIT_OK


def cmd_compile(args) -> int:
    cfg = _config(args)
    prob = load_problem(cfg)
    target = compile_circuit(prob.circuit, args.opt_level) if args.native else prob.circuit
    if args.report:
        rows = count_report(prob.circuit, target)
        text = _csv_text(rows) if args.format == "csv" else json.dumps(rows, indent=2) + "\n"
    else:
        text = serialize(target)
    _emit(text, args.out, "compiled.txt" if not args.report else f"gate_counts.{args.format}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    prob = load_problem(cfg)
    params = resolve_params(cfg, prob)
    plan = build_plan(cfg, prob)
    report = evaluate(cfg, params, plan)
    records = _jsonl([r.to_dict() for r in report.records])
    summary = {k: v for k, v in report.to_dict().items() if k != "records"}
    if args.out is None:
        sys.stdout.write(records)
        print(json.dumps(summary))
        return EXIT_OK
    _emit(records, args.out, "records.jsonl")
    _emit(json.dumps(summary, indent=2) + "\n", args.out, "summary.json")
    if cfg.shots is not None:
        _emit(_csv_text(convergence_rows(cfg, params, prob, cfg.strategy)), args.out, "convergence.csv")
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = _config(args)
    results = run_experiment(cfg, args.out or "reports")
    for strategy, rep in results.items():
        print(f"{strategy}: energy={rep['energy']:.6f} stderr={rep['stderr']:.6f} shots={rep['total_shots']}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = _config(args)
    prob = load_problem(cfg)
    eps = calibrate_epsilon(cfg, resolve_params(cfg, prob), args.reps)
    print(json.dumps({"epsilon": eps, "repetitions": args.reps or cfg.repetitions, "shots": cfg.shots}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lightcone", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, shots=False):
        p.add_argument("--config", help="experiment config (JSON)")
        p.add_argument("--problem", default="deuteron", help="builtin problem: deuteron or dragon")
        p.add_argument("--circuit", help="circuit file (text format)")
        p.add_argument("--hamiltonian", help="Hamiltonian file")
        p.add_argument("--out", help="output directory (default: stdout)")
        p.add_argument("--seed", type=int)
        p.add_argument("--format", choices=("json", "csv"), default="json")
        if shots:
            p.add_argument("--shots", type=int, help="shots per measured term; 0 means exact expectation")
            p.add_argument("--noise", help="off, default, or a JSON noise file")
            p.add_argument("--readout-correct", action="store_true")
            p.add_argument("--params", help="JSON object/list of parameter values, or 'optimum'")
            p.add_argument("--strategy", choices=("full", "reduced-accuracy", "reduced-cover"))

    p = sub.add_parser("reduce", help="causal-cone reduction per term")
    common(p)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("plan", help="grouping and shot budget table")
    common(p)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--strategy", choices=("accuracy", "cover"), default="accuracy")
    p.add_argument("--scope", choices=("group", "hamiltonian"), default="group")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("compile", help="compile to native trapped-ion gates")
    common(p)
    p.add_argument("--native", action="store_true", help="emit {RX, RY, RZ, XX} gates")
    p.add_argument("--opt-level", type=int, choices=(0, 1), default=1)
    p.add_argument("--report", action="store_true", help="gate-count table before/after")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("run", help="sample one strategy and emit measurement records")
    common(p, shots=True)
    p.add_argument("--native", action="store_true")
    p.add_argument("--opt-level", type=int, choices=(0, 1))
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("experiment", help="full pipeline from a config file")
    common(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("calibrate", help="estimate epsilon from repeated full-strategy runs")
    common(p, shots=True)
    p.add_argument("--reps", type=int)
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CircuitError, HamiltonianError, ValueError, OSError, json.JSONDecodeError) as exc:
        if isinstance(exc, ReadoutError):
            print(f"lightcone: numeric error: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"lightcone: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SizeLimitError, FloatingPointError, ArithmeticError) as exc:
        print(f"lightcone: numeric guard: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
