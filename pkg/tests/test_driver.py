import json
import math

import numpy as np
import pytest

from lightcone.driver import (
    BudgetSettings,
    ConfigError,
    ExperimentConfig,
    OptimizerSettings,
    build_plan,
    calibrate_epsilon,
    evaluate,
    load_problem,
    optimize,
    resolve_params,
    run_experiment,
)
from lightcone.problems import DEUTERON_OPTIMUM


def test_exact_full_and_reduced_agree():
    for problem in ("deuteron", "dragon"):
        rng = np.random.default_rng(4)
        base = ExperimentConfig(problem=problem, shots=None)
        names = load_problem(base).circuit.parameters
        for _ in range(3):
            params = {k: float(rng.uniform(-math.pi, math.pi)) for k in names}
            energies = [evaluate(ExperimentConfig(problem=problem, shots=None, strategy=s), params).energy
                        for s in ("full", "reduced-accuracy", "reduced-cover")]
            assert max(energies) - min(energies) < 1e-10


def test_exact_energy_at_optimum():
    rep = evaluate(ExperimentConfig(shots=None), DEUTERON_OPTIMUM)
    assert rep.energy == pytest.approx(-2.14178, abs=1e-4)
    assert rep.stderr == 0 and rep.total_shots == 0


def test_sampled_full_within_three_sigma():
    rep = evaluate(ExperimentConfig(shots=5000, seed=11), DEUTERON_OPTIMUM)
    assert rep.total_shots == 50000
    assert abs(rep.error) <= 3 * rep.stderr


def test_zero_gate_circuit(tmp_path):
    (tmp_path / "c.txt").write_text("qubits 1\n")
    (tmp_path / "h.txt").write_text("1.0 Z0\n")
    cfg = ExperimentConfig(problem=None, circuit_file="c.txt", hamiltonian_file="h.txt", base_dir=str(tmp_path), shots=100, params={})
    assert evaluate(cfg, {}).energy == 1.0


def test_constant_hamiltonian(tmp_path):
    (tmp_path / "c.txt").write_text("qubits 1\nH 0\n")
    (tmp_path / "h.txt").write_text("-1.5\n")
    cfg = ExperimentConfig(problem=None, circuit_file="c.txt", hamiltonian_file="h.txt", base_dir=str(tmp_path), params={})
    for s in ("full", "reduced-accuracy", "reduced-cover"):
        plan = build_plan(cfg, strategy=s)
        assert plan.total_shots == 0
        assert evaluate(cfg, {}, plan).energy == -1.5


def test_optimizer_every_random_start_converges():
    energies = [optimize(ExperimentConfig(shots=None, mode="optimize", seed=s)).energy for s in range(20)]
    assert max(energies) <= -2.13


def test_optimizer_restarts_keep_best():
    res = optimize(ExperimentConfig(shots=None, mode="optimize", seed=5, optimizer=OptimizerSettings(restarts=3)))
    assert res.energy <= -2.13
    assert {t["run"] for t in res.trace} == {0, 1, 2, 3}


def test_optimizer_dragon_from_nearby_start():
    init = {"gamma": 1.2, "beta": 2.3}
    cfg = ExperimentConfig(problem="dragon", shots=None, mode="optimize", optimizer=OptimizerSettings(initial=init, scale=0.2))
    assert optimize(cfg).energy == pytest.approx(-3.45, abs=5e-3)


def test_maximize_flips_sign():
    cfg = ExperimentConfig(problem="dragon", shots=None, mode="optimize",
                           optimizer=OptimizerSettings(initial={"gamma": 1.2, "beta": 2.3}, maximize=True))
    assert optimize(cfg).energy > -1.0


def test_calibrate():
    with pytest.raises(ConfigError):
        calibrate_epsilon(ExperimentConfig(), DEUTERON_OPTIMUM, 1)
    assert calibrate_epsilon(ExperimentConfig(shots=None), DEUTERON_OPTIMUM, 3) == 0.0
    cfg = ExperimentConfig(shots=500, seed=2)
    a = calibrate_epsilon(cfg, DEUTERON_OPTIMUM, 10)
    assert a == calibrate_epsilon(cfg, DEUTERON_OPTIMUM, 10)
    assert 0 < a < 1


def test_seeded_runs_are_reproducible():
    cfg = ExperimentConfig(shots=300, seed=9, strategy="reduced-cover", noise="default", readout_correct=True)
    assert evaluate(cfg, DEUTERON_OPTIMUM).energy == evaluate(cfg, DEUTERON_OPTIMUM).energy


def test_native_plan_matches_exact():
    params = DEUTERON_OPTIMUM
    e0 = evaluate(ExperimentConfig(shots=None), params).energy
    for lvl in (0, 1):
        cfg = ExperimentConfig(shots=None, native=True, opt_level=lvl, strategy="reduced-cover")
        assert evaluate(cfg, params).energy == pytest.approx(e0, abs=1e-10)


def test_budget_plan_totals():
    cfg = ExperimentConfig(problem="dragon", strategy="reduced-cover", budget=BudgetSettings(0.034, scope="hamiltonian"))
    assert build_plan(cfg).total_shots == 5410
    cfg = ExperimentConfig(problem="dragon", strategy="reduced-cover", budget=BudgetSettings(0.034, scope="hamiltonian", prescribed=True))
    assert build_plan(cfg).total_shots == 5500


@pytest.mark.parametrize(
    "data",
    [
        {"shots": 0},
        {"shots": -5},
        {"strategy": "bogus"},
        {"mode": "train"},
        {"opt_level": 3},
        {"bogus_key": 1},
        {"problem": None},
        {"problem": None, "circuit_file": "a.txt"},
        {"budget": {"epsilon": 0}},
        {"budget": {"epsilon": 0.1, "scope": "nope"}},
        {"optimizer": {"scale": -1}},
        {"optimizer": {"stepsize": 1}},
        {"repetitions": 0},
        {"mode": "evaluate", "params": None},
    ],
)
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(data)


def test_config_errors_name_the_key():
    with pytest.raises(ConfigError, match=r"config\.shots"):
        ExperimentConfig.from_dict({"shots": 0})


def test_unknown_problem_and_params():
    with pytest.raises(ConfigError):
        load_problem(ExperimentConfig(problem="nope"))
    cfg = ExperimentConfig(params=[1.0])
    with pytest.raises(ConfigError):
        resolve_params(cfg, load_problem(cfg))
    cfg = ExperimentConfig(params={"phi": 1.0})
    with pytest.raises(ConfigError):
        resolve_params(cfg, load_problem(cfg))


def test_load_missing_and_bad_json(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "none.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(bad)


def test_run_experiment_writes_reports(tmp_path):
    cfg = {
        "problem": "deuteron",
        "strategies": ["full", "reduced-accuracy", "reduced-cover"],
        "shots": 200,
        "convergence_shots": [50, 100],
        "seed": 3,
    }
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(cfg))
    res = run_experiment(path, tmp_path / "out")
    assert set(res) == {"full", "reduced-accuracy", "reduced-cover"}
    for s in res:
        data = json.loads((tmp_path / "out" / f"report_{s}.json").read_text())
        assert data["exact_energy"] == pytest.approx(-2.14178, abs=1e-4)
        assert (tmp_path / "out" / f"terms_{s}.csv").read_text().startswith("circuit_id,term")
        assert (tmp_path / "out" / f"convergence_{s}.csv").exists()
    assert res["full"]["total_shots"] == 2000
    assert res["reduced-cover"]["n_circuits"] == 2


def test_run_experiment_dragon_budget(tmp_path):
    cfg = ExperimentConfig(problem="dragon", strategies=["reduced-cover"], budget=BudgetSettings(0.034, scope="hamiltonian"),
                           convergence_shots=[100])
    res = run_experiment(cfg, tmp_path)
    assert res["reduced-cover"]["total_shots"] == 5410
    assert len(res["reduced-cover"]["budget"]) == 5
