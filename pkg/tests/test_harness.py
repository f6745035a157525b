import json

import numpy as np
import pytest

from oscbox.ball_basis import build_dyadic_tree
from oscbox.cli import main
from oscbox.harness import (EXPERIMENTS, ExperimentConfig, Report,
                            brute_alpha_osc, eps_from_mode, make_witness,
                            replay_witness, run_experiment)
from oscbox.martingale_ops import TransformSpec
from oscbox.random_functions import rng_for_trial, sample_leaf_values


def small_cfg(experiment, **kw):
    # grid experiments sweep {n/4, n/2, n}; keep the smallest member >= 16
    # so the empirical constants are meaningful
    base = dict(experiment=experiment, depth=5, n=64, trials=5, seed=11)
    base.update(kw)
    return ExperimentConfig(**base)


# ---------------------------------------------------------------------------
# config and report plumbing


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig("nosuch")
    with pytest.raises(ValueError):
        ExperimentConfig("axioms", n=12)
    with pytest.raises(ValueError):
        ExperimentConfig("axioms", alpha=1.0)
    with pytest.raises(ValueError):
        ExperimentConfig("axioms", fmt="xml")
    with pytest.raises(ValueError):
        ExperimentConfig("axioms", function_family="spikes")
    with pytest.raises(ValueError):
        ExperimentConfig("axioms", omega_id="quad")


def test_report_passed_logic():
    rep = Report("axioms", {})
    rep.add_check("a", True)
    rep.add_check("b", None, "skipped on purpose")
    assert rep.passed
    rep.add_check("c", False)
    assert not rep.passed


def test_report_serialization_excludes_wall_time():
    rep = Report("axioms", {"seed": 1})
    rep.add_check("a", True, "fine")
    rep.wall_time_s = 123.456
    blob = rep.to_json_bytes()
    assert b"wall_time" not in blob
    doc = json.loads(blob)
    assert doc["schema"] == "oscbox-report/1"
    assert doc["passed"] is True


def test_report_csv_format():
    rep = Report("norms", {"seed": 1})
    rep.add_check("a", True)
    rep.records.append({"trial": 0, "x": 1.5})
    lines = rep.to_csv_bytes().decode().strip().split("\n")
    assert lines[0] == "kind,index,key,value"
    assert any(line.startswith("record,0,x,") for line in lines)


# ---------------------------------------------------------------------------
# experiments run and pass at small scale


@pytest.mark.parametrize("experiment", EXPERIMENTS)
def test_experiment_passes(experiment):
    rep = run_experiment(small_cfg(experiment))
    failing = [c for c in rep.checks if c["status"] == "fail"]
    assert not failing, failing
    assert rep.wall_time_s is not None


@pytest.mark.parametrize("experiment", EXPERIMENTS)
def test_experiment_deterministic(experiment):
    cfg = small_cfg(experiment)
    a = run_experiment(cfg).to_json_bytes()
    b = run_experiment(cfg).to_json_bytes()
    assert a == b
    csv_a = run_experiment(cfg).to_csv_bytes()
    csv_b = run_experiment(cfg).to_csv_bytes()
    assert csv_a == csv_b


def test_different_seeds_differ():
    a = run_experiment(small_cfg("norms", seed=1)).to_json_bytes()
    b = run_experiment(small_cfg("norms", seed=2)).to_json_bytes()
    assert a != b


def test_jn_staircase_fits():
    rep = run_experiment(small_cfg("jn", depth=10, function_family="staircase"))
    fit = next(c for c in rep.checks if c["name"] == "jn-fit-geometric")
    assert fit["status"] == "pass"
    halving = next(c for c in rep.checks if c["name"] == "jn-halving")
    assert halving["status"] == "pass"


def test_jn_random_reports_ill_conditioned():
    rep = run_experiment(small_cfg("jn", depth=4, trials=2))
    fit = next(c for c in rep.checks if c["name"] == "jn-fit-geometric")
    assert fit["status"] in ("pass", "skipped")


# ---------------------------------------------------------------------------
# eps flag


def test_eps_modes(tmp_path):
    tree = build_dyadic_tree(3, 1)
    ones = eps_from_mode(tree, "ones", 1)
    assert all(v == 1.0 for v in ones.epsilon.values())
    signs_a = eps_from_mode(tree, "signs:5", 1)
    signs_b = eps_from_mode(tree, "signs:5", 99)
    assert signs_a.epsilon == signs_b.epsilon  # explicit seed wins
    path = tmp_path / "eps.json"
    path.write_text(ones.to_json())
    explicit = eps_from_mode(tree, f"explicit:{path}", 1)
    assert explicit.epsilon == ones.epsilon
    with pytest.raises(ValueError):
        eps_from_mode(tree, "zeros", 1)


# ---------------------------------------------------------------------------
# witnesses and replay


def test_replay_alpha_oracle_roundtrip():
    tree = build_dyadic_tree(3, 1)
    vals = rng_for_trial(3, 0).uniform(-1, 1, tree.n_leaves)
    w = make_witness("alpha-oracle", tree, vals, alpha=0.7, node=1)
    ok, detail = replay_witness(w)
    assert ok, detail


def test_replay_localization():
    tree = build_dyadic_tree(4, 1)
    rng = rng_for_trial(3, 1)
    vals = rng.uniform(-1, 1, tree.n_leaves)
    eps = TransformSpec.signs(tree, rng).as_array(tree)
    w = make_witness("localization-defect", tree, vals, op="maximal-star",
                     eps=[float(x) for x in eps], level=1, bound=1e-12)
    ok, _ = replay_witness(w)
    assert ok


def test_replay_stability_detects_failure():
    ok, _ = replay_witness({"check": "stability",
                            "params": {"values": [1.0, 1.5], "factor": 2.0}})
    assert ok
    bad, _ = replay_witness({"check": "stability",
                             "params": {"values": [1.0, 3.0], "factor": 2.0}})
    assert not bad


def test_replay_weak_l1_and_two_balls():
    tree = build_dyadic_tree(3, 1)
    vals = rng_for_trial(3, 2).uniform(-1, 1, tree.n_leaves)
    assert replay_witness(make_witness("weak-l1", tree, vals))[0]
    assert replay_witness(make_witness("two-balls", tree))[0]


def test_replay_unknown_check():
    with pytest.raises(ValueError):
        replay_witness({"check": "nonsense", "params": {}})


def test_brute_alpha_osc_guard():
    tree = build_dyadic_tree(5, 1)
    with pytest.raises(ValueError):
        brute_alpha_osc(tree, np.zeros(tree.n_leaves), tree.root, 0.5)


# ---------------------------------------------------------------------------
# CLI


def test_cli_runs_and_writes_report(tmp_path):
    out = tmp_path / "report.json"
    rc = main(["axioms", "--depth", "4", "--trials", "3", "--out", str(out)])
    assert rc == 0
    doc = json.loads(out.read_bytes())
    assert doc["experiment"] == "axioms"
    assert doc["passed"] is True


def test_cli_csv_output(tmp_path):
    out = tmp_path / "report.csv"
    rc = main(["norms", "--depth", "4", "--trials", "2", "--format", "csv",
               "--out", str(out)])
    assert rc == 0
    assert out.read_bytes().startswith(b"kind,index,key,value")


def test_cli_deterministic_files(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["equiv", "--trials", "3", "--seed", "5", "--alpha", "0.9"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_replay(tmp_path):
    tree = build_dyadic_tree(3, 1)
    vals = sample_leaf_values("random-uniform", tree, rng_for_trial(2, 0))
    w = make_witness("weak-l1", tree, vals)
    path = tmp_path / "witness.json"
    path.write_text(json.dumps(w))
    assert main(["axioms", "--replay", str(path)]) == 0


def test_cli_rejects_bad_experiment():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
