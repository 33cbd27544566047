import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from factories import make_instance, random_instance
from helpercache.cli import config_digest, main
from helpercache.greedy import greedy_place
from helpercache.io import read_instance, read_placement, write_instance

DEMO_CONFIG = Path(__file__).resolve().parents[1] / "demos" / "configs" / "cell_default.json"


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("helpers", [25, 32, 45])
def test_generate_default_config(helpers, tmp_path, capsys):
    cfg = json.loads(DEMO_CONFIG.read_text())
    cfg["helpers"] = helpers
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    code, out, _ = run(["generate", path, "--out", tmp_path / "g"], capsys)
    assert code == 0
    inst = read_instance(tmp_path / "g" / "instance.json")
    scenario = json.loads((tmp_path / "g" / "scenario.json").read_text())
    assert inst.U == 300 and len(scenario["helpers"]) == helpers
    assert inst.H <= helpers
    manifest = json.loads((tmp_path / "g" / "manifest.json").read_text())
    assert manifest["seeds"] == [0] and "generate" in manifest["wall_clock_s"]


def test_generate_missing_field(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"users": 10, "helpers": 5}))
    code, _, err = run(["generate", path, "--out", tmp_path / "g"], capsys)
    assert code == 2 and "'files'" in err


def test_generate_bad_json(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text('{"users": 10,\n "files": }')
    code, _, err = run(["generate", path, "--out", tmp_path / "g"], capsys)
    assert code == 2 and "line 2" in err


def test_generate_unreachable_helper_count(tmp_path, capsys):
    cfg = json.loads(DEMO_CONFIG.read_text())
    cfg["helpers"] = 26
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    code, _, err = run(["generate", path, "--out", tmp_path / "g"], capsys)
    assert code == 2 and "nearest achievable" in err


def test_generate_is_deterministic(tmp_path, capsys):
    for d in ("a", "b"):
        assert run(["generate", DEMO_CONFIG, "--out", tmp_path / d, "--seed", 3], capsys)[0] == 0
    for name in ("instance.json", "scenario.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_solve_greedy_matches_library(tmp_path, capsys):
    inst = random_instance(np.random.default_rng(0), 6, 3, 8, 2)
    write_instance(inst, tmp_path / "i.json")
    code, out, _ = run(["solve", tmp_path / "i.json", "--algorithm", "greedy",
                        "--out", tmp_path / "x.json", "--trace", tmp_path / "t.json"], capsys)
    assert code == 0
    X, trace = greedy_place(read_instance(tmp_path / "i.json"))
    assert np.array_equal(read_placement(tmp_path / "x.json").x, X.x)
    assert f"savings={trace.objective!r}" in out
    assert json.loads((tmp_path / "t.json").read_text())[0]["step"] == 1
    assert (tmp_path / "x.json.manifest.json").exists()


@pytest.mark.parametrize("algorithm", ["coded", "lp-pipage", "exact"])
def test_solve_other_algorithms(algorithm, tmp_path, capsys):
    inst = random_instance(np.random.default_rng(1), 4, 3, 5, 1, special=True)
    write_instance(inst, tmp_path / "i.json")
    code, out, _ = run(["solve", tmp_path / "i.json", "--algorithm", algorithm,
                        "--out", tmp_path / "x.json"], capsys)
    assert code == 0 and out.startswith(f"algorithm={algorithm} objective=")
    code, out, _ = run(["evaluate", tmp_path / "i.json", tmp_path / "x.json"], capsys)
    assert code == 0 and "avg_rate_bps=" in out


def test_lp_pipage_needs_special_case(tmp_path, capsys):
    inst = make_instance([[1], [1]], 2.0, [[0.5], [0.6]], [1.0], 1)
    write_instance(inst, tmp_path / "i.json")
    code, _, err = run(["solve", tmp_path / "i.json", "--algorithm", "lp-pipage",
                        "--out", tmp_path / "x.json"], capsys)
    assert code == 3 and "special case required" in err


def test_exact_budget(tmp_path, capsys):
    inst = random_instance(np.random.default_rng(0), 10, 4, 5, 3)
    write_instance(inst, tmp_path / "i.json")
    code, _, err = run(["solve", tmp_path / "i.json", "--algorithm", "exact", "--budget", 1000,
                        "--out", tmp_path / "x.json"], capsys)
    assert code == 3 and "enumeration size 959512576" in err


def test_solver_failure_exit_code(tmp_path, capsys, monkeypatch):
    import helpercache.cli as cli
    from helpercache.lp import LPSolveError

    def boom(*a, **k):
        raise LPSolveError("infeasible")
    monkeypatch.setattr(cli, "solve_coded", boom)
    write_instance(make_instance([[1]], 2.0, 1.0, [1.0], 1), tmp_path / "i.json")
    code, _, err = run(["solve", tmp_path / "i.json", "--algorithm", "coded",
                        "--out", tmp_path / "x.json"], capsys)
    assert code == 4 and "solver failure" in err


def test_validate_and_evaluate_errors(tmp_path, capsys):
    write_instance(make_instance([[1, 1]], 2.0, [[1.0, 3.0]], [1.0], 1), tmp_path / "bad.json")
    code, out, _ = run(["validate", tmp_path / "bad.json"], capsys)
    assert code == 2 and "BS delay dominance" in out
    write_instance(make_instance([[1]], 2.0, 1.0, [0.5, 0.5], 1), tmp_path / "ok.json")
    assert run(["validate", tmp_path / "ok.json"], capsys)[:2] == (0, "ok\n")
    (tmp_path / "p.json").write_text(json.dumps(
        {"format": "helpercache-placement", "kind": "uncoded", "files": 2, "helpers": 1,
         "entries": [[1, 1], [2, 1]]}))
    code, _, err = run(["evaluate", tmp_path / "ok.json", tmp_path / "p.json"], capsys)
    assert code == 2 and "helper 1" in err
    code, _, _ = run(["validate", tmp_path / "ok.json", "--placement", tmp_path / "p.json"],
                     capsys)
    assert code == 2


def test_missing_file(tmp_path, capsys):
    code, _, err = run(["validate", tmp_path / "nope.json"], capsys)
    assert code == 2


def test_experiment_scaled_ordering_and_rerun(tmp_path, capsys):
    code, out, _ = run(["experiment", "helpers_sweep", "--scale", "0.2", "--threads", 1,
                        "--out", tmp_path / "a"], capsys)
    assert code == 0
    rows = (tmp_path / "a" / "fig4.csv").read_text().splitlines()
    assert rows[0] == "experiment,param,seed,scheme,avg_rate_bps"
    rates = {}
    for line in rows[1:]:
        _, p, s, scheme, v = line.split(",")
        rates.setdefault((int(p), scheme), []).append(float(v))
    for p in (25, 32, 45):
        mean = {k: np.mean(rates[(p, k)]) for k in ("bs", "greedy", "coded")}
        assert mean["coded"] >= mean["greedy"] >= mean["bs"]
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["config"]["files"] == 200 and manifest["seeds"] == [0, 1]
    assert manifest["config_digest"] == config_digest(manifest["config"])
    code, _, _ = run(["experiment", "--config", tmp_path / "a" / "manifest.json",
                      "--out", tmp_path / "b", "--threads", 1], capsys)
    assert code == 0
    assert (tmp_path / "a" / "fig4.csv").read_bytes() == (tmp_path / "b" / "fig4.csv").read_bytes()


def test_experiment_config_file_and_seeds(tmp_path, capsys):
    (tmp_path / "c.json").write_text(json.dumps(
        {"files": 20, "cache_size": 2, "users": 30, "helper_counts": [25]}))
    code, _, _ = run(["experiment", "mobility", "--config", tmp_path / "c.json", "--seed", 5,
                      "--seeds", 2, "--threads", 1, "--out", tmp_path / "m"], capsys)
    assert code == 0
    text = (tmp_path / "m" / "fig6.csv").read_text()
    assert {line.split(",")[2] for line in text.splitlines()[1:]} == {"5", "6"}
    assert {line.split(",")[3] for line in text.splitlines()[1:]} == {"bs", "agnostic",
                                                                      "adaptive"}
    (tmp_path / "bad.json").write_text(json.dumps({"filez": 3}))
    code, _, err = run(["experiment", "mobility", "--config", tmp_path / "bad.json",
                        "--out", tmp_path / "m2"], capsys)
    assert code == 2 and "filez" in err


def test_digest_is_canonical():
    # sha256 of the literal text {"a":0.1,"b":[1,2.5]}
    expected = "36eff2b3b0ebe7ba8e23f1047d7ec9a8ec60b50990ad68d867e3a3f0133fa035"
    assert config_digest({"b": [1, 2.5], "a": 0.1}) == expected


def test_console_script_runs(tmp_path):
    out = subprocess.run([sys.executable, "-m", "helpercache.cli", "--version"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip() == "0.1.0"
