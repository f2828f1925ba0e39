import json
import os
import subprocess
import sys

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def run(args, code=0, env=None):
    env = dict(env or os.environ)
    env["AUCTION_PROGRESS"] = "0"
    p = subprocess.run(
        [sys.executable, "-m", "src.cli", "--no-progress", *args],
        capture_output=True,
        text=True,
        env=env,
        cwd=ROOT,
    )
    assert p.returncode == code, f"stderr: {p.stderr}\nstdout: {p.stdout}"
    return json.loads(p.stdout) if code == 0 else json.loads(p.stderr)


def test_value_dp_prefers_the_switching_strategy():
    j = run(["--instance", "v_ex", "value-dp"])
    assert j["best_first_bid"] == [0, 1]
    assert j["W"] == "71/10"
    assert [r["bid"] for r in j["optimal_rollout"]] == [[0, 1], [1, 0]]


def test_best_bundle_and_constant_value():
    j = run(["--instance", "v_ex", "best-bundle"])
    assert j["best"] == [1, 0] and j["V"] == "69/10"
    j = run(["--instance", "single", "value-constant", "--bundle", "2"])
    assert j["V"] == "-1/2"


def test_reachable_prices():
    j = run(["--instance", "v_ex", "reachable"])
    assert j["count"] == 4


def test_grid_tie_exit_code_and_perturbation():
    err = run(["--instance", "v_sub", "simulate-discrete", "-k", "1,0", "--start", "1,1"], code=3)
    assert err["type"] == "GridTieError"
    assert "--perturb" in err["hint"]
    j = run(["--instance", "v_sub", "simulate-discrete", "-k", "1,0", "--start", "1,1", "--perturb"])
    assert j["payoff"] == "27999999/4000000"


def test_check_reports_substitutes_witness():
    j = run(["--instance", "v_ex", "check"])
    assert j["strictly_concave"] is True
    assert j["substitutes"] is False
    assert j["facet"]["normal"] == [1, 1]
    assert j["bidders"]["opponent"]["valid"] is True
    j = run(["--instance", "two_opponents", "check"])
    assert j["bidders"]["a"]["valid"] is True


def test_trace_with_discrete_oracle():
    j = run(["--instance", "v_sub", "trace-continuous", "-k", "1,1", "--start", "0,0", "--euler", "1/8"])
    assert j["trajectory"]["final_price"] == ["4", "3"]
    assert j["trajectory"]["mode"] == "exact"
    assert j["value"] == "7/2"
    assert j["euler"]["h"] == "1/8"


def test_unknown_scenario_is_a_validation_error():
    err = run(["--instance", "no_such_scenario", "value-dp"], code=2)
    assert err["type"] == "ValidationFailure"
    err = run(["value-dp"], code=2)
    assert err["field"] == "instance"


def test_saved_results_have_a_manifest(tmp_path):
    run(["--instance", "v_sub", "--out", str(tmp_path), "--format", "csv", "reachable"])
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert [f["name"] for f in manifest["files"]] == ["reachable.csv", "reachable.json"]
