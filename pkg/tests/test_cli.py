import json

import pytest

from ahubench.cli import main
from ahubench.harness import Trajectory
from ahubench.rl.policy import policy_load, policy_save

from helpers import constant_policy

SHORT = """
[simulation]
duration = 7200.0
warmup = 600.0

[ppo]
rollout_length = 64
minibatch_size = 16
epochs_per_update = 2
hidden_sizes = [8, 8]
"""


@pytest.fixture
def short(tmp_path):
    path = tmp_path / "short.toml"
    path.write_text(SHORT)
    return path


@pytest.fixture
def policies(tmp_path):
    a, b = tmp_path / "fixed.json", tmp_path / "econ.json"
    policy_save(constant_policy(0.4), a)
    policy_save(constant_policy(0.4, "ppo-econ"), b)
    return a, b


def test_simulate_nominal_onoff(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    assert main(["simulate", "--mode", "onoff", "--out", str(out)]) == 0
    assert len(Trajectory.from_csv(out)) == 86400
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["max_co2"] > 1000


def test_simulate_is_byte_identical(tmp_path, short):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert main(["simulate", "--mode", "pid", "--scenario", str(short), "--out", str(out),
                     "--quiet"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_learned_mode_needs_policy(tmp_path, capsys):
    assert main(["simulate", "--mode", "ppo", "--out", str(tmp_path / "x.csv")]) == 1
    assert "policy" in capsys.readouterr().err
    assert not (tmp_path / "x.csv").exists()


def test_train_then_evaluate(tmp_path, short, capsys, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    pol_a, pol_b = tmp_path / "a.json", tmp_path / "b.json"
    progress = tmp_path / "progress.csv"
    argv = ["train", "--scenario", str(short), "--timesteps", "128", "--seed", "42", "--quiet"]
    assert main(argv + ["--out", str(pol_a), "--progress", str(progress)]) == 0
    assert main(argv + ["--out", str(pol_b)]) == 0
    assert pol_a.read_bytes() == pol_b.read_bytes()
    meta = policy_load(pol_a).metadata
    assert meta["seed"] == 42 and meta["created"].startswith("2023-11-14")
    assert progress.read_text().startswith("update_index,")
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a.json", "b.json", "progress.csv",
                                                          "short.toml"]

    out = tmp_path / "metrics.json"
    assert main(["evaluate", "--policy", str(pol_a), "--scenario", str(short),
                 "--out", str(out)]) == 0
    assert set(json.loads(out.read_text())) >= {"total_kwh", "temp_rmse_post_warmup", "max_co2"}


def test_train_rejects_baseline_mode(tmp_path):
    assert main(["train", "--mode", "pid", "--out", str(tmp_path / "p.json")]) == 1


def test_compare_with_policies(tmp_path, short, policies, capsys):
    a, b = tmp_path / "r1.json", tmp_path / "r2.json"
    fixed, econ = policies
    argv = ["compare", "--scenario", str(short), "--policy", f"ppo={fixed}",
            "--policy", f"ppo-econ={econ}"]
    assert main(argv + ["--out", str(a)]) == 0
    assert "ppo-econ" in capsys.readouterr().out
    assert main(argv + ["--out", str(b), "--quiet"]) == 0
    assert a.read_bytes() == b.read_bytes()
    report = json.loads(a.read_text())
    assert set(report["per_mode"]) == {"onoff", "pid", "ppo", "ppo-econ"}


def test_compare_bare_policy_path_and_mode_subset(tmp_path, short, policies):
    out = tmp_path / "r.json"
    assert main(["compare", "--scenario", str(short), "--mode", "pid", "--mode", "ppo",
                 "--policy", str(policies[0]), "--out", str(out), "--quiet"]) == 0
    assert set(json.loads(out.read_text())["per_mode"]) == {"pid", "ppo"}


def test_compare_without_policy_is_usage_error(short, capsys):
    assert main(["compare", "--scenario", str(short)]) == 1
    assert "--train-missing" in capsys.readouterr().err


def test_compare_trains_missing_in_memory(tmp_path, short):
    out = tmp_path / "r.json"
    assert main(["compare", "--scenario", str(short), "--mode", "ppo", "--train-missing",
                 "--timesteps", "64", "--out", str(out), "--quiet"]) == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["r.json", "short.toml"]


def test_validate_scenario_echo(short, capsys):
    assert main(["validate-scenario", "--scenario", str(short)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["simulation"]["duration"] == 7200.0
    assert doc["building"]["M_air_eff"] == 14400.0


def test_validate_rejects_co2_limit_below_outdoor(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[building]\nCO2_limit = 400.0\nCO2_out = 400.0\n")
    assert main(["validate-scenario", "--scenario", str(bad)]) == 1
    assert "config error" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [[], ["launch"], ["simulate", "--bogus"],
                                  ["simulate", "--mode", "turbo", "--out", "x"],
                                  ["simulate", "--mode", "pid"]])
def test_usage_errors(argv, capsys):
    assert main(argv) == 1
    assert capsys.readouterr().err


def test_runtime_errors_exit_two(tmp_path, capsys):
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert main(["evaluate", "--policy", str(broken)]) == 2
    assert "not valid JSON" in capsys.readouterr().err


def test_log_level_from_environment(tmp_path, short, monkeypatch, capsys, policies):
    monkeypatch.setenv("AHU_LOG", "info")
    assert main(["train", "--scenario", str(short), "--timesteps", "64",
                 "--out", str(tmp_path / "p.json")]) == 0
    assert "update 0" in capsys.readouterr().err
