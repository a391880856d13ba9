import csv
import json
import os
from dataclasses import replace

import pytest

import main
from agent import RLHyper
from errors import FormatVersionMismatch, InvalidConfig, StageInputMissing
from moea import MoeaConfig
from pipeline import (ARTIFACTS, SERIES, RunConfig, file_sha256, load_run_config,
                      run_config_from_dict, run_pipeline)
from scenario_loader import save_scenario

SMALL_RL = RLHyper(episodes=10, epochs=5, dqn_episodes=2)
SMALL_MOEA = MoeaConfig(n_subproblems=6, n_neighbors=3, generations=3)


@pytest.fixture
def scenario_file(tmp_path, relay_scenario):
    path = str(tmp_path / "scenario_in.json")
    save_scenario(relay_scenario, path)
    return path


def small_run(scenario_file, out, **overrides):
    cfg = RunConfig(scenario_path=scenario_file, output_dir=str(out), velocity_mode="corrected",
                    rl=SMALL_RL, moea=SMALL_MOEA, x2_levels=4)
    return replace(cfg, **overrides)


def test_full_run(tmp_path, scenario_file):
    out = tmp_path / "run"
    report = run_pipeline(small_run(scenario_file, out))

    assert report.stages == ["generate", "erm", "rl", "deploy", "mop", "plots"]
    assert report.partition_sizes == (1, 0, 12)
    for name in list(ARTIFACTS.values()) + list(SERIES.values()):
        assert (out / name).exists(), name

    with open(out / ARTIFACTS["partition"]) as f:
        part = json.load(f)
    assert part["set_a"] == [0]
    assert part["set_c"] == list(range(1, 13))

    with open(out / ARTIFACTS["deployment"]) as f:
        dep = json.load(f)
    assert sorted(m for p in dep["plans"] for m in p["members"]) == list(range(1, 13))

    with open(out / ARTIFACTS["front"]) as f:
        front = json.load(f)
    assert all(pt["feasible"] for pt in front["points"])
    assert front["velocity_mode"] == "corrected"
    assert front["hypervolume"]["value"] > 0


def test_plot_series_follow_artifacts(tmp_path, scenario_file):
    out = tmp_path / "run"
    run_pipeline(small_run(scenario_file, out))

    with open(out / SERIES["nodes"], newline="") as f:
        nodes = list(csv.DictReader(f))
    assert [int(r["id"]) for r in nodes] == list(range(13))
    assert nodes[0]["erm"] == "1"
    assert all(r["erm"] == "3" for r in nodes[1:])

    with open(out / SERIES["rl_rewards"], newline="") as f:
        rewards = list(csv.DictReader(f))
    assert {int(r["node"]) for r in rewards} <= set(range(1, 13))
    assert all(r["relay"] == "0" for r in rewards)

    with open(out / ARTIFACTS["deployment"]) as f:
        dep = json.load(f)
    with open(out / SERIES["auv_plans"], newline="") as f:
        plans = list(csv.DictReader(f))
    assert len(plans) == len(dep["plans"])
    with open(out / SERIES["clusters"], newline="") as f:
        assert sorted(int(r["node"]) for r in csv.DictReader(f)) == list(range(1, 13))


def test_manifest_matches_files(tmp_path, scenario_file):
    out = tmp_path / "run"
    run_pipeline(small_run(scenario_file, out))
    with open(out / ARTIFACTS["manifest"]) as f:
        manifest = json.load(f)
    assert ARTIFACTS["report"] in manifest["sha256"]
    for name, digest in manifest["sha256"].items():
        assert file_sha256(str(out / name)) == digest


def test_runs_are_reproducible(tmp_path, scenario_file):
    first, second = tmp_path / "a", tmp_path / "b"
    run_pipeline(small_run(scenario_file, first))
    run_pipeline(small_run(scenario_file, second))
    for name in list(ARTIFACTS.values()) + list(SERIES.values()):
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_stages_run_on_their_own(tmp_path, scenario_file):
    out = tmp_path / "run"
    run_pipeline(small_run(scenario_file, out, stages=("generate", "erm")))
    assert not (out / ARTIFACTS["deployment"]).exists()

    report = run_pipeline(small_run(scenario_file, out, stages=("deploy",)))
    assert report.stages == ["deploy"]
    assert report.deployment_summary["n_auvs"] >= 1
    assert (out / ARTIFACTS["deployment"]).exists()


def test_missing_upstream_artifact(tmp_path, scenario_file):
    with pytest.raises(StageInputMissing):
        run_pipeline(small_run(scenario_file, tmp_path / "empty", stages=("deploy",)))


def test_stale_artifact_version(tmp_path, scenario_file):
    out = tmp_path / "run"
    run_pipeline(small_run(scenario_file, out, stages=("generate", "erm")))
    path = out / ARTIFACTS["partition"]
    data = json.loads(path.read_text())
    data["format_version"] = 99
    path.write_text(json.dumps(data))
    with pytest.raises(FormatVersionMismatch):
        run_pipeline(small_run(scenario_file, out, stages=("deploy",)))


def test_invalid_scenario_is_rejected(tmp_path, make_scenario):
    path = str(tmp_path / "bad.json")
    save_scenario(make_scenario([(10.0, 10.0, 5.0)]), path)
    with pytest.raises(InvalidConfig):
        run_pipeline(RunConfig(scenario_path=path, output_dir=str(tmp_path / "run"),
                               stages=("generate",)))


class TestRunConfig:
    def test_unknown_key(self):
        with pytest.raises(InvalidConfig):
            run_config_from_dict({"scenario": "s.json", "colour": "blue"})

    def test_two_scenario_sources(self):
        with pytest.raises(InvalidConfig):
            run_config_from_dict({"scenario": "s.json", "generate": {"n_usns": 10}})

    def test_bad_velocity_mode(self):
        with pytest.raises(InvalidConfig):
            run_config_from_dict({"scenario": "s.json", "velocity_mode": "fast"})

    def test_bad_hyperparameter(self):
        with pytest.raises(InvalidConfig):
            run_config_from_dict({"scenario": "s.json", "rl": {"alpha": 0.0}})

    def test_version_mismatch(self):
        with pytest.raises(FormatVersionMismatch):
            run_config_from_dict({"format_version": 2, "scenario": "s.json"})

    def test_generation_block(self):
        cfg = run_config_from_dict({"generate": {"n_usns": 30, "n_max": 5,
                                                 "box": {"width": 300, "length": 300, "depth": 100}}})
        assert cfg.generate.n_usns == 30
        assert cfg.generate.box.depth == 100
        assert cfg.scenario_path is None

    def test_bundled_run_config(self, data_dir):
        cfg = load_run_config(os.path.join(data_dir, "default_run.json"))
        assert os.path.exists(cfg.scenario_path)
        assert cfg.velocity_mode == "corrected"
        assert cfg.rl.episodes == 200
        assert cfg.moea.generations == 40
        assert cfg.x2_levels == 16


class TestCommandLine:
    def test_generate(self, tmp_path):
        out = tmp_path / "gen"
        assert main.main(["generate", "--output-dir", str(out), "--seed", "3", "-q"]) == 0
        assert (out / ARTIFACTS["scenario"]).exists()

    def test_missing_input_exit_code(self, tmp_path):
        assert main.main(["deploy", "--output-dir", str(tmp_path / "empty"), "-q"]) == 3

    def test_missing_config_file(self, tmp_path):
        assert main.main(["all", "--config", str(tmp_path / "nope.json"), "-q"]) == 5

    def test_method_overrides(self, tmp_path):
        args = main.build_parser().parse_args(["erm", "--scenario", "s.json", "--no-dqn",
                                               "--output-dir", str(tmp_path)])
        cfg = main.build_config(args)
        assert cfg.methods == ("qlearning", "sarsa")
        assert cfg.stages == ("erm",)
        assert cfg.generate is None

    def test_unknown_method(self, tmp_path):
        args = main.build_parser().parse_args(["erm", "--methods", "qlearning,ppo"])
        with pytest.raises(InvalidConfig):
            main.build_config(args)


@pytest.mark.slow
def test_bundled_example_run(tmp_path, data_dir):
    cfg = load_run_config(os.path.join(data_dir, "default_run.json"))
    report = run_pipeline(replace(cfg, output_dir=str(tmp_path / "example")))
    assert sum(report.partition_sizes) == 16
    assert report.stages[-1] == "plots"
