import json
import os

import pytest

from navbench import cli, config
from navbench.runtime import DEFAULT_RATES, PipelineConfig
from navbench.sim.world import load_world


def test_presets_load():
    sim = config.load("sim-tuned")
    real = config.load("real-params")
    assert sim.pipeline.planner.mode == "sim_tuned" and real.pipeline.planner.mode == "real_params"
    assert {sim.pipeline_for(d).csf.rigidness for d in ("easy", "medium", "hard")} == {1, 3}
    assert {real.pipeline_for(d).csf.rigidness for d in ("easy", "medium", "hard")} == {2}


def test_defaults_without_source():
    root = config.load(None)
    assert root.pipeline == PipelineConfig()


def test_unknown_keys_rejected(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("pipeline:\n  planner:\n    warp_speed: 9\n")
    with pytest.raises(config.ConfigError, match="warp_speed"):
        config.load(str(p))
    with pytest.raises(config.ConfigError):
        config.load(None, ["bogus=1"])


def test_type_errors_rejected():
    with pytest.raises(config.ConfigError):
        config.load(None, ["pipeline.alpha=fast"])
    with pytest.raises(config.ConfigError):
        config.load(None, ["pipeline.alpha=1.7"])
    with pytest.raises(config.ConfigError):
        config.load(None, ["pipeline.edge_masking=3"])


def test_missing_source():
    with pytest.raises(config.ConfigError):
        config.load("no-such-preset")


def test_precedence_file_then_overrides(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"pipeline": {"alpha": 0.5, "planner": {"v_max": 1.2}}}))
    root = config.load(str(p), ["pipeline.alpha=0.3"])
    assert root.pipeline.alpha == 0.3 and root.pipeline.planner.v_max == 1.2
    assert root.pipeline.planner.omega_max == PipelineConfig().planner.omega_max


def test_round_trip_through_dict():
    root = config.load("sim-tuned", ["bench.n_runs=4"])
    again = config.build(config.RootConfig, config.to_dict(root))
    assert again == root


def test_mode_switch_resets_default_rates():
    root = config.load("real-params")
    assert root.pipeline_for("easy", "mono").rates == DEFAULT_RATES["mono"]
    custom = config.load("real-params", ["pipeline.rates=[10, 8, 12]"])
    assert custom.pipeline_for("easy", "mono").rates == (10.0, 8.0, 12.0)


def test_override_syntax():
    assert config.parse_override("a.b.c=[1, 2]") == {"a": {"b": {"c": [1, 2]}}}
    with pytest.raises(config.ConfigError):
        config.parse_override("novalue")


# ---------------------------------------------------------------- CLI

def read(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_invalid_mode_exits_nonzero(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "--mode", "sonar"])
    assert exc.value.code != 0
    assert "usage" in capsys.readouterr().err


def test_invalid_goal_exits_nonzero():
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "--goal", "15"])
    assert exc.value.code != 0


def test_config_error_exit_code(tmp_path, capsys):
    assert cli.main(["run", "--config", "nope", "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_run_writes_identical_records(tmp_path, capsys):
    args = ["run", "--difficulty", "easy", "--goal", "10", "--mode", "mono", "--config", "real-params", "--seed", "1"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    out = capsys.readouterr().out
    assert "outcome:" in out and "path length:" in out and "goal distance: 10 m" in out
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    names = sorted(os.listdir(tmp_path / "a"))
    assert names == ["run-easy-10m-mono-s1.csv", "run-easy-10m-mono-s1.json"]
    for n in names:
        assert read(tmp_path / "a" / n) == read(tmp_path / "b" / n)
    doc = json.loads(read(tmp_path / "a" / names[1]))
    assert doc["config"]["name"] == "real-params" and doc["record"]["seed"] == 1


def test_seed_falls_back_to_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("NAVBENCH_SEED", "4")
    assert cli.main(["export-world", "--difficulty", "medium", "--out", str(tmp_path / "w.json")]) == 0
    assert load_world(tmp_path / "w.json").seed == 4
    monkeypatch.setenv("NAVBENCH_SEED", "x")
    assert cli.main(["export-world", "--out", str(tmp_path / "w2.json")]) == 2


def test_export_grass_corridor(tmp_path):
    assert cli.main(["export-world", "--kind", "grass-corridor", "--seed", "2", "--out", str(tmp_path / "g.json")]) == 0
    assert load_world(tmp_path / "g.json").grass


def test_bench_two_modes_two_blocks(tmp_path, capsys):
    args = ["bench", "--difficulty", "easy", "--modes", "lidar,mono", "--n", "1", "--jobs", "1",
            "--set", "bench.goals=[10]", "--seed", "3", "--out", str(tmp_path)]
    assert cli.main(args) == 0
    out = capsys.readouterr().out
    assert "[lidar]" in out and "[mono]" in out
    for metric in ("SR", "SPL", "DR"):
        assert metric in out
    report = json.loads(read(tmp_path / "bench.json"))
    assert len(report["runs"]) == 2
    assert report["root_config"]["bench"]["goals"] == [10]
    assert os.path.exists(tmp_path / "bench-trajectories.csv")


def test_ablate_has_four_rows_and_average(tmp_path, capsys):
    args = ["ablate", "--difficulty", "easy", "--n", "1", "--jobs", "1", "--set", "bench.goals=[10]",
            "--seed", "3", "--out", str(tmp_path)]
    assert cli.main(args) == 0
    out = capsys.readouterr().out
    table = out.split("report:")[0].strip().splitlines()
    assert "Avg" in table[0]
    assert len(table) == 5
    report = json.loads(read(tmp_path / "ablation.json"))
    assert len(report["ablation"]) == 4
    # the four cells share their world and episode seeds
    seeds = {}
    for r in report["runs"]:
        seeds.setdefault(r["config"], set()).add((r["world_seed"], r["seed"]))
    assert len({frozenset(v) for v in seeds.values()}) == 1


@pytest.mark.slow
def test_bench_quick(tmp_path, capsys):
    assert cli.main(["bench", "--quick", "--seed", "7", "--out", str(tmp_path)]) == 0
    report = json.loads(read(tmp_path / "bench.json"))
    assert report["difficulties"] == ["easy", "medium"]
    assert len(report["runs"]) == 2 * 2 * 3 * 3
    assert "SPL" in capsys.readouterr().out
