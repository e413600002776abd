import json

import numpy as np
import pytest

from graspsynth.cli import main
from graspsynth.config import apply_ablation, run_config_from_dict, RunConfig
from graspsynth.errors import InvalidArgumentError


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def object_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("objects") / "sphere"
    assert run_cli("gen", "--kind", "sphere", "--dims", "0.04", "--seed", "3", "--out", str(out)) == 0
    return out


@pytest.fixture(scope="module")
def contact_map(tmp_path_factory, object_dir):
    out = tmp_path_factory.mktemp("maps") / "map.ply"
    code = run_cli(
        "annotate", "--object", str(object_dir), "--style", "tripod", "--out", str(out)
    )
    assert code == 0
    return out


class TestGen:
    def test_writes_cloud_and_solid(self, object_dir):
        assert (object_dir / "cloud.ply").exists()
        assert (object_dir / "solid.json").exists()
        meta = json.loads((object_dir / "solid.json").read_text())
        assert meta["solid"]["kind"] == "sphere"
        assert meta["mass"] > 0

    def test_suite(self, tmp_path):
        assert run_cli("gen", "--suite", "--out", str(tmp_path), "--seed", "1") == 0
        names = {p.name for p in tmp_path.iterdir()}
        assert {"sphere_s", "sphere_m", "sphere_l", "box", "cylinder", "capsule"} <= names

    def test_requires_kind_or_suite(self, tmp_path, capsys):
        assert run_cli("gen", "--out", str(tmp_path)) == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "invalid-argument"


class TestAnnotate:
    def test_map_has_labels(self, contact_map):
        from graspsynth.contact import load_contact_map

        cloud = load_contact_map(contact_map)
        assert cloud.labeled
        assert (cloud.labels > 0).sum() > 0

    def test_k_flag(self, tmp_path, object_dir):
        out = tmp_path / "map_k10.ply"
        assert run_cli(
            "annotate", "--object", str(object_dir), "--style", "tripod",
            "--k", "10", "--out", str(out),
        ) == 0

    def test_missing_file_is_parse_error(self, tmp_path, capsys):
        code = run_cli(
            "annotate", "--object", str(tmp_path / "nope"), "--style", "pinch",
            "--out", str(tmp_path / "m.ply"),
        )
        assert code == 2
        assert json.loads(capsys.readouterr().err)["error"] == "parse"


class TestOptimize:
    def test_deterministic_output_bytes(self, tmp_path, contact_map):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            code = run_cli(
                "optimize", "--map", str(contact_map), "--seed", "7",
                "--iters", "10", "--directions", "1", "--out", str(out),
            )
            assert code == 0
        assert (out_a / "result.json").read_bytes() == (out_b / "result.json").read_bytes()

    def test_result_contains_config_echo(self, tmp_path, contact_map):
        out = tmp_path / "run"
        run_cli(
            "optimize", "--map", str(contact_map), "--seed", "1",
            "--iters", "5", "--directions", "1", "--out", str(out),
        )
        payload = json.loads((out / "result.json").read_text())
        assert payload["config"]["optimizer"]["seed"] == 1
        assert payload["config"]["optimizer"]["iterations"] == 5
        assert "pose" in payload["result"]

    def test_trajectory_export(self, tmp_path, contact_map):
        out = tmp_path / "traj"
        run_cli(
            "optimize", "--map", str(contact_map), "--seed", "2",
            "--iters", "50", "--directions", "1", "--trajectory", "--out", str(out),
        )
        files = sorted(p.name for p in out.glob("trajectory_*.ply"))
        assert files == ["trajectory_0000.ply", "trajectory_0025.ply", "trajectory_0050.ply"]

    def test_finger_weights_flag_validation(self, tmp_path, contact_map, capsys):
        code = run_cli(
            "optimize", "--map", str(contact_map), "--finger-weights", "1,2",
            "--out", str(tmp_path / "x"),
        )
        assert code == 2


class TestEvaluate:
    def test_far_grasp_free_falls(self, tmp_path, object_dir):
        from graspsynth.hand import rest_pose
        from graspsynth.io import dump_json

        pose = rest_pose()
        pose.translation = np.array([0.0, 0.5, 0.0])
        pose_path = tmp_path / "pose.json"
        dump_json(pose.to_dict(), pose_path)
        out = tmp_path / "metrics.json"
        assert run_cli(
            "evaluate", "--grasp", str(pose_path), "--object", str(object_dir),
            "--out", str(out),
        ) == 0
        metrics = json.loads(out.read_text())["metrics"]
        assert metrics["volume_cm3"] == 0.0
        assert metrics["success"] is False
        assert metrics["displacement_cm"] > 100


class TestBench:
    def test_small_bench_produces_reports(self, tmp_path):
        out = tmp_path / "bench"
        code = run_cli(
            "bench", "--seeds", "1", "--shapes", "sphere_m", "--iters", "10",
            "--directions", "1", "--workers", "1", "--quiet", "--out", str(out),
        )
        assert code == 0
        runs = (out / "runs.csv").read_text().splitlines()
        assert runs[0].startswith("ablation,shape,style,seed")
        assert len(runs) == 2
        assert (out / "summary.csv").exists()
        assert (out / "config.json").exists()

    def test_ablation_flag_semantics(self):
        cfg = apply_ablation(RunConfig(), "dc")
        assert cfg.optimizer.weights.dct == 0.0
        assert cfg.optimizer.weights.dcf == 0.0
        cfg = apply_ablation(RunConfig(), "net")
        assert cfg.optimizer.weights.net == 0.0
        assert cfg.optimizer.weights.dct == 0.8


class TestRunConfig:
    def test_unknown_keys_rejected_with_paths(self):
        with pytest.raises(InvalidArgumentError, match="optimizer.typo"):
            run_config_from_dict({"optimizer": {"typo": 1}})
        with pytest.raises(InvalidArgumentError, match="nonsense"):
            run_config_from_dict({"nonsense": {}})
        with pytest.raises(InvalidArgumentError, match="optimizer.weights.dsi"):
            run_config_from_dict({"optimizer": {"weights": {"dsi": 0.5}}})

    def test_partial_override_keeps_defaults(self):
        cfg = run_config_from_dict({"optimizer": {"iterations": 50}})
        assert cfg.optimizer.iterations == 50
        assert cfg.optimizer.directions == 8
        assert cfg.simulation.friction == 0.5

    def test_round_trip(self):
        cfg = RunConfig()
        again = run_config_from_dict(cfg.to_dict())
        assert again.to_dict() == cfg.to_dict()
