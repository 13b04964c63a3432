"""Command dispatch, exit codes, JSON output, and training determinism."""

from __future__ import annotations

import json

import pytest

from conftest import BREED_COLORS, make_frameset, png_bytes
from taurus.cli import EXIT_DATA, EXIT_MODEL, EXIT_OK, EXIT_USAGE, run_cli


def artifact_bytes(model_dir) -> tuple[bytes, bytes]:
    return (
        (model_dir / "model.json").read_bytes(),
        (model_dir / "weights.bin").read_bytes(),
    )


@pytest.fixture(scope="module")
def image_tree(tmp_path_factory):
    """Two-label breed tree with real (tiny) images."""
    root = tmp_path_factory.mktemp("cli_images")
    for label in ("Ayrshire cattle", "Unknown"):
        sub = root / label
        sub.mkdir()
        for i in range(3):
            (sub / f"img_{i}.png").write_bytes(
                png_bytes(BREED_COLORS[label], noise_seed=i)
            )
    return root


@pytest.fixture(scope="module")
def frameset_tree(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_clips")
    for label, color in (("Healthy", (60, 220, 60)), ("Unknown", (127, 127, 127))):
        sub = root / label
        sub.mkdir()
        for i in range(2):
            make_frameset(sub / f"clip_{i}", color, n_frames=2, seed=i * 17)
    return root


class TestIngest:
    def test_writes_manifest_and_prints_counts(self, image_tree, tmp_path, capsys):
        out = tmp_path / "m.csv"
        code = run_cli([
            "ingest", "--root", str(image_tree), "--task", "breed", "--out", str(out),
        ])
        assert code == EXIT_OK
        assert out.is_file()
        stdout = capsys.readouterr().out
        assert "Found 6 items belonging to 2 classes." in stdout
        assert "Ayrshire cattle: 3" in stdout

    def test_json_output_parses(self, image_tree, tmp_path, capsys):
        out = tmp_path / "m.csv"
        code = run_cli([
            "ingest", "--root", str(image_tree), "--task", "breed",
            "--out", str(out), "--json",
        ])
        assert code == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["total"] == 6
        assert doc["classes"]["Unknown"] == 3

    def test_missing_root_is_data_error(self, tmp_path):
        code = run_cli([
            "ingest", "--root", str(tmp_path / "nope"), "--task", "breed",
            "--out", str(tmp_path / "m.csv"),
        ])
        assert code == EXIT_DATA


@pytest.fixture(scope="module")
def image_manifest(image_tree, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_manifests") / "breed.csv"
    assert run_cli([
        "ingest", "--root", str(image_tree), "--task", "breed", "--out", str(out),
    ]) == EXIT_OK
    return out


class TestTrain:
    def test_image_training_deterministic(self, image_tree, image_manifest, tmp_path, capsys):
        args = [
            "train", "--task", "breed", "--manifest", str(image_manifest),
            "--root", str(image_tree), "--seed", "7", "--epochs", "5", "--json",
        ]
        assert run_cli(args + ["--out", str(tmp_path / "one")]) == EXIT_OK
        assert run_cli(args + ["--out", str(tmp_path / "two")]) == EXIT_OK
        capsys.readouterr()
        assert artifact_bytes(tmp_path / "one") == artifact_bytes(tmp_path / "two")

    def test_video_training_deterministic(self, frameset_tree, tmp_path, capsys):
        manifest = tmp_path / "clips.csv"
        assert run_cli([
            "ingest", "--root", str(frameset_tree), "--task", "behavior_video",
            "--out", str(manifest),
        ]) == EXIT_OK
        args = [
            "train", "--task", "behavior_video", "--manifest", str(manifest),
            "--root", str(frameset_tree), "--seed", "7", "--epochs", "2",
            "--batch-size", "2", "--json",
        ]
        assert run_cli(args + ["--out", str(tmp_path / "one")]) == EXIT_OK
        assert run_cli(args + ["--out", str(tmp_path / "two")]) == EXIT_OK
        capsys.readouterr()
        assert artifact_bytes(tmp_path / "one") == artifact_bytes(tmp_path / "two")

    def test_prints_epoch_loss_lines(self, image_tree, image_manifest, tmp_path, capsys):
        assert run_cli([
            "train", "--task", "breed", "--manifest", str(image_manifest),
            "--root", str(image_tree), "--epochs", "3", "--out", str(tmp_path / "m"),
        ]) == EXIT_OK
        stdout = capsys.readouterr().out
        assert stdout.count("epoch ") == 3
        assert "loss" in stdout

    def test_missing_manifest_is_data_error(self, tmp_path):
        code = run_cli([
            "train", "--task", "breed", "--manifest", str(tmp_path / "nope.csv"),
            "--out", str(tmp_path / "m"),
        ])
        assert code == EXIT_DATA


@pytest.fixture(scope="module")
def trained_model(image_tree, image_manifest, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_models") / "breed"
    assert run_cli([
        "train", "--task", "breed", "--manifest", str(image_manifest),
        "--root", str(image_tree), "--epochs", "150", "--out", str(out), "--json",
    ]) == EXIT_OK
    return out


class TestEvalAndPredict:
    def test_eval_writes_report_and_confusion(self, image_tree, image_manifest,
                                              trained_model, tmp_path, capsys):
        report = tmp_path / "report.csv"
        confusion = tmp_path / "confusion.json"
        code = run_cli([
            "eval", "--manifest", str(image_manifest), "--root", str(image_tree),
            "--model", str(trained_model), "--out-report", str(report),
            "--out-confusion", str(confusion), "--json",
        ])
        assert code == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["accuracy"] == 1.0
        lines = report.read_text().splitlines()
        assert lines[0] == "item,actual,predicted,confidence_percent"
        assert len(lines) == 7
        matrix = json.loads(confusion.read_text())["matrix"]
        assert sum(sum(row) for row in matrix) == 6

    def test_predict_image_json(self, image_tree, trained_model, capsys):
        image = next((image_tree / "Ayrshire cattle").glob("*.png"))
        code = run_cli([
            "predict-image", "--model", str(trained_model), "--image", str(image), "--json",
        ])
        assert code == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["label"] == "Ayrshire cattle"
        assert isinstance(doc["confidence_percent"], int)

    def test_predict_image_human(self, image_tree, trained_model, capsys):
        image = next((image_tree / "Unknown").glob("*.png"))
        assert run_cli([
            "predict-image", "--model", str(trained_model), "--image", str(image),
        ]) == EXIT_OK
        assert "%" in capsys.readouterr().out

    def test_predict_video_frameset(self, frameset_tree, tmp_path, capsys):
        manifest = tmp_path / "clips.csv"
        run_cli([
            "ingest", "--root", str(frameset_tree), "--task", "behavior_video",
            "--out", str(manifest),
        ])
        model = tmp_path / "vmodel"
        assert run_cli([
            "train", "--task", "behavior_video", "--manifest", str(manifest),
            "--root", str(frameset_tree), "--epochs", "40", "--out", str(model), "--json",
        ]) == EXIT_OK
        capsys.readouterr()
        clip = frameset_tree / "Healthy" / "clip_0"
        code = run_cli([
            "predict-video", "--model", str(model), "--video", str(clip), "--json",
        ])
        assert code == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["task"] == "behavior_video"

    def test_corrupt_model_is_model_error(self, tmp_path):
        bad = tmp_path / "bad_model"
        bad.mkdir()
        (bad / "model.json").write_text("{}")
        (bad / "weights.bin").write_bytes(b"")
        code = run_cli([
            "predict-image", "--model", str(bad), "--image", "whatever.png",
        ])
        assert code == EXIT_MODEL


class TestDose:
    def test_sample_rule_dose(self, capsys):
        code = run_cli([
            "dose", "--disease", "Mastitis Disease", "--age-band", "y2",
            "--weight-group", "LB_93_177",
        ])
        assert code == EXIT_OK
        assert "122.47 mg" in capsys.readouterr().out

    def test_json_plan(self, capsys):
        code = run_cli([
            "dose", "--disease", "Mastitis Disease", "--age-band", "y2",
            "--weight-group", "LB_93_177", "--json",
        ])
        assert code == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["dose_mg"] == pytest.approx(122.47, abs=0.01)

    def test_custom_registry(self, tmp_path, capsys):
        registry = tmp_path / "drugs.json"
        registry.write_text(json.dumps([
            {
                "disease": "Mastitis Disease",
                "drug": "Unit Test Drug",
                "dose_mg_per_kg": 2.0,
                "route": "oral",
                "times_per_day": 1,
                "duration_days": 1,
            }
        ]))
        code = run_cli([
            "dose", "--disease", "Mastitis Disease", "--age-band", "y2",
            "--weight-group", "LB_93_177", "--registry", str(registry), "--json",
        ])
        assert code == EXIT_OK
        doc = json.loads(capsys.readouterr().out)
        assert doc["drug"] == "Unit Test Drug"
        assert doc["dose_mg"] == pytest.approx(122.47, abs=0.01)

    def test_no_rule_is_data_error(self, capsys):
        code = run_cli([
            "dose", "--disease", "Healthy Cattle", "--age-band", "y2",
            "--weight-group", "LB_93_177",
        ])
        assert code == EXIT_DATA

    def test_unknown_weight_group_is_data_error(self):
        code = run_cli([
            "dose", "--disease", "Mastitis Disease", "--age-band", "y2",
            "--weight-group", "Unknown",
        ])
        assert code == EXIT_DATA


class TestUsage:
    def test_no_command_usage_error(self, capsys):
        assert run_cli([]) == EXIT_USAGE
        capsys.readouterr()

    def test_unknown_command_usage_error(self, capsys):
        assert run_cli(["transmogrify"]) == EXIT_USAGE
        capsys.readouterr()

    def test_missing_required_flag(self, capsys):
        assert run_cli(["ingest", "--task", "breed"]) == EXIT_USAGE
        capsys.readouterr()

    def test_help_exits_zero(self, capsys):
        assert run_cli(["--help"]) == EXIT_OK
        assert "taurus" in capsys.readouterr().out

    def test_subcommand_help_exits_zero(self, capsys):
        assert run_cli(["dose", "--help"]) == EXIT_OK
        capsys.readouterr()
