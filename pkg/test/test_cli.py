"""
Test type: Integration test
Validation: Command-line subcommands end to end (JSON on stdout, exit codes)
Command: pytest test/test_cli.py -v
"""

import csv
import json

import pytest

from metakit.main import EXIT_OK, EXIT_USAGE, main
from metakit.nn import load_params


def run(capsys, *argv: str) -> dict:
    assert main(list(argv)) == EXIT_OK
    return json.loads(capsys.readouterr().out)


@pytest.fixture
def glyphs(tmp_path, capsys):
    out = tmp_path / "glyphs"
    run(capsys, "gen-synthetic", "--classes", "10", "--per-class", "4", "--size", "8", "--out", str(out))
    return out


class TestGenSynthetic:
    def test_summary(self, tmp_path, capsys):
        data = run(
            capsys,
            "gen-synthetic", "--classes", "10", "--per-class", "4", "--size", "8",
            "--out", str(tmp_path / "g"),
        )
        assert data["classes"] == 10
        assert data["images"] == 40
        assert data["splits"] == {"train": 6, "val": 2, "test": 2}
        assert (tmp_path / "g" / "manifest.json").is_file()

    def test_too_small(self, tmp_path):
        assert main(["gen-synthetic", "--size", "4", "--out", str(tmp_path)]) == EXIT_USAGE


class TestInspectDataset:
    def test_task_counts(self, glyphs, capsys):
        data = run(capsys, "inspect-dataset", "--data", str(glyphs), "--ways", "5")
        assert data["image_shape"] == [1, 8, 8]
        assert data["splits"]["train"] == {"classes": 6, "examples": 24, "tasks": 6}
        assert data["splits"]["val"]["tasks"] == 0

    def test_missing_manifest(self, tmp_path):
        assert main(["inspect-dataset", "--data", str(tmp_path)]) == EXIT_USAGE


class TestTrainSinusoid:
    """Toy regression training through the CLI."""

    def test_writes_report_checkpoint_and_summary(self, tmp_path, capsys):
        report = tmp_path / "report.csv"
        checkpoint = tmp_path / "model.bin"
        summary = tmp_path / "summary.json"
        data = run(
            capsys,
            "train-sinusoid",
            "--outer-steps", "3",
            "--meta-batch", "2",
            "--hidden", "8",
            "--eval-tasks", "3",
            "--num-tasks", "20",
            "--report", str(report),
            "--checkpoint", str(checkpoint),
            "--summary", str(summary),
        )
        assert data["steps"] == 3
        assert data["report"]["baseline"]["num_tasks"] == 3
        assert data["report"]["evaluation"]["meta_split"] == "test"
        with report.open(newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["step", "outer_loss", "pre_adapt_loss", "post_adapt_loss", "wall_ms"]
        assert len(rows) == 4
        assert load_params(checkpoint).paths() == ["0.weight", "0.bias", "2.weight", "2.bias"]
        assert len(json.loads(summary.read_text())["records"]) == 3

    def test_eval_from_checkpoint(self, tmp_path, capsys):
        checkpoint = tmp_path / "model.bin"
        run(
            capsys,
            "train-sinusoid", "--outer-steps", "2", "--hidden", "8", "--num-tasks", "20",
            "--no-baseline", "--eval-tasks", "2", "--checkpoint", str(checkpoint),
        )
        data = run(
            capsys,
            "eval", "--checkpoint", str(checkpoint), "--eval-tasks", "4", "--num-tasks", "20",
            "--meta-split", "val",
        )
        assert data["evaluation"]["num_tasks"] == 4
        assert data["evaluation"]["meta_split"] == "val"

    def test_eval_rejects_corrupt_checkpoint(self, tmp_path):
        checkpoint = tmp_path / "corrupt.bin"
        checkpoint.write_bytes(
            (1).to_bytes(4, "little") + (1).to_bytes(4, "little")
            + (2).to_bytes(4, "little") + b"\xff\xfe"
        )
        assert main(["eval", "--checkpoint", str(checkpoint), "--num-tasks", "5"]) == EXIT_USAGE

    def test_other_problem(self, capsys):
        data = run(
            capsys,
            "train-sinusoid", "--problem", "sinusoid-and-line", "--outer-steps", "1",
            "--hidden", "4", "--num-tasks", "10", "--eval-tasks", "2", "--no-baseline",
        )
        assert data["report"]["baseline"] is None


class TestTrainFewshot:
    def test_small_run(self, glyphs, tmp_path, capsys):
        checkpoint = tmp_path / "fewshot.bin"
        data = run(
            capsys,
            "train-fewshot",
            "--data", str(glyphs),
            "--ways", "2",
            "--shots", "1",
            "--test-shots", "1",
            "--outer-steps", "2",
            "--meta-batch", "2",
            "--hidden", "8",
            "--eval-tasks", "1",
            "--inner-lr", "0.1",
            "--checkpoint", str(checkpoint),
        )
        assert data["steps"] == 2
        assert data["report"]["evaluation"]["post_accuracy_mean"] is not None
        params = load_params(checkpoint)
        assert params["0.weight"].shape == (8, 64)
        assert params["2.weight"].shape == (2, 8)

        data = run(
            capsys,
            "eval", "--checkpoint", str(checkpoint), "--data", str(glyphs),
            "--ways", "2", "--shots", "1", "--eval-tasks", "1",
        )
        assert data["evaluation"]["pre_accuracy_mean"] is not None

    def test_pool_too_small(self, glyphs):
        argv = ["train-fewshot", "--data", str(glyphs), "--ways", "7", "--outer-steps", "1"]
        assert main(argv) == EXIT_USAGE


class TestErrors:
    def test_missing_checkpoint(self, tmp_path):
        assert main(["eval", "--checkpoint", str(tmp_path / "absent.bin")]) == EXIT_USAGE

    def test_non_positive_test_shots(self):
        assert main(["train-sinusoid", "--test-shots", "0"]) == EXIT_USAGE

    def test_invalid_config_value(self):
        assert main(["train-sinusoid", "--inner-steps", "0", "--num-tasks", "5"]) == EXIT_USAGE

    def test_argparse_usage(self):
        with pytest.raises(SystemExit) as exc:
            main(["train-fewshot"])
        assert exc.value.code == 2
