"""Command-line surface: subcommands, exit codes, end-to-end flow."""

import numpy as np
import pytest

from irzone import io_formats as io
from irzone.cli import main


class TestExitCodes:
    def test_unknown_subcommand_is_usage_error(self, capsys):
        assert main(["frobnicate"]) == 1
        assert "usage error" in capsys.readouterr().err

    def test_missing_required_argument_is_usage_error(self, capsys):
        assert main(["gen"]) == 1

    def test_missing_input_file_is_data_error(self, tmp_path, capsys):
        code = main(["preprocess", "--in", str(tmp_path / "nope.irts")])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_corrupt_mask_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.pgm"
        bad.write_bytes(b"not a mask")
        assert main(["eval", "--pred", str(bad), "--ref", str(bad)]) == 2


class TestGen:
    def test_zero_sequences_succeeds_with_empty_manifest(self, tmp_path):
        out = tmp_path / "ds"
        assert main(["gen", "--n", "0", "--out", str(out)]) == 0
        assert (out / "manifest.txt").read_text() == ""

    def test_mode_mix_writes_combined_manifest(self, tmp_path):
        out = tmp_path / "mix"
        code = main([
            "gen", "--mode-mix", "On=1,Off=1", "--out", str(out),
            "--width", "48", "--height", "36", "--frames", "10", "--seed", "3",
        ])
        assert code == 0
        lines = (out / "manifest.txt").read_text().splitlines()
        assert len(lines) == 2
        assert "\tOn\t" in lines[0] and "\tOff\t" in lines[1]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One small generated dataset reused across the flow tests."""
    root = tmp_path_factory.mktemp("cliflow")
    code = main([
        "gen", "--n", "3", "--out", str(root / "train"),
        "--width", "96", "--height", "72", "--frames", "25", "--seed", "17",
    ])
    assert code == 0
    return root


class TestFlow:
    def test_eval_identical_masks_reports_unit_sensitivities(self, workspace, capsys):
        mask = workspace / "train" / "mask_0000.pgm"
        assert main(["eval", "--pred", str(mask), "--ref", str(mask)]) == 0
        out = capsys.readouterr().out
        assert "Model  95% CI Ac" in out
        assert "1.0000  1.0000  1.0000" in out

    def test_preprocess_writes_stage_report(self, workspace):
        report = workspace / "pre.txt"
        code = main([
            "preprocess", "--in", str(workspace / "train" / "seq_0000.irts"),
            "--report", str(report),
        ])
        assert code == 0
        assert report.read_text().startswith("kept ")

    def test_train_infer_render_round_trip(self, workspace, tmp_path):
        overrides = tmp_path / "overrides.txt"
        overrides.write_text("rf.n_trees = 10\nmax_train_pixels = 4000\n")
        model = tmp_path / "model.izm"
        code = main([
            "train", "--manifest", str(workspace / "train" / "manifest.txt"),
            "--backend", "rf", "--mode", "On", "--config", str(overrides),
            "--seed", "17", "--model-out", str(model),
        ])
        assert code == 0
        assert io.load_cascade(model).mode.value == "On"

        pred = tmp_path / "pred.pgm"
        code = main([
            "infer", "--model", str(model),
            "--in", str(workspace / "train" / "seq_0000.irts"),
            "--zpr", "auto",
            "--calib", str(workspace / "train" / "manifest.txt"),
            "--out-mask", str(pred),
            "--out-probs", str(tmp_path / "probs.irts"),
        ])
        assert code == 0
        mask, mode = io.read_mask(pred)
        assert mode.value == "On"
        probs = io.read_sequence(tmp_path / "probs.irts")
        total = probs.data.astype(np.float64).sum(axis=0)
        assert np.max(np.abs(total - 1.0)) < 1e-5  # probability planes stored as f32

        overlay = tmp_path / "overlay.ppm"
        code = main([
            "render", "--seq", str(workspace / "train" / "seq_0000.irts"),
            "--ref", str(workspace / "train" / "mask_0000.pgm"),
            "--alg", str(pred), "--out", str(overlay),
        ])
        assert code == 0
        assert overlay.read_bytes().startswith(b"P6\n")

    def test_infer_without_calibration_uses_neutral_threshold(self, workspace, tmp_path):
        overrides = tmp_path / "overrides.txt"
        overrides.write_text("rf.n_trees = 5\nmax_train_pixels = 3000\n")
        model = tmp_path / "model.izm"
        assert main([
            "train", "--manifest", str(workspace / "train" / "manifest.txt"),
            "--backend", "rf", "--config", str(overrides),
            "--seed", "17", "--model-out", str(model),
        ]) == 0
        pred = tmp_path / "pred.pgm"
        assert main([
            "infer", "--model", str(model),
            "--in", str(workspace / "train" / "seq_0001.irts"),
            "--out-mask", str(pred),
        ]) == 0
        io.read_mask(pred)
