"""Behavioral tests for the batch command-line front-end."""

from __future__ import annotations

import csv

import numpy as np
import pytest

from salfuse.cli import main
from salfuse.dataset import load_gray, save_gray
from salfuse.imagecore import normalize_minmax

from conftest import disc_mask, make_robustness_case


def populate(dirpath, images):
    dirpath.mkdir(parents=True, exist_ok=True)
    for stem, img in images.items():
        save_gray(img, dirpath / f"{stem}.png")
    return dirpath


@pytest.fixture()
def identical_branches(tmp_path):
    rng = np.random.default_rng(91)
    images = {f"s{i}": rng.integers(0, 256, (12, 12)) / 255.0 for i in range(3)}
    for img in images.values():
        img[0, 0] = 0.0
        img[-1, -1] = 1.0
    b1 = populate(tmp_path / "b1", images)
    b2 = populate(tmp_path / "b2", images)
    return b1, b2, images


class TestFuseCommand:
    def test_identical_branches_reproduce_inputs(self, identical_branches, tmp_path, capsys):
        b1, b2, images = identical_branches
        out = tmp_path / "out"
        code = main(["fuse", "--branch", str(b1), "--branch", str(b2), "--out", str(out)])
        assert code == 0
        captured = capsys.readouterr()
        assert "mean_iterations=1.00" in captured.out
        assert "non_converged=0" in captured.out
        for stem, img in images.items():
            fused = load_gray(out / f"{stem}.png")
            expected = np.clip(np.floor(normalize_minmax(img) * 255.0 + 0.5), 0, 255) / 255.0
            np.testing.assert_array_equal(fused, expected)

    def test_trace_files_written(self, identical_branches, tmp_path):
        b1, b2, images = identical_branches
        out = tmp_path / "out"
        code = main(
            ["fuse", "--branch", str(b1), "--branch", str(b2), "--out", str(out), "--trace"]
        )
        assert code == 0
        for stem in images:
            text = (out / "trace" / f"{stem}.log").read_text()
            assert text.startswith("iter=1 ")
            assert "converged=true iterations=1" in text
            assert "weights=0.5,0.5" in text

    def test_missing_branch_dir_fails_with_path(self, tmp_path, capsys):
        ghost = tmp_path / "ghost"
        code = main(["fuse", "--branch", str(ghost), "--out", str(tmp_path / "out")])
        assert code == 1
        assert str(ghost) in capsys.readouterr().err

    def test_requires_out_dir(self, identical_branches, capsys):
        b1, _, _ = identical_branches
        code = main(["fuse", "--branch", str(b1)])
        assert code == 1
        assert "--out" in capsys.readouterr().err

    def test_outputs_identical_across_worker_counts(self, tmp_path):
        rng = np.random.default_rng(92)
        branch_dirs = []
        cases = [make_robustness_case(rng, size=48) for _ in range(6)]
        for b in range(4):
            images = {f"img{i:02d}": cases[i][1][b] for i in range(6)}
            branch_dirs.append(populate(tmp_path / f"b{b}", images))
        args = ["fuse"]
        for d in branch_dirs:
            args += ["--branch", str(d)]
        out1 = tmp_path / "o1"
        out8 = tmp_path / "o8"
        assert main(args + ["--out", str(out1), "--jobs", "1"]) == 0
        assert main(args + ["--out", str(out8), "--jobs", "8"]) == 0
        for i in range(6):
            name = f"img{i:02d}.png"
            assert (out1 / name).read_bytes() == (out8 / name).read_bytes()

    def test_strict_mode_aborts_on_bad_file(self, identical_branches, tmp_path, capsys):
        b1, b2, _ = identical_branches
        (b1 / "broken.png").write_bytes(b"junk")
        (b2 / "broken.png").write_bytes(b"junk")
        out = tmp_path / "out"
        args = ["fuse", "--branch", str(b1), "--branch", str(b2), "--out", str(out)]
        assert main(args + ["--strict"]) == 1
        capsys.readouterr()
        assert main(args) == 0  # non-strict skips and reports
        assert "broken" in capsys.readouterr().err

    def test_strict_mode_validates_before_writing(self, identical_branches, tmp_path):
        b1, b2, _ = identical_branches
        # the bad stem sorts last; eager validation must fail the run
        # before any earlier sample is written
        (b1 / "zz_bad.png").write_bytes(b"junk")
        (b2 / "zz_bad.png").write_bytes(b"junk")
        out = tmp_path / "out"
        code = main(
            ["fuse", "--branch", str(b1), "--branch", str(b2), "--out", str(out), "--strict"]
        )
        assert code == 1
        assert not out.exists() or not any(out.iterdir())


class TestAblateCommand:
    def test_single_branch_equals_normalized_input(self, tmp_path):
        rng = np.random.default_rng(93)
        img = rng.integers(0, 256, (10, 10)) / 255.0
        b1 = populate(tmp_path / "b1", {"a": img})
        out = tmp_path / "out"
        assert main(["ablate", "--branch", str(b1), "--out", str(out)]) == 0
        fused = load_gray(out / "a.png")
        expected = np.clip(np.floor(normalize_minmax(img) * 255.0 + 0.5), 0, 255) / 255.0
        np.testing.assert_array_equal(fused, expected)

    def test_identical_branch_fixture_matches_fuse(self, identical_branches, tmp_path):
        b1, b2, images = identical_branches
        fuse_out = tmp_path / "f"
        abl_out = tmp_path / "a"
        common = ["--branch", str(b1), "--branch", str(b2)]
        assert main(["fuse", *common, "--out", str(fuse_out)]) == 0
        assert main(["ablate", *common, "--out", str(abl_out)]) == 0
        for stem in images:
            assert (fuse_out / f"{stem}.png").read_bytes() == (abl_out / f"{stem}.png").read_bytes()

    def test_feedback_beats_additive_through_the_full_pipeline(self, tmp_path, capsys):
        rng = np.random.default_rng(96)
        cases = [make_robustness_case(rng, size=64) for _ in range(6)]
        branch_dirs = []
        for b in range(4):
            branch_dirs.append(
                populate(tmp_path / f"b{b}", {f"s{i}": cases[i][1][b] for i in range(6)})
            )
        gt_dir = populate(
            tmp_path / "gt", {f"s{i}": cases[i][0].astype(np.float64) for i in range(6)}
        )
        branch_args = []
        for d in branch_dirs:
            branch_args += ["--branch", str(d)]
        assert main(["fuse", *branch_args, "--out", str(tmp_path / "f")]) == 0
        assert main(["ablate", *branch_args, "--out", str(tmp_path / "a")]) == 0

        def max_f_of(pred_dir, out_name):
            code = main(
                ["eval", "--branch", str(pred_dir), "--gt", str(gt_dir), "--out", str(tmp_path / out_name)]
            )
            assert code == 0
            return float(capsys.readouterr().out.split("max_f=")[1].split(" ")[0])

        capsys.readouterr()
        assert max_f_of(tmp_path / "f", "ef") > max_f_of(tmp_path / "a", "ea")


class TestEvalCommand:
    def test_perfect_predictions(self, tmp_path, capsys):
        gt_images = {f"s{i}": disc_mask(16, 16, 8, 8, 3 + i).astype(np.float64) for i in range(3)}
        preds = populate(tmp_path / "preds", gt_images)
        gts = populate(tmp_path / "gt", gt_images)
        out = tmp_path / "out"
        code = main(["eval", "--branch", str(preds), "--gt", str(gts), "--out", str(out)])
        assert code == 0
        assert "mae=0.000 max_f=1.000 sm=1.000" in capsys.readouterr().out

        with open(out / "report.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["sample_id", "mae", "sm"]
        assert [r[0] for r in rows[1:4]] == ["s0", "s1", "s2"]
        footer = {r[0]: r[1] for r in rows[4:]}
        assert float(footer["dataset_mae_mean"]) == 0.0
        assert float(footer["dataset_max_f"]) == 1.0
        assert float(footer["dataset_sm_mean"]) == 1.0

        with open(out / "pr.csv", newline="") as fh:
            pr_rows = list(csv.reader(fh))
        assert pr_rows[0] == ["threshold", "precision", "recall"]
        assert len(pr_rows) == 257
        assert float(pr_rows[1][0]) == 0.0
        assert float(pr_rows[256][0]) == 1.0

    def test_requires_gt(self, tmp_path, capsys):
        b = populate(tmp_path / "b", {"a": np.zeros((4, 4))})
        assert main(["eval", "--branch", str(b), "--out", str(tmp_path / "o")]) == 1
        assert "--gt" in capsys.readouterr().err

    def test_rejects_multiple_prediction_dirs(self, tmp_path, capsys):
        b = populate(tmp_path / "b", {"a": np.zeros((4, 4))})
        code = main(
            ["eval", "--branch", str(b), "--branch", str(b), "--gt", str(b), "--out", str(tmp_path / "o")]
        )
        assert code == 1
        assert "exactly one" in capsys.readouterr().err

    def test_unpaired_samples_reported(self, tmp_path, capsys):
        img = disc_mask(8, 8, 4, 4, 2).astype(np.float64)
        preds = populate(tmp_path / "p", {"a": img, "b": img})
        gts = populate(tmp_path / "g", {"a": img})
        out = tmp_path / "o"
        assert main(["eval", "--branch", str(preds), "--gt", str(gts), "--out", str(out)]) == 0
        assert "skip b: no ground truth" in capsys.readouterr().err
        with open(out / "report.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert [r[0] for r in rows[1:2]] == ["a"]

    def test_strict_mode_rejects_unpaired(self, tmp_path, capsys):
        img = disc_mask(8, 8, 4, 4, 2).astype(np.float64)
        preds = populate(tmp_path / "p", {"a": img, "b": img})
        gts = populate(tmp_path / "g", {"a": img})
        code = main(
            ["eval", "--branch", str(preds), "--gt", str(gts), "--out", str(tmp_path / "o"), "--strict"]
        )
        assert code == 1
        assert "unpaired" in capsys.readouterr().err

    def test_prediction_resized_to_gt(self, tmp_path, capsys):
        gt = disc_mask(16, 16, 8, 8, 5).astype(np.float64)
        pred = np.kron(gt, np.ones((2, 2)))  # 32x32
        preds = populate(tmp_path / "p", {"a": pred})
        gts = populate(tmp_path / "g", {"a": gt})
        assert main(["eval", "--branch", str(preds), "--gt", str(gts), "--out", str(tmp_path / "o")]) == 0
        out_line = capsys.readouterr().out
        mae_val = float(out_line.split("mae=")[1].split(" ")[0])
        assert mae_val < 0.05


class TestBenchCommand:
    def test_single_image(self, tmp_path, capsys):
        rng = np.random.default_rng(94)
        _, branches = make_robustness_case(rng, size=48)
        dirs = [populate(tmp_path / f"b{i}", {"a": b}) for i, b in enumerate(branches)]
        args = ["bench"]
        for d in dirs:
            args += ["--branch", str(d)]
        assert main(args) == 0
        out = capsys.readouterr().out
        assert "bench: 1 images" in out
        assert "images/s" in out
        assert "mean_iterations=" in out

    def test_repeat_runs_report_identical_iterations(self, tmp_path, capsys):
        rng = np.random.default_rng(95)
        cases = [make_robustness_case(rng, size=48) for _ in range(4)]
        dirs = []
        for b in range(4):
            dirs.append(populate(tmp_path / f"b{b}", {f"i{i}": cases[i][1][b] for i in range(4)}))
        args = ["bench"]
        for d in dirs:
            args += ["--branch", str(d)]
        assert main(args) == 0
        first = capsys.readouterr().out.split("mean_iterations=")[1]
        assert main(args) == 0
        second = capsys.readouterr().out.split("mean_iterations=")[1]
        assert first == second


class TestArgumentValidation:
    def test_bad_epsilon_exits_2(self, tmp_path, capsys):
        b = populate(tmp_path / "b", {"a": np.zeros((4, 4))})
        code = main(["fuse", "--branch", str(b), "--out", str(tmp_path / "o"), "--epsilon", "1.5"])
        assert code == 2
        assert "epsilon" in capsys.readouterr().err

    def test_bad_jobs_exits_2(self, tmp_path, capsys):
        b = populate(tmp_path / "b", {"a": np.zeros((4, 4))})
        code = main(["fuse", "--branch", str(b), "--out", str(tmp_path / "o"), "--jobs", "0"])
        assert code == 2
        assert "parallelism" in capsys.readouterr().err
