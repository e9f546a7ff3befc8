import os

import numpy as np
import pytest
from click.testing import CliRunner

from meshinspect.cli import main
from meshinspect.image import load_gray, load_mask, save_gray
from meshinspect.synth import DefectSpec, MeshSpec, generate, load_dataset


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def mesh_image(tmp_path_factory):
    path = tmp_path_factory.mktemp("imgs") / "mesh.png"
    img, _, _ = generate(MeshSpec(period=8, seed=40),
                         DefectSpec(kind="block", extent=16))
    save_gray(img, str(path))
    return str(path)


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory, runner):
    out = str(tmp_path_factory.mktemp("data") / "set")
    result = runner.invoke(main, ["synth", "--out", out, "--n", "6",
                                  "--image-size", "128", "--seed", "0"])
    assert result.exit_code == 0, result.output
    return out


class TestDetect:
    def test_detect_writes_masks_and_report(self, runner, mesh_image, tmp_path):
        out = str(tmp_path / "out")
        result = runner.invoke(main, ["detect", mesh_image, "--out", out])
        assert result.exit_code == 0, result.output
        assert os.path.isfile(os.path.join(out, "mesh_defect.png"))
        assert os.path.isfile(os.path.join(out, "mesh_broken.png"))
        assert os.path.isfile(os.path.join(out, "mesh_block.png"))
        assert os.path.isfile(os.path.join(out, "mesh_overview.png"))
        assert os.path.isfile(os.path.join(out, "report.csv"))
        assert os.path.isfile(os.path.join(out, "run_config.csv"))
        mask = load_mask(os.path.join(out, "mesh_block.png"))
        assert mask.any()

    def test_missing_file_nonzero_exit(self, runner, tmp_path):
        out = str(tmp_path / "out")
        result = runner.invoke(main, ["detect", str(tmp_path / "nope.png"),
                                      "--out", out])
        assert result.exit_code == 1
        assert "nope.png" in result.output

    def test_deterministic_outputs(self, runner, mesh_image, tmp_path):
        outs = []
        for sub in ("a", "b"):
            out = str(tmp_path / sub)
            result = runner.invoke(main, ["detect", mesh_image, "--out", out,
                                          "--no-figures"])
            assert result.exit_code == 0
            blobs = []
            for name in ("mesh_defect.png", "report.csv", "run_config.csv"):
                with open(os.path.join(out, name), "rb") as fh:
                    blobs.append(fh.read())
            outs.append(blobs)
        assert outs[0] == outs[1]


class TestConfigPrecedence:
    def test_flag_beats_file_beats_default(self, runner, mesh_image, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("lambda = 0.2\nseg_k = 4.0\n")
        out = str(tmp_path / "out")
        result = runner.invoke(main, ["detect", mesh_image, "--out", out,
                                      "--config", str(cfg), "--lam", "0.15",
                                      "--no-figures"])
        assert result.exit_code == 0, result.output
        text = open(os.path.join(out, "run_config.csv")).read()
        assert "lam,0.15" in text      # flag wins over file
        assert "seg_k,4.0" in text     # file wins over default

    def test_unknown_config_key_rejected(self, runner, mesh_image, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("volume = 11\n")
        result = runner.invoke(main, ["detect", mesh_image,
                                      "--out", str(tmp_path / "o"),
                                      "--config", str(cfg)])
        assert result.exit_code == 2
        assert "unknown config key" in result.output

    def test_invalid_invocation_exit_two(self, runner):
        result = runner.invoke(main, ["detect"])  # missing args
        assert result.exit_code == 2


class TestPriorDecomposeSegment:
    def test_prior_outputs(self, runner, mesh_image, tmp_path):
        out = str(tmp_path / "prior")
        result = runner.invoke(main, ["prior", mesh_image, "--out", out])
        assert result.exit_code == 0, result.output
        for name in ("block_prior.png", "broken_prior.png", "weights.png",
                     "fusion_map.png", "lowpass_1.png", "lowpass_2.png",
                     "lowpass_3.png", "primitives.txt"):
            assert os.path.isfile(os.path.join(out, name)), name
        lines = open(os.path.join(out, "primitives.txt")).read().splitlines()
        assert lines and all(l.startswith("line ") for l in lines)
        assert all("votes=" in l for l in lines)

    def test_decompose_then_segment(self, runner, mesh_image, tmp_path):
        dec_out = str(tmp_path / "dec")
        result = runner.invoke(main, ["decompose", mesh_image, "--out", dec_out])
        assert result.exit_code == 0, result.output
        matrix = os.path.join(dec_out, "defect_matrix.npy")
        assert os.path.isfile(matrix)
        assert os.path.isfile(os.path.join(dec_out, "trace.csv"))
        assert os.path.isfile(os.path.join(dec_out, "trace.png"))
        trace_rows = open(os.path.join(dec_out, "trace.csv")).read().splitlines()
        assert trace_rows[0] == "iteration,residual,objective"
        assert len(trace_rows) >= 2

        seg_out = str(tmp_path / "seg")
        result = runner.invoke(main, ["segment", matrix, "--out", seg_out])
        assert result.exit_code == 0, result.output
        assert load_mask(os.path.join(seg_out, "block.png")).any()


class TestEval:
    def test_eval_runs_pipeline(self, runner, dataset_dir, tmp_path):
        out = str(tmp_path / "eval")
        result = runner.invoke(main, ["eval", dataset_dir, "--out", out])
        assert result.exit_code == 0, result.output
        assert os.path.isfile(os.path.join(out, "metrics.csv"))
        assert os.path.isfile(os.path.join(out, "summary.csv"))
        assert os.path.isfile(os.path.join(out, "tpr_fpr.png"))
        assert os.path.isfile(os.path.join(out, "f_hist.png"))
        assert "all:" in result.output

    def test_eval_perfect_predictions(self, runner, dataset_dir, tmp_path):
        pred = tmp_path / "pred"
        pred.mkdir()
        items = load_dataset(dataset_dir)
        from meshinspect.image import save_mask

        for item in items:
            name = f"img_{item.metadata['index']:03d}.png"
            save_mask(item.gt_broken | item.gt_block, str(pred / name))
        out = str(tmp_path / "eval2")
        result = runner.invoke(main, ["eval", dataset_dir, "--out", out,
                                      "--pred-dir", str(pred), "--no-figures"])
        assert result.exit_code == 0, result.output
        rows = open(os.path.join(out, "metrics.csv")).read().splitlines()[1:]
        for row in rows:
            assert row.split(",")[-1] == "1.0"  # f = 1 for oracle input

    def test_eval_empty_predictions_zero_tpr(self, runner, dataset_dir, tmp_path):
        pred = tmp_path / "empty"
        pred.mkdir()
        items = load_dataset(dataset_dir)
        from meshinspect.image import save_mask

        size = items[0].image.shape
        for item in items:
            name = f"img_{item.metadata['index']:03d}.png"
            save_mask(np.zeros(size, dtype=bool), str(pred / name))
        out = str(tmp_path / "eval3")
        result = runner.invoke(main, ["eval", dataset_dir, "--out", out,
                                      "--pred-dir", str(pred), "--no-figures"])
        assert result.exit_code == 1  # every f absent -> partial failure
        rows = open(os.path.join(out, "metrics.csv")).read().splitlines()[1:]
        assert all(row.split(",")[7] == "0.0" for row in rows)  # tpr column


class TestSynth:
    def test_synth_dataset_layout(self, runner, dataset_dir):
        assert os.path.isdir(os.path.join(dataset_dir, "images"))
        assert os.path.isdir(os.path.join(dataset_dir, "gt_broken"))
        assert os.path.isdir(os.path.join(dataset_dir, "gt_block"))
        items = load_dataset(dataset_dir)
        assert len(items) == 6
        kinds = [it.metadata["kind"] for it in items]
        assert kinds.count("broken") == 2 and kinds.count("block") == 2

    def test_bad_mix_rejected(self, runner, tmp_path):
        result = runner.invoke(main, ["synth", "--out", str(tmp_path / "x"),
                                      "--n", "3", "--mix", "0.9,0.9"])
        assert result.exit_code == 2


class TestScanPlanStitch:
    def test_plan_reference_quantities(self, runner, tmp_path):
        out = str(tmp_path / "plan")
        result = runner.invoke(main, ["scan-plan", "--width", "2000",
                                      "--height", "2000", "--step", "500",
                                      "--fov", "800", "--dwell", "2",
                                      "--out", out])
        assert result.exit_code == 0, result.output
        assert "nodes=25" in result.output
        assert "overlap=300" in result.output
        assert "total_dwell=50" in result.output
        rows = open(os.path.join(out, "plan.csv")).read().splitlines()
        assert len(rows) == 26  # header + 25 nodes
        assert os.path.isfile(os.path.join(out, "plan.png"))

    def test_no_redundancy_exit_two(self, runner, tmp_path):
        result = runner.invoke(main, ["scan-plan", "--width", "1000",
                                      "--height", "1000", "--step", "800",
                                      "--fov", "800",
                                      "--out", str(tmp_path / "p")])
        assert result.exit_code == 2
        assert "no redundancy" in result.output

    def test_stitch_roundtrip(self, runner, tmp_path):
        from meshinspect.scanning import cut_tiles, plan_s_path

        plan_dir = str(tmp_path / "plan")
        result = runner.invoke(main, ["scan-plan", "--width", "1000",
                                      "--height", "1000", "--step", "500",
                                      "--fov", "800", "--out", plan_dir,
                                      "--no-figures"])
        assert result.exit_code == 0
        source, _, _ = generate(MeshSpec(period=8, image_size=192, seed=7),
                                DefectSpec(count=0))
        plan = plan_s_path((1000.0, 1000.0), 500.0, 800.0)
        tiles_dir = tmp_path / "tiles"
        tiles_dir.mkdir()
        for i, (tile, _) in enumerate(cut_tiles(source, plan, 10.0, (56, 56))):
            save_gray(tile, str(tiles_dir / f"tile_{i:03d}.png"))
        mosaic_path = str(tmp_path / "mosaic.png")
        result = runner.invoke(main, ["stitch", "--plan",
                                      os.path.join(plan_dir, "plan.csv"),
                                      "--tiles-dir", str(tiles_dir),
                                      "--pitch", "10", "--out", mosaic_path])
        assert result.exit_code == 0, result.output
        mosaic = load_gray(mosaic_path)
        h, w = mosaic.shape
        assert np.abs(mosaic - source[:h, :w]).max() <= 1 / 255 + 1e-9


class TestOptics:
    def test_report_contains_reference_magnification(self, runner):
        result = runner.invoke(main, ["optics"])
        assert result.exit_code == 0
        assert "Mo = 2.52x" in result.output
        assert "Md = 18.0x" in result.output
        assert "0.3171" in result.output  # 0.8 um / 2.52265 magnification

    def test_custom_system(self, runner, tmp_path):
        out_path = str(tmp_path / "optics.csv")
        result = runner.invoke(main, ["optics", "--f-tube", "80",
                                      "--out", out_path])
        assert result.exit_code == 0
        assert "Mo = 5.05x" in result.output
        assert os.path.isfile(out_path)
