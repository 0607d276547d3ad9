import json
from pathlib import Path

import pytest

from deepsr.cli import main
from deepsr.imaging import load_image

GEN_ARGS = [
    "gen-toy",
    "--subjects", "8",
    "--hr-size", "12",
    "--lr-size", "6",
    "--probes", "1",
    "--seed", "0",
]

TRAIN_ARGS = [
    "--levels", "2",
    "--atoms", "10,8",
    "--lam", "0.05",
    "--lr-size", "6",
    "--epochs", "3",
    "--lasso-max-iters", "100",
    "--lasso-tol", "1e-8",
]


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_corpus")
    assert main(GEN_ARGS + ["--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def model_path(corpus_dir, tmp_path_factory):
    path = tmp_path_factory.mktemp("cli_model") / "model.bin"
    code = main(
        ["train", "--manifest", str(corpus_dir / "manifest.csv"),
         "--model-out", str(path)] + TRAIN_ARGS
    )
    assert code == 0
    return path


class TestGenToy:
    def test_writes_corpus(self, corpus_dir, capsys):
        assert (corpus_dir / "manifest.csv").exists()
        assert (corpus_dir / "s000_gallery.pgm").exists()
        assert (corpus_dir / "s007_probe0.pgm").exists()

    def test_prints_manifest_path(self, tmp_path, capsys):
        out = tmp_path / "c"
        assert main(GEN_ARGS + ["--out", str(out)]) == 0
        assert capsys.readouterr().out.strip() == str(out / "manifest.csv")

    def test_invalid_geometry_exits_2(self, tmp_path, capsys):
        code = main(
            ["gen-toy", "--out", str(tmp_path / "c"), "--hr-size", "8",
             "--lr-size", "6"]
        )
        assert code == 2
        assert "lr_size" in capsys.readouterr().err


class TestDownsample:
    def test_resizes_probes(self, corpus_dir, tmp_path, capsys):
        out = tmp_path / "lr"
        code = main(
            ["downsample", "--manifest", str(corpus_dir / "manifest.csv"),
             "--lr-size", "3", "--out", str(out)]
        )
        assert code == 0
        manifest_path = Path(capsys.readouterr().out.strip())
        assert manifest_path == out / "manifest.csv"
        text = manifest_path.read_text()
        assert "_probe0_3.pgm" in text

    def test_target_larger_than_probe_exits_2(self, corpus_dir, tmp_path, capsys):
        code = main(
            ["downsample", "--manifest", str(corpus_dir / "manifest.csv"),
             "--lr-size", "16", "--out", str(tmp_path / "lr")]
        )
        assert code == 2
        assert "smaller" in capsys.readouterr().err

    def test_missing_manifest_exits_2(self, tmp_path, capsys):
        code = main(
            ["downsample", "--manifest", str(tmp_path / "nope.csv"),
             "--lr-size", "3", "--out", str(tmp_path / "lr")]
        )
        assert code == 2


class TestTrain:
    def test_reports_traces_and_writes_model(self, corpus_dir, model_path, capsys):
        assert model_path.exists() and model_path.stat().st_size > 0

    def test_trace_output(self, corpus_dir, tmp_path, capsys):
        path = tmp_path / "m.bin"
        main(["train", "--manifest", str(corpus_dir / "manifest.csv"),
              "--model-out", str(path)] + TRAIN_ARGS)
        out = capsys.readouterr().out
        assert "low level 1" in out and "high level 2" in out
        assert f"model written to {path}" in out

    def test_deterministic_given_seed(self, corpus_dir, model_path, tmp_path):
        again = tmp_path / "again.bin"
        main(["train", "--manifest", str(corpus_dir / "manifest.csv"),
              "--model-out", str(again)] + TRAIN_ARGS)
        assert again.read_bytes() == model_path.read_bytes()

    def test_seed_changes_model(self, corpus_dir, model_path, tmp_path):
        other = tmp_path / "other.bin"
        main(["train", "--manifest", str(corpus_dir / "manifest.csv"),
              "--model-out", str(other), "--seed", "5"] + TRAIN_ARGS)
        assert other.read_bytes() != model_path.read_bytes()

    def test_config_file_applies(self, corpus_dir, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "levels = 1\n"
            "atoms = 10  # single level\n"
            "lam = 0.05\n"
            "epochs = 2\n"
            "lr_size = 6\n"
            "lasso_max_iters = 100\n"
            "lasso_tol = 1e-8\n"
        )
        path = tmp_path / "m.bin"
        code = main(
            ["train", "--manifest", str(corpus_dir / "manifest.csv"),
             "--model-out", str(path), "--config", str(cfg)]
        )
        assert code == 0
        from deepsr.modelio import read_model

        assert read_model(path).config.levels == 1

    def test_unknown_config_key_exits_2(self, corpus_dir, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("atosm = 10\n")
        code = main(
            ["train", "--manifest", str(corpus_dir / "manifest.csv"),
             "--model-out", str(tmp_path / "m.bin"), "--config", str(cfg)]
        )
        assert code == 2
        assert "atosm" in capsys.readouterr().err

    def test_atoms_levels_mismatch_exits_2(self, corpus_dir, tmp_path, capsys):
        code = main(
            ["train", "--manifest", str(corpus_dir / "manifest.csv"),
             "--model-out", str(tmp_path / "m.bin"), "--levels", "3",
             "--atoms", "10,8"] + TRAIN_ARGS[2:]
        )
        assert code == 2
        assert "atoms list" in capsys.readouterr().err

    def test_numerical_failure_exits_3(self, corpus_dir, tmp_path, capsys):
        # A huge sparsity weight zeroes every code, so alternating
        # minimization cannot produce usable atoms or a mapping.
        code = main(
            ["train", "--manifest", str(corpus_dir / "manifest.csv"),
             "--model-out", str(tmp_path / "m.bin"), "--levels", "1",
             "--atoms", "10", "--lam", "50", "--lambda-m", "0",
             "--lr-size", "6", "--epochs", "1"]
        )
        assert code == 3
        assert capsys.readouterr().err.startswith("numerical error:")


class TestSynth:
    def test_synthesizes_probe(self, corpus_dir, model_path, tmp_path, capsys):
        out = tmp_path / "hr"
        probe = corpus_dir / "s000_probe0.pgm"
        code = main(
            ["synth", "--model", str(model_path), "--out", str(out), str(probe)]
        )
        assert code == 0
        result = out / "s000_probe0_hr.pgm"
        assert result.exists()
        img = load_image(result)
        assert (img.height, img.width) == (12, 12)
        assert "ms)" in capsys.readouterr().out

    def test_wrong_size_without_resize_exits_2(
        self, corpus_dir, model_path, tmp_path, capsys
    ):
        gallery = corpus_dir / "s000_gallery.pgm"  # 12x12, model wants 6x6
        code = main(
            ["synth", "--model", str(model_path), "--out", str(tmp_path / "hr"),
             str(gallery)]
        )
        assert code == 2
        assert "--resize" in capsys.readouterr().err

    def test_resize_coerces(self, corpus_dir, model_path, tmp_path):
        gallery = corpus_dir / "s000_gallery.pgm"
        code = main(
            ["synth", "--model", str(model_path), "--out", str(tmp_path / "hr"),
             "--resize", str(gallery)]
        )
        assert code == 0
        assert (tmp_path / "hr" / "s000_gallery_hr.pgm").exists()

    def test_missing_model_exits_2(self, corpus_dir, tmp_path, capsys):
        code = main(
            ["synth", "--model", str(tmp_path / "no.bin"),
             "--out", str(tmp_path / "hr"),
             str(corpus_dir / "s000_probe0.pgm")]
        )
        assert code == 2


class TestEval:
    def test_writes_reports(self, corpus_dir, model_path, tmp_path, capsys):
        prefix = tmp_path / "reports" / "toy"
        code = main(
            ["eval", "--model", str(model_path),
             "--manifest", str(corpus_dir / "manifest.csv"),
             "--report-out", str(prefix)]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "synthesis: rank-1" in out and "bicubic: rank-1" in out
        csv_text = prefix.with_suffix(".csv").read_text()
        assert csv_text.startswith("method,rank,accuracy")
        data = json.loads(prefix.with_suffix(".json").read_text())
        assert set(data["methods"]) == {"synthesis", "bicubic"}
        assert data["n_probes"] == 8

    def test_ranks_filter_and_no_baseline(
        self, corpus_dir, model_path, tmp_path
    ):
        prefix = tmp_path / "toy"
        code = main(
            ["eval", "--model", str(model_path),
             "--manifest", str(corpus_dir / "manifest.csv"),
             "--report-out", str(prefix), "--ranks", "1,5",
             "--baselines", "none"]
        )
        assert code == 0
        lines = prefix.with_suffix(".csv").read_text().strip().splitlines()
        assert lines[1:] == [
            line for line in lines[1:] if line.startswith("synthesis,")
        ]
        assert {line.split(",")[1] for line in lines[1:]} == {"1", "5"}

    def test_missing_model_exits_2(self, corpus_dir, tmp_path, capsys):
        code = main(
            ["eval", "--model", str(tmp_path / "no.bin"),
             "--manifest", str(corpus_dir / "manifest.csv"),
             "--report-out", str(tmp_path / "r")]
        )
        assert code == 2
