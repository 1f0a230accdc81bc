import csv
import io
import re

import numpy as np
import pytest

from perlin_init.cli import build_parser, main
from perlin_init.datasets_io import read_checkpoint, read_noise_dataset, read_pgm

ALL_FLAGS = {
    "generate": ["-N", "-M", "-K", "-W", "-H", "-C", "--seed", "--out", "--config", "--preview"],
    "pretrain": ["--data", "--arch", "--epochs", "--lr", "--momentum", "--batch", "--seed", "--out", "--config"],
    "compare": [
        "--schemes", "--seeds", "--shapes", "--idx-images", "--idx-labels", "--perlin-ckpt", "-W", "-H",
        "--arch", "--epochs", "--lr", "--momentum", "--batch", "--seed", "--out", "--config",
    ],
    "export-filters": ["--ckpt", "--seed", "--out", "--config"],
}


def run(*argv):
    return main([str(a) for a in argv])


def rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """A tiny noise archive and checkpoint shared by the tests below."""
    d = tmp_path_factory.mktemp("cli")
    assert run("generate", "-N", 2, "-M", 2, "-K", 3, "-W", 16, "-H", 16, "--seed", 9, "--out", d / "n.bin") == 0
    assert run("pretrain", "--data", d / "n.bin", "--epochs", 5, "--batch", 4, "--out", d / "p.ckpt") == 0
    return d


class TestGenerate:
    def test_counts_and_rerun_identical(self, tmp_path, capsys):
        argv = ["generate", "-N", 2, "-M", 2, "-K", 3, "-W", 16, "-H", 16, "--seed", 9]
        assert run(*argv, "--out", tmp_path / "a.bin") == 0
        assert run(*argv, "--out", tmp_path / "b.bin") == 0
        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
        ds = read_noise_dataset(tmp_path / "a.bin")
        assert len(ds) == 12 and sorted(set(ds.labels().tolist())) == [1, 2, 3, 4]
        assert "event=generated samples=12 categories=4" in capsys.readouterr().out

    def test_grid_too_fine(self, tmp_path, capsys):
        assert run("generate", "-N", 6, "--out", tmp_path / "x.bin") == 2
        err = capsys.readouterr().err
        assert "-N" in err and "2^N <= W" in err
        assert not (tmp_path / "x.bin").exists()

    def test_missing_out(self, capsys):
        assert run("generate") == 2
        assert "--out" in capsys.readouterr().err

    def test_preview(self, tmp_path):
        assert run("generate", "-K", 1, "--out", tmp_path / "a.bin", "--preview", tmp_path / "a.pgm") == 0
        assert read_pgm(tmp_path / "a.pgm").shape == (3 * 33 + 1, 3 * 33 + 1)


class TestPretrain:
    def test_history(self, workdir):
        hist = rows(workdir / "p.history.csv")
        assert [int(r["epoch"]) for r in hist] == [1, 2, 3, 4, 5]
        assert list(hist[0]) == ["epoch", "train_loss", "train_accuracy", "lr"]
        ckpt = read_checkpoint(workdir / "p.ckpt")
        assert ckpt.fingerprint == read_noise_dataset(workdir / "n.bin").config.fingerprint()

    def test_deterministic(self, workdir, tmp_path):
        assert run("pretrain", "--data", workdir / "n.bin", "--epochs", 5, "--batch", 4, "--out", tmp_path / "q.ckpt") == 0
        assert (tmp_path / "q.ckpt").read_bytes() == (workdir / "p.ckpt").read_bytes()
        assert (tmp_path / "q.history.csv").read_bytes() == (workdir / "p.history.csv").read_bytes()

    def test_arch_head_mismatch(self, workdir, tmp_path, capsys):
        assert run("pretrain", "--data", workdir / "n.bin", "--arch", "minicnn:9", "--out", tmp_path / "q.ckpt") == 2
        assert "--arch" in capsys.readouterr().err

    def test_missing_data(self, tmp_path, capsys):
        assert run("pretrain", "--data", tmp_path / "none.bin", "--out", tmp_path / "q.ckpt") == 2
        assert "--data" in capsys.readouterr().err

    def test_malformed_archive(self, tmp_path, capsys):
        (tmp_path / "bad.bin").write_bytes(b"PRLNOISE\x01")
        assert run("pretrain", "--data", tmp_path / "bad.bin", "--out", tmp_path / "q.ckpt") == 1
        assert "malformed" in capsys.readouterr().err

    def test_bad_lr(self, workdir, tmp_path, capsys):
        assert run("pretrain", "--data", workdir / "n.bin", "--lr", -1, "--out", tmp_path / "q.ckpt") == 2
        assert "--lr" in capsys.readouterr().err

    @pytest.mark.slow
    def test_default_preset_loss_descends(self, tmp_path):
        assert run("generate", "--out", tmp_path / "n.bin") == 0
        assert run("pretrain", "--data", tmp_path / "n.bin", "--epochs", 4, "--out", tmp_path / "p.ckpt") == 0
        losses = [float(r["train_loss"]) for r in rows(tmp_path / "p.history.csv")]
        assert losses[-1] < losses[0]


class TestCompare:
    SHAPES = "classes=disk+cross+ring,train=6,test=6"

    def test_rows(self, tmp_path):
        out = tmp_path / "r.csv"
        argv = ["compare", "--schemes", "he,normal", "--seeds", "0,1", "--shapes", self.SHAPES,
                "-W", 16, "-H", 16, "--epochs", 2, "--out", out]
        assert run(*argv) == 0
        result = rows(out)
        assert [(r["scheme"], r["seed"]) for r in result] == [("he", "0"), ("he", "1"), ("normal", "0"), ("normal", "1")]
        assert all(r["dataset"] == "shapes" for r in result)
        assert len(rows(tmp_path / "r.curves.csv")) == 8
        first = out.read_bytes()
        assert run(*argv) == 0
        assert out.read_bytes() == first

    def test_with_checkpoint(self, workdir, tmp_path):
        out = tmp_path / "r.csv"
        assert run("compare", "--schemes", "perlin,he", "--seeds", 0, "--shapes", self.SHAPES,
                   "--perlin-ckpt", workdir / "p.ckpt", "--epochs", 1, "--out", out) == 0
        assert [r["scheme"] for r in rows(out)] == ["he", "perlin"]

    def test_missing_checkpoint(self, tmp_path, capsys):
        assert run("compare", "--schemes", "perlin", "--shapes", "--out", tmp_path / "r.csv") == 2
        assert "--perlin-ckpt" in capsys.readouterr().err
        assert run("compare", "--shapes", "--perlin-ckpt", tmp_path / "gone.ckpt", "--out", tmp_path / "r.csv") == 2
        assert "gone.ckpt" in capsys.readouterr().err

    def test_idx_source(self, tmp_path):
        from perlin_init.datasets_io import ShapesTask, encode_idx, make_shapes_dataset

        train, _ = make_shapes_dataset(ShapesTask(classes=("disk", "ring"), width=16, height=16, train_per_class=10))
        pixels = np.round(train.images[..., 0].transpose(0, 2, 1) * 255).astype(np.uint8)
        (tmp_path / "i.idx").write_bytes(encode_idx(pixels))
        (tmp_path / "l.idx").write_bytes(encode_idx(train.labels.astype(np.uint8)))
        out = tmp_path / "r.csv"
        assert run("compare", "--schemes", "he", "--seeds", 0, "--idx-images", tmp_path / "i.idx",
                   "--idx-labels", tmp_path / "l.idx", "--epochs", 1, "--batch", 4, "--out", out) == 0
        result = rows(out)
        assert len(result) == 1 and result[0]["dataset"] == "i.idx"
        assert float(result[0]["test_accuracy"]) in {k / 4 for k in range(5)}  # 20 samples, 4 held out

    def test_needs_one_source(self, tmp_path, capsys):
        assert run("compare", "--schemes", "he", "--out", tmp_path / "r.csv") == 2
        assert "--shapes" in capsys.readouterr().err

    def test_unknown_scheme(self, tmp_path, capsys):
        assert run("compare", "--schemes", "he,lsuv", "--shapes", "--out", tmp_path / "r.csv") == 2
        assert "--schemes" in capsys.readouterr().err


class TestExportFilters:
    def test_export(self, workdir, tmp_path, capsys):
        assert run("export-filters", "--ckpt", workdir / "p.ckpt", "--out", tmp_path / "f.pgm") == 0
        assert read_pgm(tmp_path / "f.pgm").shape == (17, 17)
        assert "width=17 height=17" in capsys.readouterr().out

    def test_missing(self, tmp_path, capsys):
        assert run("export-filters", "--ckpt", tmp_path / "x.ckpt", "--out", tmp_path / "f.pgm") == 2
        assert "--ckpt" in capsys.readouterr().err


class TestHelpAndConfig:
    def test_help_lists_every_flag(self, capsys):
        with pytest.raises(SystemExit):
            main(["--help"])
        text = capsys.readouterr().out
        for command, flags in ALL_FLAGS.items():
            line = re.search(rf"^  {command}: (.*)$", text, re.M)
            assert line, command
            assert line.group(1).split() == flags
        assert "PERLIN_INIT_WORKERS" in text

    def test_parser_matches_flag_table(self):
        sub = build_parser()._subparsers._group_actions[0].choices
        assert set(sub) == set(ALL_FLAGS)
        for name, sp in sub.items():
            flags = [s for a in sp._actions for s in a.option_strings if s not in ("-h", "--help")]
            assert flags == ALL_FLAGS[name]

    def test_config_file_and_precedence(self, tmp_path):
        cfg = tmp_path / "gen.cfg"
        cfg.write_text("# tiny\nN = 1\nM=1\nK=2\nW=8\nH=8\nseed=3\n")
        assert run("generate", "--config", cfg, "--out", tmp_path / "a.bin") == 0
        ds = read_noise_dataset(tmp_path / "a.bin")
        assert (ds.config.N, ds.config.K, ds.config.width, ds.config.master_seed) == (1, 2, 8, 3)
        assert run("generate", "--config", cfg, "-K", 4, "--out", tmp_path / "b.bin") == 0
        assert read_noise_dataset(tmp_path / "b.bin").config.K == 4

    def test_config_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("epochs=3\n")
        assert run("generate", "--config", cfg, "--out", tmp_path / "a.bin") == 2
        assert "--config" in capsys.readouterr().err
