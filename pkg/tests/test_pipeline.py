import numpy as np
import pytest

from perlin_init.datasets_io import Checkpoint, LabeledSet, ShapesTask, make_shapes_dataset, params_equal, read_pgm
from perlin_init.errors import InvalidConfigError, InvalidRequestError, TransferError
from perlin_init.nn import InitScheme, TrainConfig, init_params, minicnn, mlp
from perlin_init.perlin import DatasetConfig
from perlin_init.pipeline import (
    RESULT_HEADER,
    category_sheet,
    conv1_planes,
    default_workers,
    export_conv1_filters,
    export_curves,
    export_results,
    parse_curves,
    pretrain,
    run_comparison,
    transfer,
)

NOISE = DatasetConfig(N=2, M=2, K=6, width=16, height=16, channels=1, master_seed=4)
QUICK = TrainConfig(epochs=2, batch_size=8)


@pytest.fixture(scope="module")
def ckpt():
    return pretrain(NOISE, minicnn((16, 16, 1), 4), QUICK, seed=1)


@pytest.fixture(scope="module")
def shapes16():
    task = ShapesTask(classes=("disk", "cross", "ring"), width=16, height=16, train_per_class=8, test_per_class=10)
    return make_shapes_dataset(task)


class TestPretrain:
    def test_class_count_mismatch(self):
        with pytest.raises(InvalidConfigError, match="N\\*M"):
            pretrain(NOISE, minicnn((16, 16, 1), 5), QUICK)

    def test_input_shape_mismatch(self):
        with pytest.raises(InvalidConfigError):
            pretrain(NOISE, minicnn((32, 32, 1), 4), QUICK)

    def test_checkpoint_contents(self, ckpt):
        assert ckpt.init_provenance == "perlin-pretrain"
        assert ckpt.fingerprint == NOISE.fingerprint()
        assert ckpt.dataset_config["K"] == 6
        assert [h["epoch"] for h in ckpt.history] == [1, 2]
        assert all(v.startswith("perlin-pretrain<-") for v in ckpt.params.provenance.values())

    def test_deterministic(self, ckpt):
        again = pretrain(NOISE, minicnn((16, 16, 1), 4), QUICK, seed=1)
        assert params_equal(again.params, ckpt.params)
        assert again.history == ckpt.history


class TestTransfer:
    def test_features_copied_bitwise(self, ckpt):
        spec, params = transfer(ckpt, 3, head_seed=0)
        head = spec.head_index()
        for name, value in ckpt.params.tensors.items():
            if not name.startswith(f"{head}."):
                assert params.tensors[name].tobytes() == value.tobytes()
        assert params.tensors[f"{head}.weight"].shape == (512, 3)
        assert not params.tensors[f"{head}.bias"].any()
        assert spec.num_classes == 3

    def test_head_resampled_with_same_class_count(self, ckpt):
        _, params = transfer(ckpt, 4, head_seed=0)
        assert not np.array_equal(params.tensors["7.weight"], ckpt.params.tensors["7.weight"])

    def test_head_matches_he_draw(self, ckpt):
        spec, params = transfer(ckpt, 3, head_seed=11)
        fresh = init_params(spec, InitScheme("he", 11))
        assert np.array_equal(params.tensors["7.weight"], fresh.tensors["7.weight"])

    def test_head_seed_reproducible(self, ckpt):
        a = transfer(ckpt, 3, head_seed=5)[1]
        b = transfer(ckpt, 3, head_seed=5)[1]
        c = transfer(ckpt, 3, head_seed=6)[1]
        assert params_equal(a, b)
        assert not params_equal(a, c)

    def test_does_not_alias_checkpoint(self, ckpt):
        _, params = transfer(ckpt, 3, head_seed=0)
        params.tensors["0.weight"][0, 0, 0, 0] += 1.0
        assert params.tensors["0.weight"][0, 0, 0, 0] != ckpt.params.tensors["0.weight"][0, 0, 0, 0]

    def test_input_shape_mismatch(self, ckpt):
        with pytest.raises(TransferError, match="input"):
            transfer(ckpt, 3, head_seed=0, input_shape=(28, 28, 1))


class TestComparison:
    def test_reports(self, ckpt, shapes16):
        train, test = shapes16
        reports = run_comparison(train, test, ["perlin", "he", "zero"], QUICK, [1, 0], ckpt=ckpt)
        assert [(r.scheme, r.seed) for r in reports] == [
            ("he", 1), ("he", 0), ("perlin", 1), ("perlin", 0), ("zero", 1), ("zero", 0)
        ]
        for r in reports:
            assert len(r.history) == 2 and not r.diverged
            assert r.test_accuracy == r.history[-1]["val_accuracy"]
            assert r.dataset == "shapes"
        zero = [r for r in reports if r.scheme == "zero"]
        # all-zero weights give identical logits: argmax picks class 0, a third of the test set
        assert all(r.initial_val_accuracy == pytest.approx(1 / 3) for r in zero)

    def test_deterministic_and_shared_order(self, ckpt, shapes16):
        train, test = shapes16
        a = run_comparison(train, test, ["he"], QUICK, [3], ckpt=ckpt)
        b = run_comparison(train, test, ["he"], QUICK, [3], ckpt=ckpt)
        assert export_results(a) == export_results(b)
        assert export_curves(a) == export_curves(b)

    def test_perlin_needs_checkpoint(self, shapes16):
        with pytest.raises(InvalidConfigError):
            run_comparison(*shapes16, ["perlin"], QUICK, [0])

    def test_unknown_scheme(self, shapes16):
        with pytest.raises(InvalidConfigError):
            run_comparison(*shapes16, ["orthogonal"], QUICK, [0])

    def test_default_architecture_without_checkpoint(self, shapes16):
        reports = run_comparison(*shapes16, ["xavier"], TrainConfig(epochs=1), [0])
        assert reports[0].init_method == "xavier(seed=0)"

    def test_workers_env(self, monkeypatch):
        monkeypatch.setenv("PERLIN_INIT_WORKERS", "3")
        assert default_workers() == 3
        monkeypatch.setenv("PERLIN_INIT_WORKERS", "many")
        with pytest.raises(InvalidConfigError):
            default_workers()


class TestExports:
    def test_conv1_grid(self, ckpt, tmp_path):
        assert export_conv1_filters(ckpt, tmp_path / "f.pgm") == (17, 17)
        assert read_pgm(tmp_path / "f.pgm").shape == (17, 17)
        export_conv1_filters(ckpt, tmp_path / "g.pgm")
        assert (tmp_path / "f.pgm").read_bytes() == (tmp_path / "g.pgm").read_bytes()

    def test_zero_filters_mid_gray(self, tmp_path):
        spec = minicnn((16, 16, 1), 4)
        zero = Checkpoint(spec, init_params(spec, InitScheme("zero")), "zero")
        export_conv1_filters(zero, tmp_path / "z.pgm")
        raster = read_pgm(tmp_path / "z.pgm")
        tiles = [raster[1 + 4 * r: 4 + 4 * r, 1 + 4 * c: 4 + 4 * c] for r in range(4) for c in range(4)]
        assert all((t == 128).all() for t in tiles)

    def test_planes_normalized(self, ckpt):
        planes = conv1_planes(ckpt)
        assert len(planes) == 16
        assert all(p.min() == 0.0 and p.max() == 1.0 for p in planes)

    def test_non_conv_first_layer(self):
        spec = mlp((4, 4, 1), 3, 2)
        with pytest.raises(InvalidRequestError):
            export_conv1_filters(Checkpoint(spec, init_params(spec, InitScheme()), "he"), "unused.pgm")

    def test_curves_round_trip(self, ckpt, shapes16):
        reports = run_comparison(*shapes16, ["he", "perlin"], TrainConfig(epochs=10, batch_size=8), [0, 1], ckpt=ckpt)
        text = export_curves(reports)
        rows = parse_curves(text)
        assert len(rows) == 40
        assert rows[0][:3] == ("he", 0, 1) and rows[-1][:3] == ("perlin", 1, 10)
        expected = [(r.scheme, r.seed, h["epoch"], h["train_loss"], h["val_accuracy"]) for r in reports for h in r.history]
        assert rows == expected
        assert export_results(reports).splitlines()[0] == ",".join(RESULT_HEADER)

    def test_empty_curves(self):
        with pytest.raises(InvalidRequestError):
            export_curves([])

    def test_category_sheet(self):
        sheet = category_sheet(NOISE)
        assert len(sheet) == 4 and sheet[0].shape == (16, 16)


def test_labeled_set_classes():
    s = LabeledSet(np.zeros((3, 2, 2, 1)), np.array([0, 4, 1]), "x")
    assert s.num_classes == 5
