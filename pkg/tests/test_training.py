import numpy as np
import pytest

from miscue.clips import assemble_compilation
from miscue.errors import DataError, NumericError
from miscue.lstm import PARAM_FIELDS, predict_probs
from miscue.salience import SalienceMethod, SalientMoment
from miscue.training import (
    TrainingConfig,
    compilation_features,
    load_checkpoint,
    pos_weight_from_labels,
    save_checkpoint,
    train,
    training_examples,
    write_curves,
)

from .conftest import make_stream


def toy_dataset(n=8, t=4, d=3, seed=0):
    """Separable toy data: positives shifted up by 1."""
    rng = np.random.default_rng(seed)
    data = []
    for i in range(n):
        label = bool(i % 2)
        x = rng.normal(size=(t, d)) * 0.3 + (1.0 if label else 0.0)
        data.append((x, label))
    return data


class TestTrain:
    def test_memorizes_four_samples(self):
        data = toy_dataset(n=4)
        config = TrainingConfig(epochs=2000, batch_size=4, learning_rate=1e-2, seed=0)
        params, curves = train(data, data, config, hidden_dim=8)
        assert min(curves.train_loss) < 0.05
        assert len(curves.train_loss) == config.epochs
        assert len(curves.val_accuracy) == config.epochs

    def test_deterministic_for_fixed_seed(self):
        data = toy_dataset(n=8)
        config = TrainingConfig(epochs=15, batch_size=3, learning_rate=1e-3, seed=5)
        params_a, curves_a = train(data[:6], data[6:], config, hidden_dim=6)
        params_b, curves_b = train(data[:6], data[6:], config, hidden_dim=6)
        for name in PARAM_FIELDS:
            assert np.array_equal(getattr(params_a, name), getattr(params_b, name))
        assert curves_a.train_loss == curves_b.train_loss
        assert curves_a.val_accuracy == curves_b.val_accuracy

    def test_different_seed_changes_outcome(self):
        data = toy_dataset(n=8)
        config_a = TrainingConfig(epochs=5, batch_size=4, learning_rate=1e-3, seed=1)
        config_b = TrainingConfig(epochs=5, batch_size=4, learning_rate=1e-3, seed=2)
        params_a, _ = train(data[:6], data[6:], config_a, hidden_dim=6)
        params_b, _ = train(data[:6], data[6:], config_b, hidden_dim=6)
        assert not np.array_equal(params_a.wx, params_b.wx)

    def test_returns_best_validation_parameters(self):
        data = toy_dataset(n=12, seed=3)
        config = TrainingConfig(epochs=25, batch_size=4, learning_rate=5e-3, seed=3)
        params, curves = train(data[:8], data[8:], config, hidden_dim=6)
        val_xs = [x for x, _ in data[8:]]
        val_ys = np.array([y for _, y in data[8:]])
        acc = float(np.mean((predict_probs(params, val_xs) >= 0.5) == val_ys))
        assert acc == pytest.approx(max(curves.val_accuracy))

    def test_non_finite_loss_raises(self):
        data = toy_dataset(n=4)
        bad = [(np.full((3, 3), np.nan), True)] + data[:3]
        config = TrainingConfig(epochs=2, batch_size=4, learning_rate=1e-3, seed=0)
        with pytest.raises(NumericError, match="non-finite"):
            train(bad, data, config, hidden_dim=4)

    def test_decimation_applied_to_sequences(self):
        data = [(np.arange(30, dtype=float).reshape(10, 3), bool(i % 2)) for i in range(4)]
        config = TrainingConfig(
            epochs=1, batch_size=2, learning_rate=1e-3, seed=0, decimate_n=4
        )
        # 10 frames decimated by 4 -> 3 frames; just verify it runs and is
        # consistent with manually decimated input.
        params_a, _ = train(data, data, config, hidden_dim=4)
        manual = [(x[::4], y) for x, y in data]
        config_b = TrainingConfig(epochs=1, batch_size=2, learning_rate=1e-3, seed=0)
        params_b, _ = train(manual, manual, config_b, hidden_dim=4)
        for name in PARAM_FIELDS:
            assert np.array_equal(getattr(params_a, name), getattr(params_b, name))

    def test_mixed_feature_dims_rejected(self):
        data = [(np.zeros((3, 3)), True), (np.zeros((3, 4)), False)]
        config = TrainingConfig(epochs=1, batch_size=2, learning_rate=1e-3)
        with pytest.raises(DataError, match="dimension"):
            train(data, data, config)

    def test_config_validation(self):
        with pytest.raises(DataError):
            TrainingConfig(epochs=0, batch_size=1, learning_rate=1e-3)
        with pytest.raises(DataError):
            TrainingConfig(epochs=1, batch_size=1, learning_rate=-1.0)
        with pytest.raises(DataError):
            TrainingConfig(epochs=1, batch_size=1, learning_rate=1e-3, pos_weight=0.0)
        with pytest.raises(DataError, match="seed"):
            TrainingConfig(epochs=1, batch_size=1, learning_rate=1e-3, seed=-1)


class TestPosWeight:
    def test_corpus_rate(self):
        labels = [True] * 272 + [False] * 728
        assert pos_weight_from_labels(labels) == pytest.approx((1 - 0.272) / 0.272)

    def test_balanced_gives_one(self):
        assert pos_weight_from_labels([True, False]) == pytest.approx(1.0)

    def test_single_class_rejected(self):
        with pytest.raises(DataError, match="single-class"):
            pos_weight_from_labels([True, True])
        with pytest.raises(DataError, match="empty"):
            pos_weight_from_labels([])


class TestFeatures:
    def _compilation(self, label=True):
        stream = make_stream(100, keypoints=True, seed=8)
        moments = [SalientMoment(50, 1.0, SalienceMethod.KEYPOINT_TOPK)]
        return assemble_compilation(stream, moments, 60, 2, label=label)

    def test_priority_prefers_blendshapes(self):
        comp = self._compilation()
        feats = compilation_features(comp)
        assert feats.shape == (30, 52)

    def test_channel_override(self):
        comp = self._compilation()
        feats = compilation_features(comp, channel="keypoints")
        assert feats.shape == (30, 936)

    def test_missing_channel(self):
        comp = self._compilation()
        with pytest.raises(DataError, match="embedding"):
            compilation_features(comp, channel="embedding")

    def test_training_examples_require_labels(self):
        comp = self._compilation(label=None)
        with pytest.raises(DataError, match="no label"):
            training_examples([comp])
        labelled = self._compilation(label=False)
        examples = training_examples([labelled])
        assert examples[0][1] is False


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        data = toy_dataset(n=4)
        config = TrainingConfig(epochs=2, batch_size=2, learning_rate=1e-3, seed=9)
        params, _ = train(data, data, config, hidden_dim=4)
        path = tmp_path / "model.npz"
        save_checkpoint(path, params, config, extra={"note": "test"})
        loaded, loaded_config, extra = load_checkpoint(path)
        for name in PARAM_FIELDS:
            assert np.array_equal(getattr(params, name), getattr(loaded, name))
        assert loaded_config == config
        assert extra == {"note": "test"}

    def test_bytes_reproducible(self, tmp_path):
        data = toy_dataset(n=4)
        config = TrainingConfig(epochs=1, batch_size=2, learning_rate=1e-3, seed=9)
        params, _ = train(data, data, config, hidden_dim=4)
        a = tmp_path / "a.npz"
        b = tmp_path / "b.npz"
        save_checkpoint(a, params, config)
        save_checkpoint(b, params, config)
        assert a.read_bytes() == b.read_bytes()

    def test_version_check(self, tmp_path):
        import json

        path = tmp_path / "bad.npz"
        data = toy_dataset(n=2)
        config = TrainingConfig(epochs=1, batch_size=2, learning_rate=1e-3)
        params, _ = train(data, data, config, hidden_dim=4)
        save_checkpoint(path, params, config)
        with np.load(path) as z:
            arrays = {name: z[name] for name in z.files}
        meta = json.loads(bytes(arrays["meta"]).decode())
        meta["format_version"] = 99
        arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
        np.savez(path, **arrays)
        with pytest.raises(DataError, match="version"):
            load_checkpoint(path)


def test_write_curves(tmp_path):
    from miscue.training import TrainingCurves

    curves = TrainingCurves([0.5, 0.4], [0.6, 0.7], [0.55, 0.65])
    path = tmp_path / "curves.tsv"
    write_curves(curves, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch\ttrain_loss\ttrain_accuracy\tval_accuracy"
    assert len(lines) == 3
    assert lines[1].split("\t")[0] == "0"
