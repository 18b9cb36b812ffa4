"""Training loop, checkpointing, and feature extraction for the classifier.

Mini-batch adaptive gradient descent (first/second moment estimates with
the standard 0.9/0.999 decay constants) over the weighted cross-entropy
loss.  Everything is seeded, so a (data, config) pair reproduces the
same parameters bit for bit.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .clips import ClipCompilation
from .errors import DataError, NumericError
from .lstm import (
    PARAM_FIELDS,
    LSTMGradients,
    LSTMParams,
    _stacked_batch,
    batch_outputs,
    init_params,
    predict_probs,
)

CHECKPOINT_VERSION = 1

#: Classification threshold used for accuracy during training.
DECISION_THRESHOLD = 0.5

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int
    batch_size: int
    learning_rate: float
    pos_weight: float = 1.0
    seed: int = 0
    decimate_n: int = 1

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise DataError(f"epochs must be positive, got {self.epochs}")
        if self.batch_size < 1:
            raise DataError(f"batch_size must be positive, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise DataError(f"learning_rate must be positive, got {self.learning_rate}")
        if not self.pos_weight > 0:
            raise DataError(f"pos_weight must be positive, got {self.pos_weight}")
        if self.seed < 0:
            raise DataError("seed must be non-negative")
        if self.decimate_n < 1:
            raise DataError(f"decimate_n must be positive, got {self.decimate_n}")


@dataclass
class TrainingCurves:
    train_loss: list[float]
    train_accuracy: list[float]
    val_accuracy: list[float]


class _Adam:
    def __init__(self, params: LSTMParams) -> None:
        self.m = LSTMGradients.zeros_like(params)
        self.v = LSTMGradients.zeros_like(params)
        self._num = LSTMGradients.zeros_like(params)
        self._den = LSTMGradients.zeros_like(params)
        self.t = 0

    def update(self, params: LSTMParams, grads: LSTMGradients, lr: float) -> None:
        self.t += 1
        bc1 = 1.0 - _ADAM_BETA1**self.t
        bc2 = 1.0 - _ADAM_BETA2**self.t
        # Folded bias correction: lr * (m/bc1) / (sqrt(v/bc2) + eps) equals
        # (lr * sqrt(bc2) / bc1) * m / (sqrt(v) + eps * sqrt(bc2)).
        scale = lr * np.sqrt(bc2) / bc1
        eps_hat = _ADAM_EPS * np.sqrt(bc2)
        for name in PARAM_FIELDS:
            g = getattr(grads, name)
            m = getattr(self.m, name)
            v = getattr(self.v, name)
            num = getattr(self._num, name)
            den = getattr(self._den, name)
            m *= _ADAM_BETA1
            m += (1.0 - _ADAM_BETA1) * g
            v *= _ADAM_BETA2
            np.multiply(g, g, out=num)
            num *= 1.0 - _ADAM_BETA2
            v += num
            np.sqrt(v, out=den)
            den += eps_hat
            np.multiply(m, scale, out=num)
            num /= den
            getattr(params, name)[...] -= num


def _prepare_set(
    dataset: list[tuple[np.ndarray, bool]], decimate_n: int
) -> tuple[list[np.ndarray], np.ndarray]:
    if not dataset:
        raise DataError("dataset must be non-empty")
    xs = []
    for seq, _ in dataset:
        x = np.asarray(seq, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] == 0:
            raise DataError("every sequence must be a non-empty 2-d array")
        xs.append(x[::decimate_n])
    dims = {x.shape[1] for x in xs}
    if len(dims) != 1:
        raise DataError(f"sequences disagree on feature dimension: {sorted(dims)}")
    ys = np.array([bool(lab) for _, lab in dataset])
    return xs, ys


def _accuracy(probs: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean((probs >= DECISION_THRESHOLD) == labels))


def train(
    train_set: list[tuple[np.ndarray, bool]],
    val_set: list[tuple[np.ndarray, bool]],
    config: TrainingConfig,
    hidden_dim: int = 256,
) -> tuple[LSTMParams, TrainingCurves]:
    """Train and return the best-validation-accuracy parameters.

    Per-epoch training loss/accuracy are accumulated over the epoch's
    mini-batches; validation accuracy is measured after each epoch.  On
    ties the earlier epoch's parameters are kept.
    """
    train_xs, train_ys = _prepare_set(train_set, config.decimate_n)
    val_xs, val_ys = _prepare_set(val_set, config.decimate_n)
    if train_xs[0].shape[1] != val_xs[0].shape[1]:
        raise DataError("train and validation sets disagree on feature dimension")

    rng = np.random.default_rng(config.seed)
    params = init_params(train_xs[0].shape[1], hidden_dim, rng)
    adam = _Adam(params)
    curves = TrainingCurves([], [], [])
    best_params = params.copy()
    best_val = -1.0

    n = len(train_xs)
    # Uniform-length datasets (the common case) are stacked once so each
    # mini-batch is a single fancy-index instead of a per-batch restack.
    uniform = len({x.shape[0] for x in train_xs}) == 1
    stacked = np.stack(train_xs) if uniform else None
    labels_f = train_ys.astype(np.float64)
    grads = LSTMGradients.zeros_like(params)

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for start in range(0, n, config.batch_size):
            idxs = order[start : start + config.batch_size]
            if uniform:
                grads.zero_()
                probs, batch_loss_sum = _stacked_batch(
                    params, stacked[idxs], labels_f[idxs], config.pos_weight,
                    len(idxs), grads,
                )
                mean_loss = batch_loss_sum / len(idxs)
            else:
                batch = [(train_xs[i], bool(train_ys[i])) for i in idxs]
                grads, mean_loss, probs = batch_outputs(params, batch, config.pos_weight)
            if not np.isfinite(mean_loss):
                raise NumericError(
                    f"non-finite training loss at epoch {epoch}, batch starting {start}"
                )
            adam.update(params, grads, config.learning_rate)
            loss_sum += mean_loss * len(idxs)
            correct += int(np.sum((probs >= DECISION_THRESHOLD) == train_ys[idxs]))
        val_acc = _accuracy(predict_probs(params, val_xs), val_ys)
        curves.train_loss.append(loss_sum / n)
        curves.train_accuracy.append(correct / n)
        curves.val_accuracy.append(val_acc)
        if val_acc > best_val:
            best_val = val_acc
            best_params = params.copy()
    return best_params, curves


def pos_weight_from_labels(labels) -> float:
    """Imbalance weight (1 - p) / p from the training positive fraction."""
    arr = np.asarray([bool(v) for v in labels])
    if arr.size == 0:
        raise DataError("cannot derive pos_weight from an empty label set")
    p = float(arr.mean())
    if p <= 0.0 or p >= 1.0:
        raise DataError(f"pos_weight undefined for single-class labels (p={p})")
    return (1.0 - p) / p


#: Channel preference when a compilation carries several.
_FEATURE_PRIORITY = ("blendshapes", "embedding", "keypoints")


def compilation_features(comp: ClipCompilation, channel: str | None = None) -> np.ndarray:
    """Per-frame feature matrix of a compilation for model input."""
    channels = comp.stream.channels
    if channel is not None:
        if channel not in channels:
            raise DataError(f"compilation has no {channel!r} channel")
        return np.asarray(channels[channel])
    for name in _FEATURE_PRIORITY:
        if name in channels:
            return np.asarray(channels[name])
    raise DataError("compilation has no feature channels")


def training_examples(
    comps: list[ClipCompilation], channel: str | None = None
) -> list[tuple[np.ndarray, bool]]:
    """(features, label) pairs; every compilation must be labelled."""
    out = []
    for comp in comps:
        if comp.label is None:
            raise DataError(f"compilation {comp.source_id} has no label")
        out.append((compilation_features(comp, channel), bool(comp.label)))
    return out


def save_checkpoint(
    path: str | Path,
    params: LSTMParams,
    config: TrainingConfig,
    extra: dict | None = None,
) -> None:
    """Write a versioned .npz checkpoint with reproducible bytes."""
    params.validate()
    meta = {
        "format_version": CHECKPOINT_VERSION,
        "input_dim": params.input_dim,
        "hidden_dim": params.hidden_dim,
        "config": asdict(config),
        "extra": extra or {},
    }
    entries: list[tuple[str, np.ndarray]] = [
        ("meta", np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8))
    ]
    entries.extend((name, getattr(params, name)) for name in PARAM_FIELDS)
    # Fixed zip timestamps keep checkpoint bytes identical across reruns.
    with zipfile.ZipFile(Path(path), "w", zipfile.ZIP_STORED) as zf:
        for name, arr in entries:
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arr))
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, buf.getvalue())


def load_checkpoint(path: str | Path) -> tuple[LSTMParams, TrainingConfig, dict]:
    with np.load(Path(path)) as data:
        try:
            meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        except (KeyError, ValueError) as exc:
            raise DataError(f"malformed checkpoint metadata: {exc}") from exc
        if meta.get("format_version") != CHECKPOINT_VERSION:
            raise DataError(
                f"unsupported checkpoint version {meta.get('format_version')!r}"
            )
        try:
            params = LSTMParams(*(data[name].astype(np.float64) for name in PARAM_FIELDS))
        except KeyError as exc:
            raise DataError(f"checkpoint is missing array {exc}") from exc
    params.validate()
    config = TrainingConfig(**meta["config"])
    return params, config, meta.get("extra", {})


def write_curves(curves: TrainingCurves, path: str | Path) -> None:
    """Tab-delimited per-epoch curves."""
    lines = ["epoch\ttrain_loss\ttrain_accuracy\tval_accuracy"]
    for i, (tl, ta, va) in enumerate(
        zip(curves.train_loss, curves.train_accuracy, curves.val_accuracy)
    ):
        lines.append(f"{i}\t{tl!r}\t{ta!r}\t{va!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
