"""From-scratch gated recurrent sequence classifier.

A standard LSTM cell is unrolled over the input sequence; the final
hidden state feeds an affine head squashed through the logistic
function, giving a probability that the sequence shows a
miscommunication.  Gradients are exact analytic backpropagation through
time; there is no autodiff dependency.

Gate weights are stored stacked as ``(4 * hidden, ...)`` arrays in the
order input, forget, output, candidate; the three sigmoid gates occupy
one contiguous block so each timestep needs a single sigmoid and a
single tanh.  Batches of equal-length sequences run as stacked matrix
products; mixed-length batches are grouped by length, so no padding is
ever introduced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError

#: Clamp applied to probabilities before taking logs in the loss.
LOSS_EPS = 1e-12

_GATE_NAMES = ("input", "forget", "output", "candidate")

#: Parameter/gradient array fields, used by the optimizer to iterate state.
PARAM_FIELDS = ("wx", "wh", "bias", "head_w", "head_b")


@dataclass
class LSTMParams:
    """All trainable weights.

    ``wx``: (4H, D) input-to-gate weights; ``wh``: (4H, H) recurrent
    weights; ``bias``: (4H,); ``head_w``: (H,) and ``head_b``: (1,)
    for the scalar readout.
    """

    wx: np.ndarray
    wh: np.ndarray
    bias: np.ndarray
    head_w: np.ndarray
    head_b: np.ndarray

    @property
    def input_dim(self) -> int:
        return int(self.wx.shape[1])

    @property
    def hidden_dim(self) -> int:
        return int(self.wh.shape[1])

    def gate_slice(self, gate: str) -> slice:
        idx = _GATE_NAMES.index(gate)
        h = self.hidden_dim
        return slice(idx * h, (idx + 1) * h)

    def copy(self) -> "LSTMParams":
        return LSTMParams(*(getattr(self, f).copy() for f in PARAM_FIELDS))

    def validate(self) -> None:
        h = self.hidden_dim
        d = self.input_dim
        shapes = {
            "wx": (4 * h, d),
            "wh": (4 * h, h),
            "bias": (4 * h,),
            "head_w": (h,),
            "head_b": (1,),
        }
        for name, expected in shapes.items():
            arr = getattr(self, name)
            if arr.shape != expected:
                raise DataError(f"parameter {name} has shape {arr.shape}, expected {expected}")
            if not np.all(np.isfinite(arr)):
                raise DataError(f"parameter {name} contains non-finite values")


@dataclass
class LSTMGradients:
    """Gradient arrays congruent to :class:`LSTMParams`."""

    wx: np.ndarray
    wh: np.ndarray
    bias: np.ndarray
    head_w: np.ndarray
    head_b: np.ndarray

    @classmethod
    def zeros_like(cls, params: LSTMParams) -> "LSTMGradients":
        return cls(*(np.zeros_like(getattr(params, f)) for f in PARAM_FIELDS))

    def zero_(self) -> None:
        for name in PARAM_FIELDS:
            getattr(self, name).fill(0.0)


def init_params(input_dim: int, hidden_dim: int, rng: np.random.Generator) -> LSTMParams:
    """Uniform init in [-1/sqrt(H), 1/sqrt(H)]; forget-gate bias set to 1."""
    if input_dim < 1 or hidden_dim < 1:
        raise DataError("input_dim and hidden_dim must be positive")
    scale = 1.0 / math.sqrt(hidden_dim)
    params = LSTMParams(
        wx=rng.uniform(-scale, scale, size=(4 * hidden_dim, input_dim)),
        wh=rng.uniform(-scale, scale, size=(4 * hidden_dim, hidden_dim)),
        bias=rng.uniform(-scale, scale, size=4 * hidden_dim),
        head_w=rng.uniform(-scale, scale, size=hidden_dim),
        head_b=rng.uniform(-scale, scale, size=1),
    )
    params.bias[params.gate_slice("forget")] = 1.0
    return params


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _sigmoid_inplace(z: np.ndarray) -> None:
    # exp may overflow to inf for very negative inputs; 1/(1+inf) is the
    # correct limit 0, so the result stays exact.
    np.negative(z, out=z)
    np.exp(z, out=z)
    z += 1.0
    np.reciprocal(z, out=z)


def _as_sequence(params: LSTMParams, sequence) -> np.ndarray:
    x = np.asarray(sequence, dtype=np.float64)
    if x.ndim != 2:
        raise DataError(f"sequence must be 2-d (steps, features), got shape {x.shape}")
    if x.shape[0] == 0:
        raise DataError("sequence must be non-empty")
    if x.shape[1] != params.input_dim:
        raise DataError(
            f"sequence feature dimension {x.shape[1]} does not match "
            f"model input_dim {params.input_dim}"
        )
    return x


def forward(params: LSTMParams, sequence) -> float:
    """Probability in (0, 1) for a single sequence."""
    x = _as_sequence(params, sequence)
    probs, _ = _forward_batch(params, x[None, :, :], want_cache=False)
    return float(probs[0])


def _forward_batch(
    params: LSTMParams, x: np.ndarray, want_cache: bool
) -> tuple[np.ndarray, tuple | None]:
    """Run ``x`` of shape (B, T, D) through the net; optionally cache for BPTT.

    Internally time-major: per-step slabs are contiguous so the
    recurrent product and the activations write in place.
    """
    b, t_len, d = x.shape
    h = params.hidden_dim
    xt = np.ascontiguousarray(x.transpose(1, 0, 2))
    # Input projections for every timestep in one product.
    zx = (xt.reshape(t_len * b, d) @ params.wx.T).reshape(t_len, b, 4 * h)
    zx += params.bias

    hs = np.empty((t_len + 1, b, h))
    cs = np.empty((t_len + 1, b, h))
    hs[0] = 0.0
    cs[0] = 0.0
    gates = np.empty((t_len, b, 4 * h)) if want_cache else None
    tanh_cs = np.empty((t_len, b, h)) if want_cache else None
    zbuf = None if want_cache else np.empty((b, 4 * h))
    tcbuf = None if want_cache else np.empty((b, h))
    cbuf = np.empty((b, h))

    wh_t = params.wh.T
    prev_h = hs[0]
    with np.errstate(over="ignore"):
        for t in range(t_len):
            z = gates[t] if want_cache else zbuf
            np.dot(prev_h, wh_t, out=z)
            z += zx[t]
            _sigmoid_inplace(z[:, : 3 * h])
            np.tanh(z[:, 3 * h :], out=z[:, 3 * h :])
            gi = z[:, :h]
            gf = z[:, h : 2 * h]
            go = z[:, 2 * h : 3 * h]
            gg = z[:, 3 * h :]
            np.multiply(gf, cs[t], out=cs[t + 1])
            np.multiply(gi, gg, out=cbuf)
            cs[t + 1] += cbuf
            tc = tanh_cs[t] if want_cache else tcbuf
            np.tanh(cs[t + 1], out=tc)
            np.multiply(go, tc, out=hs[t + 1])
            prev_h = hs[t + 1]

    logits = hs[t_len] @ params.head_w + params.head_b[0]
    probs = _sigmoid(logits)
    cache = (xt, hs, cs, gates, tanh_cs) if want_cache else None
    return probs, cache


def _accumulate_backward(
    params: LSTMParams,
    cache: tuple,
    dlogit: np.ndarray,
    grads: LSTMGradients,
) -> None:
    """Add the gradient contribution of one cached forward pass to ``grads``."""
    xt, hs, cs, gates, tanh_cs = cache
    t_len, b, d = xt.shape
    h = params.hidden_dim

    grads.head_w += hs[t_len].T @ dlogit
    grads.head_b += dlogit.sum(keepdims=True)

    dh = np.multiply(dlogit[:, None], params.head_w[None, :])
    dc = np.zeros((b, h))
    das = np.empty((t_len, b, 4 * h))
    t1 = np.empty((b, h))
    t3 = np.empty((b, 3 * h))
    for t in range(t_len - 1, -1, -1):
        g = gates[t]
        gi = g[:, :h]
        gf = g[:, h : 2 * h]
        go = g[:, 2 * h : 3 * h]
        gg = g[:, 3 * h :]
        tc = tanh_cs[t]
        da = das[t]
        # dc += dh * go * (1 - tanh(c)^2)
        np.multiply(tc, tc, out=t1)
        np.subtract(1.0, t1, out=t1)
        t1 *= go
        t1 *= dh
        dc += t1
        np.multiply(dc, gg, out=da[:, :h])
        np.multiply(dc, cs[t], out=da[:, h : 2 * h])
        np.multiply(dh, tc, out=da[:, 2 * h : 3 * h])
        np.multiply(dc, gi, out=da[:, 3 * h :])
        sig = g[:, : 3 * h]
        np.subtract(1.0, sig, out=t3)
        t3 *= sig
        da[:, : 3 * h] *= t3
        np.multiply(gg, gg, out=t1)
        np.subtract(1.0, t1, out=t1)
        da[:, 3 * h :] *= t1
        np.dot(da, params.wh, out=dh)
        dc *= gf

    flat = das.reshape(t_len * b, 4 * h)
    grads.wx += flat.T @ xt.reshape(t_len * b, d)
    grads.wh += flat.T @ hs[:t_len].reshape(t_len * b, h)
    grads.bias += flat.sum(axis=0)


def loss(prob: float, label: bool, pos_weight: float = 1.0) -> float:
    """Weighted binary cross-entropy for one prediction.

    The probability is clamped to [LOSS_EPS, 1 - LOSS_EPS] before the
    log so the loss stays finite.
    """
    if not pos_weight > 0:
        raise DataError(f"pos_weight must be positive, got {pos_weight}")
    p = min(max(float(prob), LOSS_EPS), 1.0 - LOSS_EPS)
    if label:
        return -pos_weight * math.log(p)
    return -math.log(1.0 - p)


def batch_outputs(
    params: LSTMParams,
    batch: list[tuple[np.ndarray, bool]],
    pos_weight: float = 1.0,
) -> tuple[LSTMGradients, float, np.ndarray]:
    """Gradients of the mean batch loss, plus the loss and probabilities.

    Sequences are grouped by length and each group runs as one stacked
    pass; group contributions are reduced in a fixed order, so the
    result does not depend on how work might be parallelized.
    """
    if not batch:
        raise DataError("batch must be non-empty")
    xs = [_as_sequence(params, seq) for seq, _ in batch]
    labels = np.array([bool(lab) for _, lab in batch], dtype=np.float64)
    if not pos_weight > 0:
        raise DataError(f"pos_weight must be positive, got {pos_weight}")

    groups: dict[int, list[int]] = {}
    for idx, x in enumerate(xs):
        groups.setdefault(x.shape[0], []).append(idx)

    n = len(batch)
    grads = LSTMGradients.zeros_like(params)
    probs = np.empty(n)
    total_loss = 0.0
    for t_len in sorted(groups):
        idxs = groups[t_len]
        x = np.stack([xs[i] for i in idxs])
        y = labels[idxs]
        p, group_loss = _stacked_batch(params, x, y, pos_weight, n, grads)
        probs[idxs] = p
        total_loss += group_loss
    return grads, total_loss / n, probs


def _stacked_batch(
    params: LSTMParams,
    x: np.ndarray,
    y: np.ndarray,
    pos_weight: float,
    denominator: int,
    grads: LSTMGradients,
) -> tuple[np.ndarray, float]:
    """One stacked forward/backward pass; adds 1/denominator-scaled
    gradients into ``grads`` and returns (probs, summed loss)."""
    p, cache = _forward_batch(params, x, want_cache=True)
    clamped = np.clip(p, LOSS_EPS, 1.0 - LOSS_EPS)
    total = float(
        -(pos_weight * y * np.log(clamped) + (1.0 - y) * np.log(1.0 - clamped)).sum()
    )
    dlogit = (pos_weight * y * (p - 1.0) + (1.0 - y) * p) / denominator
    _accumulate_backward(params, cache, dlogit, grads)
    return p, total


def gradients(
    params: LSTMParams,
    batch: list[tuple[np.ndarray, bool]],
    pos_weight: float = 1.0,
) -> LSTMGradients:
    """Exact analytic gradient of the mean batch loss."""
    grads, _, _ = batch_outputs(params, batch, pos_weight)
    return grads


def predict_probs(
    params: LSTMParams,
    sequences: list[np.ndarray],
    max_batch: int = 512,
) -> np.ndarray:
    """Probabilities for many sequences, grouped by length internally."""
    xs = [_as_sequence(params, seq) for seq in sequences]
    groups: dict[int, list[int]] = {}
    for idx, x in enumerate(xs):
        groups.setdefault(x.shape[0], []).append(idx)
    out = np.empty(len(xs))
    for t_len in sorted(groups):
        idxs = groups[t_len]
        for start in range(0, len(idxs), max_batch):
            chunk = idxs[start : start + max_batch]
            x = np.stack([xs[i] for i in chunk])
            p, _ = _forward_batch(params, x, want_cache=False)
            out[chunk] = p
    return out
