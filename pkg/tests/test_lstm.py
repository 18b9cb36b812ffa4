import math

import numpy as np
import pytest

from miscue.errors import DataError
from miscue.lstm import (
    PARAM_FIELDS,
    LSTMParams,
    batch_outputs,
    forward,
    gradients,
    init_params,
    loss,
    predict_probs,
)


def zero_params(input_dim, hidden_dim):
    return LSTMParams(
        wx=np.zeros((4 * hidden_dim, input_dim)),
        wh=np.zeros((4 * hidden_dim, hidden_dim)),
        bias=np.zeros(4 * hidden_dim),
        head_w=np.zeros(hidden_dim),
        head_b=np.zeros(1),
    )


def random_params(input_dim, hidden_dim, seed=0, scale=0.6):
    rng = np.random.default_rng(seed)
    return LSTMParams(
        wx=rng.uniform(-scale, scale, size=(4 * hidden_dim, input_dim)),
        wh=rng.uniform(-scale, scale, size=(4 * hidden_dim, hidden_dim)),
        bias=rng.uniform(-scale, scale, size=4 * hidden_dim),
        head_w=rng.uniform(-scale, scale, size=hidden_dim),
        head_b=rng.uniform(-scale, scale, size=1),
    )


def reference_forward(params: LSTMParams, sequence) -> float:
    """Scalar re-implementation of the recursion, no vectorization."""

    def sig(v):
        return 1.0 / (1.0 + math.exp(-v))

    h_dim = params.hidden_dim
    h = [0.0] * h_dim
    c = [0.0] * h_dim
    for x in sequence:
        pre = []
        for row in range(4 * h_dim):
            z = params.bias[row]
            for d, xv in enumerate(x):
                z += params.wx[row, d] * xv
            for j in range(h_dim):
                z += params.wh[row, j] * h[j]
            pre.append(z)
        gi = [sig(pre[j]) for j in range(h_dim)]
        gf = [sig(pre[h_dim + j]) for j in range(h_dim)]
        go = [sig(pre[2 * h_dim + j]) for j in range(h_dim)]
        gg = [math.tanh(pre[3 * h_dim + j]) for j in range(h_dim)]
        c = [gf[j] * c[j] + gi[j] * gg[j] for j in range(h_dim)]
        h = [go[j] * math.tanh(c[j]) for j in range(h_dim)]
    logit = params.head_b[0] + sum(params.head_w[j] * h[j] for j in range(h_dim))
    return sig(logit)


def finite_difference_grads(params, batch, pos_weight, step=1e-6):
    """Central differences of the mean batch loss, component by component."""

    def batch_loss():
        total = 0.0
        for seq, label in batch:
            total += loss(forward(params, seq), label, pos_weight)
        return total / len(batch)

    fd = {}
    for name in PARAM_FIELDS:
        arr = getattr(params, name)
        out = np.zeros_like(arr)
        flat_in = arr.ravel()
        flat_out = out.ravel()
        for idx in range(flat_in.size):
            orig = flat_in[idx]
            flat_in[idx] = orig + step
            up = batch_loss()
            flat_in[idx] = orig - step
            down = batch_loss()
            flat_in[idx] = orig
            flat_out[idx] = (up - down) / (2.0 * step)
        fd[name] = out
    return fd


def max_relative_error(grads, fd) -> float:
    """Components below 1e-5 are effectively held to 1e-9 absolute."""
    worst = 0.0
    for name in PARAM_FIELDS:
        a = getattr(grads, name)
        b = fd[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-5)
        worst = max(worst, float(np.max(np.abs(a - b) / denom)))
    return worst


class TestForward:
    def test_zero_parameters_give_half(self):
        params = zero_params(4, 3)
        x = np.random.default_rng(0).normal(size=(6, 4))
        assert forward(params, x) == 0.5

    def test_matches_hand_unrolled_reference(self):
        params = random_params(2, 2, seed=7)
        x = np.array([[0.3, -0.4], [1.1, 0.2], [-0.6, 0.9]])
        assert forward(params, x) == pytest.approx(reference_forward(params, x), abs=1e-12)

    def test_reference_agreement_across_shapes(self):
        for seed, (d, h, t) in enumerate([(1, 1, 1), (3, 2, 4), (2, 5, 7)]):
            params = random_params(d, h, seed=seed)
            x = np.random.default_rng(seed).normal(size=(t, d))
            assert forward(params, x) == pytest.approx(
                reference_forward(params, x), abs=1e-12
            )

    def test_order_sensitivity(self):
        params = random_params(3, 4, seed=3)
        rng = np.random.default_rng(3)
        x = rng.normal(size=(5, 3))
        permuted = x[[4, 2, 0, 3, 1]]
        assert forward(params, x) != forward(params, permuted)

    def test_output_in_open_interval(self):
        params = random_params(3, 4, seed=5, scale=3.0)
        rng = np.random.default_rng(5)
        for _ in range(10):
            p = forward(params, rng.normal(size=(8, 3)))
            assert 0.0 < p < 1.0

    def test_dimension_mismatch(self):
        params = random_params(3, 4)
        with pytest.raises(DataError, match="dimension"):
            forward(params, np.zeros((5, 2)))

    def test_empty_sequence(self):
        params = random_params(3, 4)
        with pytest.raises(DataError, match="non-empty"):
            forward(params, np.zeros((0, 3)))

    def test_batched_predictions_match_single(self):
        params = random_params(3, 4, seed=9)
        rng = np.random.default_rng(9)
        seqs = [rng.normal(size=(t, 3)) for t in (2, 5, 5, 3, 2)]
        batched = predict_probs(params, seqs)
        single = np.array([forward(params, s) for s in seqs])
        assert np.allclose(batched, single, atol=1e-12)


class TestLoss:
    def test_half_prob_gives_ln2(self):
        assert loss(0.5, True, 1.0) == pytest.approx(math.log(2.0), abs=1e-15)
        assert loss(0.5, False, 1.0) == pytest.approx(math.log(2.0), abs=1e-15)

    def test_weight_one_reduces_to_unweighted(self):
        for p, y in ((0.2, True), (0.8, False), (0.7, True)):
            expected = -math.log(p) if y else -math.log(1.0 - p)
            assert loss(p, y, 1.0) == pytest.approx(expected, abs=1e-15)

    def test_corpus_imbalance_weight(self):
        weight = (1.0 - 0.272) / 0.272
        assert weight == pytest.approx(2.676, abs=5e-4)
        assert loss(0.3, True, weight) == pytest.approx(-weight * math.log(0.3), abs=1e-12)

    def test_clamping_keeps_loss_finite(self):
        assert math.isfinite(loss(0.0, True, 1.0))
        assert math.isfinite(loss(1.0, False, 1.0))
        assert loss(0.0, True, 1.0) == pytest.approx(-math.log(1e-12))

    def test_bad_weight(self):
        with pytest.raises(DataError, match="pos_weight"):
            loss(0.5, True, 0.0)


class TestGradients:
    def test_matches_finite_differences(self):
        params = random_params(3, 4, seed=11)
        rng = np.random.default_rng(11)
        batch = [
            (rng.normal(size=(2, 3)), True),
            (rng.normal(size=(5, 3)), False),
            (rng.normal(size=(5, 3)), True),
            (rng.normal(size=(3, 3)), False),
        ]
        grads = gradients(params, batch, pos_weight=1.7)
        fd = finite_difference_grads(params, batch, pos_weight=1.7)
        assert max_relative_error(grads, fd) < 1e-4

    def test_duplicated_batch_equals_single_sample(self):
        params = random_params(3, 4, seed=13)
        rng = np.random.default_rng(13)
        seq = rng.normal(size=(4, 3))
        single = gradients(params, [(seq, True)], pos_weight=2.0)
        doubled = gradients(params, [(seq, True), (seq, True)], pos_weight=2.0)
        for name in PARAM_FIELDS:
            assert np.allclose(
                getattr(single, name), getattr(doubled, name), rtol=0, atol=1e-15
            )

    def test_saturated_correct_prediction_has_negligible_gradient(self):
        # Head bias drives the logit to +40; with label True the learning
        # signal (p - 1) underflows to ~1e-18.
        params = zero_params(2, 3)
        params.head_b[0] = 40.0
        seq = np.ones((3, 2))
        grads = gradients(params, [(seq, True)], pos_weight=1.0)
        assert abs(grads.head_b[0]) < 1e-9
        assert np.max(np.abs(grads.head_w)) < 1e-9

    def test_empty_batch(self):
        params = random_params(2, 2)
        with pytest.raises(DataError, match="non-empty"):
            gradients(params, [])

    def test_mixed_dimension_batch(self):
        params = random_params(3, 2)
        with pytest.raises(DataError, match="dimension"):
            gradients(params, [(np.zeros((2, 3)), True), (np.zeros((2, 4)), False)])

    def test_mean_loss_reported(self):
        params = random_params(2, 3, seed=17)
        rng = np.random.default_rng(17)
        batch = [(rng.normal(size=(3, 2)), bool(i % 2)) for i in range(4)]
        _, mean_loss, probs = batch_outputs(params, batch, pos_weight=1.3)
        expected = np.mean([loss(p, lab, 1.3) for p, (_, lab) in zip(probs, batch)])
        assert mean_loss == pytest.approx(expected, abs=1e-12)


class TestInitParams:
    def test_shapes_and_forget_bias(self):
        rng = np.random.default_rng(0)
        params = init_params(52, 16, rng)
        params.validate()
        assert params.input_dim == 52
        assert params.hidden_dim == 16
        assert np.all(params.bias[params.gate_slice("forget")] == 1.0)
        scale = 1.0 / math.sqrt(16)
        assert np.max(np.abs(params.wx)) <= scale
        assert np.max(np.abs(params.head_w)) <= scale

    def test_bad_dims(self):
        with pytest.raises(DataError):
            init_params(0, 4, np.random.default_rng(0))
