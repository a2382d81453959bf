import math

import numpy as np
import pytest

import oracles
from discaug.errors import DataError
from discaug.neural import checkpoint
from discaug.neural.layers import (
    AttentionParams, HeadParams, LstmParams, attention, attention_forward, bilstm_encode,
    classify_head, conv_maxpool, cross_entropy, dropout, lstm_cell, reverse_index, softmax,
)
from discaug.neural.nets import AttnBiLSTM, TextCNN, pad_batch
from discaug.neural.optim import AdamState, adam_step, clip_grad_norm
from discaug.neural.gradcheck import grad_check, relative_error


def as_lists(p: LstmParams):
    return {k: v.tolist() for k, v in p.as_dict().items()}


def random_lstm(rng, d, H, scale=0.8):
    p = LstmParams.init(d, H, rng, scale)
    for g in "fioc":
        setattr(p, f"b_{g}", rng.uniform(-scale, scale, H))
    return p


def random_attention(rng, in_dim, d_a):
    p = AttentionParams.init(in_dim, d_a, rng, 0.8, 0.8)
    p.b = rng.uniform(-0.5, 0.5, d_a)
    return p


class TestLstmCell:
    def test_zero_params(self):
        p = LstmParams.zeros(3, 2)
        c_prev = np.array([0.4, -1.2])
        h, c = lstm_cell(np.ones(3), np.zeros(2), c_prev, p)
        np.testing.assert_allclose(c, 0.5 * c_prev, atol=1e-15)
        np.testing.assert_allclose(h, 0.5 * np.tanh(0.5 * c_prev), atol=1e-15)

    def test_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            d, H = rng.integers(1, 5), rng.integers(1, 5)
            p = random_lstm(rng, d, H)
            x, h0, c0 = rng.normal(size=d), rng.normal(size=H), rng.normal(size=H)
            h, c = lstm_cell(x, h0, c0, p)
            h_ref, c_ref = oracles.lstm_step(x.tolist(), h0.tolist(), c0.tolist(), as_lists(p))
            np.testing.assert_allclose(h, h_ref, rtol=0, atol=1e-10)
            np.testing.assert_allclose(c, c_ref, rtol=0, atol=1e-10)

    def test_ranges(self):
        rng = np.random.default_rng(1)
        p = random_lstm(rng, 4, 3, scale=3.0)
        h = c = np.zeros(3)
        for _ in range(20):
            h, c = lstm_cell(rng.normal(size=4) * 5, h, c, p)
            assert np.all(np.abs(h) < 1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            lstm_cell(np.ones(2), np.zeros(2), np.zeros(2), LstmParams.zeros(3, 2))

    def test_non_finite(self):
        with pytest.raises(ValueError):
            lstm_cell(np.array([np.nan, 0, 0]), np.zeros(2), np.zeros(2), LstmParams.zeros(3, 2))


class TestBiLSTM:
    def test_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            d, H, T = rng.integers(1, 4), rng.integers(1, 4), rng.integers(1, 6)
            fwd, bwd = random_lstm(rng, d, H), random_lstm(rng, d, H)
            x = rng.normal(size=(T, d))
            out = bilstm_encode(x, fwd, bwd)
            ref = oracles.bilstm(x.tolist(), as_lists(fwd), as_lists(bwd))
            assert out.shape == (T, 2 * H)
            np.testing.assert_allclose(out, ref, rtol=0, atol=1e-10)

    def test_padding_does_not_leak(self):
        rng = np.random.default_rng(3)
        fwd, bwd = random_lstm(rng, 3, 2), random_lstm(rng, 3, 2)
        x = rng.normal(size=(4, 3))
        padded = np.concatenate([x, rng.normal(size=(2, 3))])
        pad_mask = np.array([False] * 4 + [True] * 2)
        np.testing.assert_allclose(bilstm_encode(padded, fwd, bwd, pad_mask)[:4],
                                   bilstm_encode(x, fwd, bwd), atol=1e-14)

    def test_reverse_index_involution(self):
        mask = np.array([[1, 1, 1, 0, 0], [1, 1, 1, 1, 1], [1, 0, 0, 0, 0]], bool)
        rev = reverse_index(mask)
        assert rev[0].tolist() == [2, 1, 0, 3, 4]
        np.testing.assert_array_equal(np.take_along_axis(rev, rev, axis=1), np.tile(np.arange(5), (3, 1)))

    def test_empty(self):
        with pytest.raises(ValueError):
            bilstm_encode(np.zeros((0, 3)), LstmParams.zeros(3, 2), LstmParams.zeros(3, 2))


class TestAttention:
    def test_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            T, k, d_a = rng.integers(1, 6), rng.integers(1, 5), rng.integers(1, 4)
            p = random_attention(rng, k, d_a)
            h = rng.normal(size=(T, k))
            pad = rng.random(T) < 0.3
            pad[rng.integers(T)] = False
            c, alpha = attention(h, p, pad)
            c_ref, a_ref = oracles.attention(h.tolist(), p.W_h.tolist(), p.W_v.tolist(), p.b.tolist(),
                                             p.v.tolist(), valid=(~pad).tolist())
            np.testing.assert_allclose(c, c_ref, rtol=0, atol=1e-10)
            np.testing.assert_allclose(alpha, a_ref, rtol=0, atol=1e-10)

    def test_single_position(self):
        rng = np.random.default_rng(5)
        h = rng.normal(size=(1, 4))
        c, alpha = attention(h, random_attention(rng, 4, 2))
        assert alpha.tolist() == [1.0]
        np.testing.assert_allclose(c, h[0], atol=1e-15)

    def test_identical_states_uniform(self):
        rng = np.random.default_rng(6)
        h = np.tile(rng.normal(size=4), (5, 1))
        _, alpha = attention(h, random_attention(rng, 4, 3))
        np.testing.assert_allclose(alpha, 0.2, atol=1e-15)

    def test_normalization_and_masking(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            T = rng.integers(1, 8)
            p = random_attention(rng, 3, 2)
            pad = rng.random(T) < 0.4
            pad[0] = False
            _, alpha = attention(rng.normal(size=(T, 3)) * 3, p, pad)
            assert np.all(alpha >= 0)
            assert abs(alpha.sum() - 1.0) <= 1e-6
            assert np.all(alpha[pad] == 0.0)

    def test_all_masked(self):
        p = AttentionParams(np.zeros((2, 3)), np.zeros((2, 2)), np.zeros(2), np.zeros(2))
        with pytest.raises(ValueError):
            attention_forward(np.zeros((1, 2, 3)), np.zeros((1, 2), bool), p)


class TestHeadAndLoss:
    def test_log3(self):
        p = HeadParams(np.zeros((2, 1)), np.array([math.log(3), 0.0]))
        np.testing.assert_allclose(classify_head([0.0], p), [0.75, 0.25], atol=1e-15)

    def test_softmax_normalized_and_shift_invariant(self):
        rng = np.random.default_rng(8)
        for _ in range(1000):
            z = rng.normal(size=rng.integers(2, 6)) * 10
            y = softmax(z)
            assert abs(y.sum() - 1.0) <= 1e-9
            np.testing.assert_allclose(softmax(z + rng.normal() * 50), y, rtol=0, atol=1e-9)

    def test_cross_entropy(self):
        assert cross_entropy([0.5, 0.5], 0) == pytest.approx(math.log(2), abs=1e-15)
        assert cross_entropy([0.0, 1.0], 1) == 0.0
        assert cross_entropy([0.0, 1.0], 0) == pytest.approx(-math.log(1e-12))

    def test_non_finite_context(self):
        with pytest.raises(ValueError):
            classify_head([np.inf], HeadParams(np.zeros((2, 1)), np.zeros(2)))


class TestConv:
    def test_oracle(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            d, T = rng.integers(1, 4), rng.integers(1, 7)
            widths = sorted(rng.choice([1, 2, 3, 4], size=rng.integers(1, 3), replace=False).tolist())
            filters = {w: (rng.normal(size=(2, w, d)), rng.normal(size=2)) for w in widths}
            x = rng.normal(size=(T, d))
            out = conv_maxpool(x, filters)
            banks = [(w, filters[w][0].tolist(), filters[w][1].tolist()) for w in widths]
            np.testing.assert_allclose(out, oracles.conv_maxpool(x.tolist(), banks), rtol=0, atol=1e-10)
            assert np.all(out >= 0)

    def test_batching_invariant(self):
        rng = np.random.default_rng(10)
        net = TextCNN.create(12, 4, (2, 3), 3, rng, dropout=0.0)
        seqs = [[2, 3], [4, 5, 6, 7, 8], [9]]
        idx, mask = pad_batch(seqs, 3)
        batched = net.predict_proba(idx, mask)
        for row, s in enumerate(seqs):
            i1, m1 = pad_batch([s], 3)
            np.testing.assert_allclose(net.predict_proba(i1, m1)[0], batched[row], atol=1e-14)


class TestDropout:
    def test_keep_rate(self):
        rng = np.random.default_rng(11)
        out = dropout(np.ones(200_000), 0.5, rng)
        assert abs((out > 0).mean() - 0.5) < 0.01
        assert set(np.unique(out)) <= {0.0, 2.0}

    def test_inference_identity(self):
        x = np.arange(5.0)
        np.testing.assert_array_equal(dropout(x, 0.5, None, training=False), x)

    def test_bad_rate(self):
        with pytest.raises(ValueError):
            dropout(np.ones(2), 1.0, np.random.default_rng(0))


class TestAdam:
    def test_zero_gradient(self):
        params = {"w": np.array([1.0, -2.0])}
        state = AdamState.for_params(params)
        adam_step(params, {"w": np.zeros(2)}, state)
        np.testing.assert_array_equal(params["w"], [1.0, -2.0])

    def test_first_step(self):
        params = {"w": np.array([0.3])}
        state = AdamState.for_params(params)
        adam_step(params, {"w": np.array([1.0])}, state)
        assert params["w"][0] == pytest.approx(0.3 - 1e-3 / (1 + 1e-8), abs=1e-15)

    def test_decreases_quadratic(self):
        params = {"w": np.array([2.0, -1.0])}
        state = AdamState.for_params(params, lr=0.05)
        prev = float(np.sum(params["w"] ** 2))
        for _ in range(50):
            adam_step(params, {"w": 2 * params["w"]}, state)
            cur = float(np.sum(params["w"] ** 2))
            assert cur <= prev
            prev = cur

    def test_non_finite(self):
        params = {"w": np.zeros(1)}
        with pytest.raises(FloatingPointError):
            adam_step(params, {"w": np.array([np.nan])}, AdamState.for_params(params))

    def test_clip(self):
        grads = {"a": np.array([3.0]), "b": np.array([4.0])}
        assert clip_grad_norm(grads, 1.0) == pytest.approx(5.0)
        assert math.hypot(grads["a"][0], grads["b"][0]) == pytest.approx(1.0)


def small_validator(seed=0, scale=0.5):
    rng = np.random.default_rng(seed)
    net = AttnBiLSTM.create(6, 3, 2, 2, rng, scale=scale)
    net.params["embedding"] = rng.uniform(-1, 1, size=(6, 3))
    net.params["attn.b"] = rng.uniform(-0.3, 0.3, 2)
    net.params["head.b_s"] = rng.uniform(-0.3, 0.3, 2)
    idx, mask = pad_batch([[1, 2, 3, 4], [5, 2], [3, 3, 1]])
    return net, idx, mask, np.array([0, 1, 1])


class TestGradCheck:
    def test_relative_error(self):
        assert relative_error(np.array(0.0), np.array(0.0)) == 0.0
        assert relative_error(np.array(1.0), np.array(-1.0)) == 1.0

    def test_validator_graph(self):
        net, idx, mask, labels = small_validator()
        assert grad_check(net, idx, mask, labels) < 1e-4

    def test_fault_injection(self):
        net, idx, mask, labels = small_validator()
        assert grad_check(net, idx, mask, labels, corrupt={"fwd.W_f": 2.0}) > 1e-1

    def test_zero_parameters(self):
        net, idx, mask, labels = small_validator()
        for v in net.params.values():
            v[...] = 0.0
        assert grad_check(net, idx, mask, labels) < 1e-4

    def test_cnn(self):
        rng = np.random.default_rng(3)
        net = TextCNN.create(7, 3, (2, 3), 2, rng, dropout=0.0, scale=0.5)
        net.params["head.b_s"] = np.array([0.1, -0.2])
        idx, mask = pad_batch([[1, 2, 3, 4, 5], [6, 2], [3, 3, 1]], 3)
        assert grad_check(net, idx, mask, np.array([0, 1, 0])) < 1e-4


class TestCheckpoint:
    def test_roundtrip_exact(self, tmp_path):
        net, *_ = small_validator()
        path = tmp_path / "v.ckpt"
        checkpoint.save(path, net.dims, net.params, tokens=["<pad>", "<unk>", "a", "b", "c", "d"])
        assert path.read_text().startswith("discaug-ckpt v1 3 2 2 6\n")
        dims, blocks, tokens = checkpoint.load(path)
        assert dims == (3, 2, 2, 6)
        assert tokens[2:] == ["a", "b", "c", "d"]
        for name, value in net.params.items():
            np.testing.assert_array_equal(blocks[name].reshape(value.shape), value)

    def test_bad_magic(self):
        with pytest.raises(DataError):
            checkpoint.loads("hello\n")

    def test_truncated(self):
        with pytest.raises(DataError):
            checkpoint.loads("discaug-ckpt v1 1 1 1 1\nw 2 1\n0.5\n")

    def test_missing(self, tmp_path):
        with pytest.raises(DataError):
            checkpoint.load(tmp_path / "none.ckpt")


def test_training_trajectory_deterministic():
    def run():
        net, idx, mask, labels = small_validator(seed=4)
        net.dropout = 0.3
        state = AdamState.for_params(net.params)
        rng = np.random.default_rng(9)
        for _ in range(5):
            _, grads = net.loss_and_grads(idx, mask, labels, training=True, rng=rng)
            clip_grad_norm(grads)
            adam_step(net.params, grads, state)
        return net.params

    a, b = run(), run()
    for k in a:
        assert a[k].tobytes() == b[k].tobytes()
