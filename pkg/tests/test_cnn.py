import numpy as np
import pytest

from lorarffi.cnn import (
    BatchNorm,
    Cnn,
    Conv2D,
    Dense,
    Flatten,
    MaxPool,
    ReLU,
    build_model,
    gradient_check,
    softmax,
)
from lorarffi.errors import ShapeError


def conv_oracle(x, w, b, pad):
    """Direct nested-loop convolution for one sample batch."""
    (pt, pb), (pl, pr) = pad
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    n, cin, h, wd = xp.shape
    cout, _, kh, kw = w.shape
    oh, ow = h - kh + 1, wd - kw + 1
    out = np.zeros((n, cout, oh, ow))
    for s in range(n):
        for co in range(cout):
            for i in range(oh):
                for j in range(ow):
                    acc = 0.0
                    for ci in range(cin):
                        for a in range(kh):
                            for bb in range(kw):
                                acc += xp[s, ci, i + a, j + bb] * w[co, ci, a, bb]
                    out[s, co, i, j] = acc + b[co]
    return out


class TestSoftmax:
    def test_sums_to_one(self):
        rng = np.random.default_rng(0)
        probs = softmax(rng.normal(size=(10, 7)))
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_closed_form_ln2(self):
        probs = softmax(np.array([np.log(2.0), 0.0]))
        np.testing.assert_allclose(probs, [2 / 3, 1 / 3], atol=1e-12)

    def test_uniform_for_equal_logits(self):
        probs = softmax(np.zeros(5))
        np.testing.assert_allclose(probs, 0.2, atol=1e-12)

    def test_shift_invariance(self):
        rng = np.random.default_rng(1)
        z = rng.normal(size=12)
        np.testing.assert_allclose(softmax(z), softmax(z + 123.4), atol=1e-9)


class TestConv2D:
    def test_matches_nested_loop_oracle(self):
        rng = np.random.default_rng(2)
        for pad in (((0, 0), (0, 0)), ((1, 1), (1, 1)), ((0, 1), (0, 0))):
            layer = Conv2D(3, 4, 3, 3, pad=pad, rng=np.random.default_rng(3), dtype=np.float64)
            x = rng.normal(size=(2, 3, 8, 8))
            got = layer.forward(x, training=True)
            want = conv_oracle(x, layer.params["w"], layer.params["b"], pad)
            np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-12)

    def test_wide_kernel_matches_oracle(self):
        rng = np.random.default_rng(4)
        layer = Conv2D(1, 2, 2, 5, rng=np.random.default_rng(5), dtype=np.float64)
        x = rng.normal(size=(1, 1, 2, 16))
        got = layer.forward(x, training=True)
        want = conv_oracle(x, layer.params["w"], layer.params["b"], ((0, 0), (0, 0)))
        np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-12)

    def test_channel_mismatch(self):
        layer = Conv2D(2, 4, 3, 3)
        with pytest.raises(ShapeError):
            layer.forward(np.zeros((1, 3, 8, 8), dtype=np.float32), training=True)


class TestMaxPool:
    def test_forward_values(self):
        x = np.arange(16, dtype=float).reshape(1, 1, 4, 4)
        out = MaxPool(2, 2).forward(x, training=True)
        np.testing.assert_array_equal(out[0, 0], [[5, 7], [13, 15]])

    def test_drops_trailing_remainder(self):
        x = np.arange(15, dtype=float).reshape(1, 1, 3, 5)
        out = MaxPool(2, 2).forward(x, training=True)
        assert out.shape == (1, 1, 1, 2)

    def test_gradient_routes_to_first_max_on_tie(self):
        pool = MaxPool(2, 2)
        x = np.zeros((1, 1, 2, 2))
        pool.forward(x, training=True)
        g = pool.backward(np.ones((1, 1, 1, 1)))
        np.testing.assert_array_equal(g[0, 0], [[1, 0], [0, 0]])


class TestBatchNorm:
    def test_normalizes_batch(self):
        rng = np.random.default_rng(6)
        bn = BatchNorm(3, dtype=np.float64)
        x = rng.normal(loc=5.0, scale=2.0, size=(8, 3, 4, 4))
        out = bn.forward(x, training=True)
        np.testing.assert_allclose(out.mean(axis=(0, 2, 3)), 0.0, atol=1e-9)
        np.testing.assert_allclose(out.std(axis=(0, 2, 3)), 1.0, atol=1e-3)

    def test_running_stats_converge_to_population(self):
        # inference with running averages reproduces training-mode outputs
        rng = np.random.default_rng(7)
        bn = BatchNorm(2, momentum=0.1, dtype=np.float64)
        for _ in range(300):
            bn.forward(rng.normal(loc=1.5, scale=0.7, size=(16, 2, 3, 3)), training=True)
        x = rng.normal(loc=1.5, scale=0.7, size=(256, 2, 3, 3))
        train_out = bn.forward(x, training=True)
        infer_out = bn.forward(x, training=False)
        assert np.abs(train_out - infer_out).max() < 0.15


class TestDense:
    def test_closed_form_softmax_gradient(self):
        # dense -> softmax -> CE: dW must equal (S - onehot) x^T / n
        rng = np.random.default_rng(8)
        dense = Dense(6, 3, rng=np.random.default_rng(9), dtype=np.float64)
        model = Cnn("iq", (1, 1, 6), 3, [Flatten(), dense])
        x = rng.normal(size=(4, 1, 1, 6))
        y = np.array([0, 2, 1, 0])
        model.loss_and_grads(x, y)
        xf = x.reshape(4, 6)
        probs = softmax(xf @ dense.params["w"].T + dense.params["b"])
        delta = probs.copy()
        delta[np.arange(4), y] -= 1
        np.testing.assert_allclose(dense.grads["w"], delta.T @ xf / 4, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(dense.grads["b"], delta.sum(axis=0) / 4, rtol=1e-9, atol=1e-12)


class TestArchitectures:
    def test_spectrogram_shapes(self):
        model = build_model("spectrogram", (1, 256, 63), 10, seed=0)
        z = model.logits(np.zeros((2, 1, 256, 63), dtype=np.float32))
        assert z.shape == (2, 10)

    def test_spectrogram_pooled_three_times(self):
        # 256x63 -> 128x31 -> 64x15 -> 32x7 before the dense layer
        model = build_model("spectrogram", (1, 256, 63), 10, seed=0)
        dense = model.layers[-1]
        assert dense.params["w"].shape == (10, 32 * 32 * 7)

    def test_iq_shapes(self):
        model = build_model("iq", (1, 2, 8192), 10, seed=0)
        z = model.logits(np.zeros((2, 1, 2, 8192), dtype=np.float32))
        assert z.shape == (2, 10)

    def test_iq_kernel_geometry(self):
        model = build_model("iq", (1, 2, 8192), 5, seed=0)
        convs = [l for l in model.layers if isinstance(l, Conv2D)]
        assert [(c.kh, c.kw) for c in convs] == [(1, 128), (2, 128), (2, 128)]
        pools = [l for l in model.layers if isinstance(l, MaxPool)]
        assert [(p.ph, p.pw) for p in pools] == [(1, 4), (1, 4)]

    def test_filter_counts(self):
        for kind, shape in (("spectrogram", (1, 64, 32)), ("iq", (1, 2, 4096))):
            model = build_model(kind, shape, 4, seed=0)
            convs = [l for l in model.layers if isinstance(l, Conv2D)]
            assert [c.out_ch for c in convs] == [8, 16, 32]

    def test_input_shape_checked(self):
        model = build_model("spectrogram", (1, 64, 32), 4, seed=0)
        with pytest.raises(ShapeError):
            model.logits(np.zeros((1, 1, 64, 33), dtype=np.float32))


class TestGradientCheck:
    def test_dense_only_model(self):
        rng = np.random.default_rng(10)
        model = Cnn("iq", (1, 1, 8), 3, [Flatten(), Dense(8, 3, rng=rng, dtype=np.float64)])
        x = rng.normal(size=(4, 1, 1, 8))
        y = np.array([0, 1, 2, 1])
        assert gradient_check(model, x, y) < 1e-7

    def test_spectrogram_micro(self):
        rng = np.random.default_rng(42)
        model = build_model("spectrogram", (1, 16, 16), 3, seed=1)
        x = rng.normal(size=(4, 1, 16, 16))
        y = np.array([0, 1, 2, 0])
        assert model.n_parameters() <= 10_000
        assert gradient_check(model, x, y) < 1e-4

    def test_iq_micro(self):
        rng = np.random.default_rng(42)
        model = build_model("iq", (1, 2, 256), 3, seed=1, kernel_width=4)
        x = rng.normal(size=(4, 1, 2, 256))
        y = np.array([0, 1, 2, 0])
        assert model.n_parameters() <= 10_000
        assert gradient_check(model, x, y) < 1e-4


class TestDeterminism:
    def test_identical_runs(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(8, 1, 16, 16)).astype(np.float32)
        y = np.array([0, 1] * 4)
        losses = []
        for _ in range(2):
            model = build_model("spectrogram", (1, 16, 16), 2, seed=5)
            losses.append(model.loss_and_grads(x, y))
        assert losses[0] == losses[1]
