"""A small CNN built directly on numpy.

Two architectures share the layer kit: a spectrogram model (three 3x3 conv
blocks, each conv -> batchnorm -> relu -> 2x2 maxpool) and an IQ/FFT model
(1xW, 2xW, 2xW convs with 1x4 pooling after the first two blocks). Forward
and backward passes are written out by hand so the analytic gradients can
be audited against finite differences (:func:`gradient_check`).

Data layout is NCHW throughout.
"""

import numpy as np

from .errors import ConfigurationError, ShapeError

__all__ = [
    "Conv2D",
    "BatchNorm",
    "ReLU",
    "MaxPool",
    "Flatten",
    "Dense",
    "Cnn",
    "build_model",
    "softmax",
    "gradient_check",
]


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shift-invariant and overflow-safe."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class Layer:
    """Base layer: trainable ``params``, matching ``grads``, state ``buffers``."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, g: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Conv2D(Layer):
    """2-D convolution (cross-correlation) with explicit zero padding.

    ``pad`` is ((top, bottom), (left, right)). Implemented as im2col plus
    one matmul per batch.
    """

    def __init__(self, in_ch, out_ch, kh, kw, pad=((0, 0), (0, 0)), rng=None, dtype=np.float32):
        super().__init__()
        self.in_ch, self.out_ch, self.kh, self.kw = in_ch, out_ch, kh, kw
        self.pad = pad
        rng = rng or np.random.default_rng(0)
        fan_in = in_ch * kh * kw
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), (out_ch, in_ch, kh, kw))
        self.params = {"w": w.astype(dtype), "b": np.zeros(out_ch, dtype=dtype)}

    def out_shape(self, shape):
        c, h, w = shape
        (pt, pb), (pl, pr) = self.pad
        return (self.out_ch, h + pt + pb - self.kh + 1, w + pl + pr - self.kw + 1)

    def _cols(self, xp):
        n = xp.shape[0]
        view = np.lib.stride_tricks.sliding_window_view(xp, (self.kh, self.kw), axis=(2, 3))
        oh, ow = view.shape[2], view.shape[3]
        cols = view.transpose(0, 2, 3, 1, 4, 5).reshape(n, oh * ow, -1)
        return cols, oh, ow

    def forward(self, x, training):
        if x.shape[1] != self.in_ch:
            raise ShapeError(f"expected {self.in_ch} input channels, got {x.shape[1]}")
        (pt, pb), (pl, pr) = self.pad
        xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
        cols, oh, ow = self._cols(xp)
        wm = self.params["w"].reshape(self.out_ch, -1)
        out = cols @ wm.T + self.params["b"]
        self._cache = (cols, xp.shape, oh, ow)
        return out.transpose(0, 2, 1).reshape(x.shape[0], self.out_ch, oh, ow)

    def backward(self, g):
        cols, xp_shape, oh, ow = self._cache
        n = g.shape[0]
        gmat = g.reshape(n, self.out_ch, oh * ow).transpose(0, 2, 1)  # (n, P, out)
        wm = self.params["w"].reshape(self.out_ch, -1)
        self.grads["w"] = np.tensordot(gmat, cols, axes=([0, 1], [0, 1])).reshape(
            self.params["w"].shape
        )
        self.grads["b"] = g.sum(axis=(0, 2, 3))
        gcols = (gmat @ wm).reshape(n, oh, ow, self.in_ch, self.kh, self.kw)
        dxp = np.zeros(xp_shape, dtype=g.dtype)
        for i in range(self.kh):
            for j in range(self.kw):
                dxp[:, :, i : i + oh, j : j + ow] += gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        (pt, pb), (pl, pr) = self.pad
        h, w = xp_shape[2] - pt - pb, xp_shape[3] - pl - pr
        return dxp[:, :, pt : pt + h, pl : pl + w]


class BatchNorm(Layer):
    """Per-channel batch normalization over (N, H, W)."""

    def __init__(self, channels, momentum=0.1, eps=1e-5, dtype=np.float32):
        super().__init__()
        self.channels, self.momentum, self.eps = channels, momentum, eps
        self.params = {
            "gamma": np.ones(channels, dtype=dtype),
            "beta": np.zeros(channels, dtype=dtype),
        }
        self.buffers = {
            "running_mean": np.zeros(channels, dtype=dtype),
            "running_var": np.ones(channels, dtype=dtype),
        }

    def out_shape(self, shape):
        return shape

    def forward(self, x, training):
        axes = (0, 2, 3)
        if training:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            m = self.momentum
            self.buffers["running_mean"] = (
                (1 - m) * self.buffers["running_mean"] + m * mean
            ).astype(x.dtype)
            self.buffers["running_var"] = (
                (1 - m) * self.buffers["running_var"] + m * var
            ).astype(x.dtype)
        else:
            mean = self.buffers["running_mean"]
            var = self.buffers["running_var"]
        c = mean.reshape(1, -1, 1, 1)
        v = var.reshape(1, -1, 1, 1)
        inv = 1.0 / np.sqrt(v + self.eps)
        xhat = (x - c) * inv
        self._cache = (xhat, inv, training)
        return xhat * self.params["gamma"].reshape(1, -1, 1, 1) + self.params["beta"].reshape(
            1, -1, 1, 1
        )

    def backward(self, g):
        xhat, inv, training = self._cache
        axes = (0, 2, 3)
        self.grads["gamma"] = (g * xhat).sum(axis=axes)
        self.grads["beta"] = g.sum(axis=axes)
        gxhat = g * self.params["gamma"].reshape(1, -1, 1, 1)
        if not training:
            return gxhat * inv
        m = g.shape[0] * g.shape[2] * g.shape[3]
        sum_g = gxhat.sum(axis=axes, keepdims=True)
        sum_gx = (gxhat * xhat).sum(axis=axes, keepdims=True)
        return (inv / m) * (m * gxhat - sum_g - xhat * sum_gx)


class ReLU(Layer):
    def out_shape(self, shape):
        return shape

    def forward(self, x, training):
        self._mask = x > 0
        return x * self._mask

    def backward(self, g):
        return g * self._mask


class MaxPool(Layer):
    """Non-overlapping max pooling; stride equals the pool size.

    Trailing rows/columns not filling a whole cell are dropped. Ties route
    the gradient to the first maximum, keeping backward deterministic.
    """

    def __init__(self, ph, pw):
        super().__init__()
        self.ph, self.pw = ph, pw

    def out_shape(self, shape):
        c, h, w = shape
        return (c, h // self.ph, w // self.pw)

    def forward(self, x, training):
        n, c, h, w = x.shape
        oh, ow = h // self.ph, w // self.pw
        if oh == 0 or ow == 0:
            raise ShapeError(f"pool {self.ph}x{self.pw} larger than input {h}x{w}")
        xc = x[:, :, : oh * self.ph, : ow * self.pw]
        patches = (
            xc.reshape(n, c, oh, self.ph, ow, self.pw)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, oh, ow, self.ph * self.pw)
        )
        self._idx = patches.argmax(axis=-1)
        self._in_shape = x.shape
        return np.take_along_axis(patches, self._idx[..., None], axis=-1)[..., 0]

    def backward(self, g):
        n, c, h, w = self._in_shape
        oh, ow = h // self.ph, w // self.pw
        gp = np.zeros((n, c, oh, ow, self.ph * self.pw), dtype=g.dtype)
        np.put_along_axis(gp, self._idx[..., None], g[..., None], axis=-1)
        gx = np.zeros(self._in_shape, dtype=g.dtype)
        gx[:, :, : oh * self.ph, : ow * self.pw] = (
            gp.reshape(n, c, oh, ow, self.ph, self.pw)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, oh * self.ph, ow * self.pw)
        )
        return gx


class Flatten(Layer):
    def out_shape(self, shape):
        return (int(np.prod(shape)),)

    def forward(self, x, training):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, g):
        return g.reshape(self._shape)


class Dense(Layer):
    def __init__(self, in_features, out_features, rng=None, dtype=np.float32):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        w = rng.normal(0.0, np.sqrt(2.0 / in_features), (out_features, in_features))
        self.params = {"w": w.astype(dtype), "b": np.zeros(out_features, dtype=dtype)}

    def forward(self, x, training):
        self._x = x
        return x @ self.params["w"].T + self.params["b"]

    def backward(self, g):
        self.grads["w"] = g.T @ self._x
        self.grads["b"] = g.sum(axis=0)
        return g @ self.params["w"]


class Cnn:
    """A layer stack ending in K logits, with cross-entropy training hooks."""

    def __init__(self, kind, input_shape, n_classes, layers, kernel_width=None):
        self.kind = kind
        self.input_shape = tuple(input_shape)  # (C, H, W)
        self.n_classes = n_classes
        self.layers = layers
        self.kernel_width = kernel_width
        self.class_ids = list(range(1, n_classes + 1))  # overwritten by train/load

    def logits(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        if x.ndim == 3:
            x = x[None]
        if tuple(x.shape[1:]) != self.input_shape:
            raise ShapeError(f"expected input shape {self.input_shape}, got {tuple(x.shape[1:])}")
        for layer in self.layers:
            x = layer.forward(x, training)
        return x

    def predict_proba(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        return softmax(self.logits(x, training))

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray, training: bool = True) -> float:
        """Mean cross-entropy over the batch; fills every layer's grads."""
        z = self.logits(x, training)
        probs = softmax(z)
        n = z.shape[0]
        loss = float(-np.mean(np.log(probs[np.arange(n), y] + 1e-300)))
        dz = probs.copy()
        dz[np.arange(n), y] -= 1.0
        g = (dz / n).astype(z.dtype)
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return loss

    def parameters(self):
        for li, layer in enumerate(self.layers):
            for name in sorted(layer.params):
                yield li, name, layer.params[name]

    def n_parameters(self) -> int:
        return sum(p.size for _, _, p in self.parameters())

    def astype(self, dtype):
        for layer in self.layers:
            for d in (layer.params, layer.buffers):
                for k in d:
                    d[k] = d[k].astype(dtype)
        return self


def build_model(
    kind: str,
    input_shape: tuple,
    n_classes: int,
    seed: int = 0,
    dtype=np.float32,
    kernel_width: int = 128,
    filters: tuple = (8, 16, 32),
) -> Cnn:
    """Construct one of the two architectures.

    kind='spectrogram': 8/16/32 3x3 same-padded convs, each followed by
    batchnorm, relu and 2x2 max pooling. kind='iq' (also used for FFT
    input): 1xW, 2xW, 2xW valid convs with 1x4 pooling after the first two
    blocks; the third conv zero-pads its height when the row dimension has
    already collapsed to 1. ``kernel_width`` shrinks W for micro test
    instances.
    """
    if n_classes < 2:
        raise ConfigurationError("need at least 2 classes")
    rng = np.random.default_rng(seed)
    c, h, w = input_shape
    layers: list[Layer] = []
    shape = (c, h, w)

    if kind == "spectrogram":
        in_ch = c
        for f in filters:
            conv = Conv2D(in_ch, f, 3, 3, pad=((1, 1), (1, 1)), rng=rng, dtype=dtype)
            layers += [conv, BatchNorm(f, dtype=dtype), ReLU(), MaxPool(2, 2)]
            shape = MaxPool(2, 2).out_shape(conv.out_shape(shape))
            if shape[1] == 0 or shape[2] == 0:
                raise ConfigurationError(f"input {input_shape} too small for three pooled blocks")
            in_ch = f
    elif kind == "iq":
        kw = kernel_width
        heights = (1, 2, 2)
        pools = (True, True, False)
        in_ch = c
        for f, kh, pooled in zip(filters, heights, pools):
            pad_h = max(0, kh - shape[1])  # collapse-resistant height padding
            if shape[2] < kw:
                raise ConfigurationError(
                    f"width {shape[2]} is smaller than the kernel width {kw}"
                )
            conv = Conv2D(in_ch, f, kh, kw, pad=((0, pad_h), (0, 0)), rng=rng, dtype=dtype)
            layers += [conv, BatchNorm(f, dtype=dtype), ReLU()]
            shape = conv.out_shape(shape)
            if pooled:
                layers.append(MaxPool(1, 4))
                shape = MaxPool(1, 4).out_shape(shape)
            in_ch = f
    else:
        raise ConfigurationError(f"unknown model kind {kind!r}")

    layers.append(Flatten())
    flat = int(np.prod(shape))
    layers.append(Dense(flat, n_classes, rng=rng, dtype=dtype))
    return Cnn(kind, input_shape, n_classes, layers, kernel_width=kernel_width)


def gradient_check(model: Cnn, x: np.ndarray, y: np.ndarray, step: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Walks every parameter of the model, so only use on micro instances
    (<= 1e4 parameters). The model is promoted to float64 in place.
    """
    model.astype(np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        x = x[None]
    y = np.atleast_1d(y)
    model.loss_and_grads(x, y, training=True)
    analytic = {
        (li, name): model.layers[li].grads[name].copy() for li, name, _ in model.parameters()
    }
    worst = 0.0
    for li, name, param in model.parameters():
        flat = param.reshape(-1)
        ana = analytic[(li, name)].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            lp = _loss_only(model, x, y)
            flat[i] = orig - step
            lm = _loss_only(model, x, y)
            flat[i] = orig
            numeric = (lp - lm) / (2.0 * step)
            err = abs(ana[i] - numeric) / (max(abs(ana[i]), abs(numeric)) + 1e-6)
            worst = max(worst, err)
    return worst


def _loss_only(model: Cnn, x: np.ndarray, y: np.ndarray) -> float:
    z = model.logits(x, training=True)
    probs = softmax(z)
    return float(-np.mean(np.log(probs[np.arange(z.shape[0]), y] + 1e-300)))
