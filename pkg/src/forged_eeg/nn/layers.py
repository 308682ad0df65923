"""Hand-written forward and backward passes for the layers the classifier uses.

Arrays are NCHW. Every function is dtype-preserving, so the same code runs
the float32 training path and the float64 gradient-check path.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import BadLabel, ShapeMismatch

KERNEL = 3


def _conv_out(n: int, stride: int) -> int:
    return (n - KERNEL) // stride + 1


def _im2col(x: np.ndarray, stride: int) -> tuple[np.ndarray, int, int]:
    """(N*Ho*Wo, C*9) patch matrix, rows ordered (n, i, j), columns (c, ki, kj)."""
    n, c, h, w = x.shape
    win = sliding_window_view(x, (KERNEL, KERNEL), axis=(2, 3))[:, :, ::stride, ::stride]
    ho, wo = win.shape[2], win.shape[3]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * KERNEL * KERNEL)
    return cols, ho, wo


def _check_conv(x, weights):
    if x.ndim != 4:
        raise ShapeMismatch(f"conv input must be NCHW, got shape {x.shape}")
    if weights.shape[1:] != (x.shape[1], KERNEL, KERNEL):
        raise ShapeMismatch(f"weights {weights.shape} do not fit input with {x.shape[1]} channels")
    if x.shape[2] < KERNEL or x.shape[3] < KERNEL:
        raise ShapeMismatch(f"input {x.shape[2]}x{x.shape[3]} smaller than the kernel")


def conv2d_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray, stride: int = 1) -> np.ndarray:
    """Valid (unpadded) 3x3 cross-correlation."""
    _check_conv(x, weights)
    out_ch = weights.shape[0]
    cols, ho, wo = _im2col(x, stride)
    y = cols @ weights.reshape(out_ch, -1).T
    y += bias
    return np.ascontiguousarray(y.reshape(x.shape[0], ho, wo, out_ch).transpose(0, 3, 1, 2))


def conv2d_backward(x: np.ndarray, weights: np.ndarray, grad_out: np.ndarray, stride: int = 1):
    """Return ``(grad_x, grad_w, grad_b)``."""
    _check_conv(x, weights)
    n, c, h, w = x.shape
    out_ch = weights.shape[0]
    cols, ho, wo = _im2col(x, stride)
    if grad_out.shape != (n, out_ch, ho, wo):
        raise ShapeMismatch(f"grad_out {grad_out.shape} does not match forward output {(n, out_ch, ho, wo)}")
    g = grad_out.transpose(0, 2, 3, 1).reshape(-1, out_ch)
    grad_w = (g.T @ cols).reshape(weights.shape)
    grad_b = grad_out.sum(axis=(0, 2, 3))
    gcols = (g @ weights.reshape(out_ch, -1)).reshape(n, ho, wo, c, KERNEL, KERNEL)
    gcols = gcols.transpose(0, 3, 4, 5, 1, 2)
    grad_x = np.zeros_like(x)
    span_h = stride * (ho - 1) + 1
    span_w = stride * (wo - 1) + 1
    for ki in range(KERNEL):
        for kj in range(KERNEL):
            grad_x[:, :, ki:ki + span_h:stride, kj:kj + span_w:stride] += gcols[:, :, ki, kj]
    return grad_x, grad_w, grad_b


def maxpool_forward(x: np.ndarray):
    """2x2 stride-2 max pool; odd trailing rows/columns are dropped.

    Returns ``(out, argmax)`` where ``argmax`` indexes the window in row-major
    order; ties go to the first maximal element.
    """
    if x.ndim != 4:
        raise ShapeMismatch(f"maxpool input must be NCHW, got shape {x.shape}")
    n, c, h, w = x.shape
    ho, wo = h // 2, w // 2
    if ho == 0 or wo == 0:
        raise ShapeMismatch(f"input {h}x{w} too small to pool")
    win = x[:, :, :2 * ho, :2 * wo].reshape(n, c, ho, 2, wo, 2).transpose(0, 1, 2, 4, 3, 5)
    win = win.reshape(n, c, ho, wo, 4)
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return out, idx


def maxpool_backward(grad_out: np.ndarray, argmax: np.ndarray, input_shape) -> np.ndarray:
    if grad_out.shape != argmax.shape:
        raise ShapeMismatch(f"grad_out {grad_out.shape} does not match pooled shape {argmax.shape}")
    n, c, h, w = input_shape
    ho, wo = grad_out.shape[2:]
    win = np.zeros((n, c, ho, wo, 4), dtype=grad_out.dtype)
    np.put_along_axis(win, argmax[..., None], grad_out[..., None], axis=-1)
    win = win.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, 2 * ho, 2 * wo)
    grad_x = np.zeros(input_shape, dtype=grad_out.dtype)
    grad_x[:, :, :2 * ho, :2 * wo] = win
    return grad_x


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    # derivative at exactly 0 is taken as 0
    return grad_out * (x > 0)


def fc_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """``weights`` is (out, in)."""
    if x.ndim != 2 or x.shape[1] != weights.shape[1]:
        raise ShapeMismatch(f"input {x.shape} does not fit weights {weights.shape}")
    return x @ weights.T + bias


def fc_backward(x: np.ndarray, weights: np.ndarray, grad_out: np.ndarray):
    if grad_out.shape != (x.shape[0], weights.shape[0]):
        raise ShapeMismatch(f"grad_out {grad_out.shape} does not match output {(x.shape[0], weights.shape[0])}")
    return grad_out @ weights, grad_out.T @ x, grad_out.sum(axis=0)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_ce(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of softmax(logits) and its gradient w.r.t. the logits."""
    labels = np.asarray(labels)
    n, k = logits.shape
    if labels.shape != (n,) or np.any((labels < 0) | (labels >= k)) or not np.issubdtype(labels.dtype, np.integer):
        raise BadLabel(f"labels must be {n} integers in [0, {k})")
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(lse - z[rows, labels]))
    grad = np.exp(z - lse[:, None])
    grad[rows, labels] -= 1
    grad /= n
    return loss, grad.astype(logits.dtype, copy=False)


# --------------------------------------------------------------------------
# layer objects
# --------------------------------------------------------------------------

class Layer:
    kind = ""

    def __init__(self):
        self.params: list[np.ndarray] = []
        self.grads: list[np.ndarray] = []
        self._cache = None

    def output_shape(self, shape: tuple[int, ...]) -> tuple[int, ...]:
        return shape

    def forward(self, x, keep=True):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)


class Conv2d(Layer):
    kind = "Conv2d"

    def __init__(self, in_ch: int, out_ch: int, stride: int = 1):
        super().__init__()
        self.in_ch, self.out_ch, self.stride = in_ch, out_ch, stride
        self.params = [np.zeros((out_ch, in_ch, KERNEL, KERNEL), np.float32), np.zeros(out_ch, np.float32)]

    def output_shape(self, shape):
        c, h, w = shape
        if c != self.in_ch:
            raise ShapeMismatch(f"Conv2d expects {self.in_ch} channels, got {c}")
        if h < KERNEL or w < KERNEL:
            raise ShapeMismatch(f"Conv2d input {h}x{w} smaller than the kernel")
        return self.out_ch, _conv_out(h, self.stride), _conv_out(w, self.stride)

    def forward(self, x, keep=True):
        if keep:
            self._cache = x
        return conv2d_forward(x, self.params[0], self.params[1], self.stride)

    def backward(self, grad):
        gx, gw, gb = conv2d_backward(self._cache, self.params[0], grad, self.stride)
        self.grads = [gw, gb]
        return gx


class ReLU(Layer):
    kind = "ReLU"

    def forward(self, x, keep=True):
        if keep:
            self._cache = x
        return relu_forward(x)

    def backward(self, grad):
        return relu_backward(self._cache, grad)


class MaxPool2d(Layer):
    kind = "MaxPool2d"

    def output_shape(self, shape):
        c, h, w = shape
        if h < 2 or w < 2:
            raise ShapeMismatch(f"MaxPool2d input {h}x{w} too small")
        return c, h // 2, w // 2

    def forward(self, x, keep=True):
        out, idx = maxpool_forward(x)
        if keep:
            self._cache = (idx, x.shape)
        return out

    def backward(self, grad):
        idx, shape = self._cache
        return maxpool_backward(grad, idx, shape)


class Flatten(Layer):
    kind = "Flatten"

    def output_shape(self, shape):
        return (int(np.prod(shape)),)

    def forward(self, x, keep=True):
        if keep:
            self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._cache)


class FullyConnected(Layer):
    kind = "FC"

    def __init__(self, in_features: int, out_features: int):
        super().__init__()
        self.in_features, self.out_features = in_features, out_features
        self.params = [np.zeros((out_features, in_features), np.float32), np.zeros(out_features, np.float32)]

    def output_shape(self, shape):
        if shape != (self.in_features,):
            raise ShapeMismatch(f"FC expects ({self.in_features},), got {shape}")
        return (self.out_features,)

    def forward(self, x, keep=True):
        if keep:
            self._cache = x
        return fc_forward(x, self.params[0], self.params[1])

    def backward(self, grad):
        gx, gw, gb = fc_backward(self._cache, self.params[0], grad)
        self.grads = [gw, gb]
        return gx


class Softmax(Layer):
    """Inference-only head; training differentiates :func:`softmax_ce` on the logits."""

    kind = "Softmax"

    def forward(self, x, keep=True):
        return softmax(x)

    def backward(self, grad):
        raise RuntimeError("backpropagate through softmax_ce on the logits instead")
