"""The classifier network and its checkpoint file.

Checkpoint layout (little-endian)::

    8 bytes   magic b"FRGCNN01"
    3 x u32   input channels, height, width
    u32       number of layers L
    L x 13 B  layer table: u8 kind, u32 a, u32 b, u32 stride
              kind 1 Conv2d (a=in_ch, b=out_ch), 2 ReLU, 3 MaxPool2d,
              4 Flatten, 5 FC (a=in, b=out), 6 Softmax; unused fields are 0
    ...       parameters of each Conv2d/FC layer in table order, weights then
              bias, float32 C-order (conv weights (out, in, 3, 3), FC (out, in))
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import BadMagic, ShapeMismatch, TruncatedFile
from .layers import Conv2d, Flatten, FullyConnected, Layer, MaxPool2d, ReLU, Softmax, softmax

CHECKPOINT_MAGIC = b"FRGCNN01"
_KIND_CODES = {"Conv2d": 1, "ReLU": 2, "MaxPool2d": 3, "Flatten": 4, "FC": 5, "Softmax": 6}
_LAYER_ROW = struct.Struct("<BIII")

DEFAULT_INPUT_SHAPE = (3, 256, 256)


class CnnModel:
    """An ordered layer chain validated against a fixed input shape."""

    def __init__(self, layers: Sequence[Layer], input_shape=DEFAULT_INPUT_SHAPE):
        self.layers = list(layers)
        self.input_shape = tuple(int(v) for v in input_shape)
        self.shapes = self._shape_chain()

    def _shape_chain(self) -> list[tuple[int, ...]]:
        shapes = []
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.output_shape(shape)
            shapes.append(shape)
        return shapes

    @property
    def parametric_layers(self) -> list[Layer]:
        return [layer for layer in self.layers if layer.params]

    @property
    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params]

    @property
    def grads(self) -> list[np.ndarray]:
        return [g for layer in self.layers for g in layer.grads]

    @property
    def decay_mask(self) -> list[bool]:
        """True for weight tensors (L2-regularized), False for biases."""
        return [i == 0 for layer in self.layers for i in range(len(layer.params))]

    def param_count(self) -> int:
        return sum(layer.n_params for layer in self.layers)

    def layer_param_counts(self) -> list[int]:
        return [layer.n_params for layer in self.parametric_layers]

    @property
    def dtype(self):
        return self.params[0].dtype

    def astype(self, dtype) -> "CnnModel":
        """Copy with every parameter cast to ``dtype`` (float64 for gradient checks)."""
        clone = _rebuild(self.layer_table(), self.input_shape)
        for layer, src_layer in zip(clone.layers, self.layers):
            layer.params = [p.astype(dtype) for p in src_layer.params]
        return clone

    def copy(self) -> "CnnModel":
        return self.astype(self.dtype)

    def logits(self, x: np.ndarray, keep: bool = False) -> np.ndarray:
        """Run every layer but the final Softmax."""
        if tuple(x.shape[1:]) != self.input_shape:
            raise ShapeMismatch(f"model expects inputs {self.input_shape}, got {tuple(x.shape[1:])}")
        h = x.astype(self.dtype, copy=False)
        for layer in self.layers:
            if isinstance(layer, Softmax):
                break
            h = layer.forward(h, keep)
        return h

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Class probabilities."""
        return softmax(self.logits(x))

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        """Backpropagate from the logits; fills each layer's ``grads``."""
        g = grad_logits
        for layer in reversed(self.layers):
            if isinstance(layer, Softmax):
                continue
            g = layer.backward(g)
        return g

    def layer_table(self) -> list[tuple[str, int, int, int]]:
        rows = []
        for layer in self.layers:
            if isinstance(layer, Conv2d):
                rows.append((layer.kind, layer.in_ch, layer.out_ch, layer.stride))
            elif isinstance(layer, FullyConnected):
                rows.append((layer.kind, layer.in_features, layer.out_features, 0))
            else:
                rows.append((layer.kind, 0, 0, 0))
        return rows

    def summary(self) -> str:
        lines = [f"{'Layer # - Type':<18}{'Output Shape':<24}{'Param #':>10}"]
        for i, (layer, shape) in enumerate(zip(self.layers, self.shapes), 1):
            dims = ", ".join(str(d) for d in (-1,) + shape)
            lines.append(f"{f'{i}-{layer.kind}':<18}{f'[{dims}]':<24}{layer.n_params:>10,}")
        lines.append(f"Total Trainable Parameter {self.param_count():,}")
        return "\n".join(lines)


def _make_layer(kind: str, a: int, b: int, stride: int) -> Layer:
    if kind == "Conv2d":
        return Conv2d(a, b, stride)
    if kind == "FC":
        return FullyConnected(a, b)
    return {"ReLU": ReLU, "MaxPool2d": MaxPool2d, "Flatten": Flatten, "Softmax": Softmax}[kind]()


def _rebuild(table, input_shape) -> CnnModel:
    return CnnModel([_make_layer(*row) for row in table], input_shape)


def build_paper_cnn(seed: int = 0, input_shape=DEFAULT_INPUT_SHAPE) -> CnnModel:
    """The 17-layer classifier; 1,115,524 parameters at 3x256x256 input.

    Convolutions 1-2 use stride 1 and 3-4 stride 2. The first FC layer's
    input width follows from ``input_shape`` (21600 at 256x256). Weights are
    He-normal, biases zero.
    """
    c, h, w = input_shape
    convs = [Conv2d(c, 8, 1), Conv2d(8, 16, 1), Conv2d(16, 32, 2), Conv2d(32, 96, 2)]
    layers: list[Layer] = [
        convs[0], ReLU(), MaxPool2d(),
        convs[1], ReLU(),
        convs[2], ReLU(), MaxPool2d(),
        convs[3], ReLU(),
        Flatten(),
    ]
    flat = CnnModel(layers, input_shape).shapes[-1][0]
    layers += [FullyConnected(flat, 50), ReLU(), FullyConnected(50, 32), ReLU(), FullyConnected(32, 2), Softmax()]
    model = CnnModel(layers, input_shape)

    rng = np.random.default_rng(seed)
    for layer in model.parametric_layers:
        weights = layer.params[0]
        fan_in = int(np.prod(weights.shape[1:]))
        weights[...] = rng.standard_normal(weights.shape) * np.sqrt(2.0 / fan_in)
        layer.params[1][...] = 0
    return model


def save_checkpoint(model: CnnModel, path) -> None:
    table = model.layer_table()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<III", *model.input_shape))
        fh.write(struct.pack("<I", len(table)))
        for kind, a, b, stride in table:
            fh.write(_LAYER_ROW.pack(_KIND_CODES[kind], a, b, stride))
        for p in model.params:
            fh.write(np.ascontiguousarray(p, dtype="<f4").tobytes())


def load_checkpoint(path) -> CnnModel:
    path = Path(path)
    buf = path.read_bytes()
    if buf[:8] != CHECKPOINT_MAGIC:
        raise BadMagic(f"{path}: bad checkpoint magic {buf[:8]!r}")
    codes = {v: k for k, v in _KIND_CODES.items()}
    input_shape = struct.unpack_from("<III", buf, 8)
    (n_layers,) = struct.unpack_from("<I", buf, 20)
    pos = 24
    table = []
    for _ in range(n_layers):
        code, a, b, stride = _LAYER_ROW.unpack_from(buf, pos)
        table.append((codes[code], a, b, stride))
        pos += _LAYER_ROW.size
    model = _rebuild(table, input_shape)
    expected = pos + 4 * model.param_count()
    if len(buf) < expected:
        raise TruncatedFile(path, expected, len(buf))
    for p in model.params:
        p[...] = np.frombuffer(buf, dtype="<f4", count=p.size, offset=pos).reshape(p.shape)
        pos += 4 * p.size
    return model
