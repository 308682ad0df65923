"""Forged-channel images: epoch -> three averaged channel groups -> SPWVD planes -> RGB stack."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from .core import ClassLabel, Epoch
from .errors import DegenerateInput, ShapeMismatch, TooFewChannels
from .ingest import read_raw_array, write_raw_array
from .tfr import SpwvdConfig, spwvd

__all__ = [
    "JOINT_MINMAX",
    "PER_PLANE_MINMAX",
    "ForgeConfig",
    "ForgedImage",
    "split_channels",
    "average_group",
    "resize_bilinear",
    "normalize_stack",
    "forge_epoch",
    "forge_signals",
    "export_ppm",
    "read_ppm",
    "write_forged_dataset",
    "read_forged_dataset",
    "ForgedChannelTransformer",
]

JOINT_MINMAX = "joint"
PER_PLANE_MINMAX = "per_plane"


@dataclass(frozen=True)
class ForgeConfig:
    spwvd: SpwvdConfig = field(default_factory=SpwvdConfig)
    out_height: int = 256
    out_width: int = 256
    normalization: str = JOINT_MINMAX

    def __post_init__(self):
        if self.out_height < 2 or self.out_width < 2:
            raise ValueError("output image must be at least 2x2")
        if self.normalization not in (JOINT_MINMAX, PER_PLANE_MINMAX):
            raise ValueError(f"unknown normalization {self.normalization!r}")


@dataclass(frozen=True, eq=False)
class ForgedImage:
    planes: np.ndarray                          # (3, H, W) float32 in [0, 1]
    subject_id: str = ""
    label: ClassLabel = ClassLabel.HC
    epoch_index: int = 0

    @property
    def provenance(self) -> tuple[str, ClassLabel, int]:
        return self.subject_id, self.label, self.epoch_index


def split_channels(n_channels: int) -> list[np.ndarray]:
    """Three contiguous groups as even as possible, earlier groups larger: 32 -> 11, 11, 10."""
    if isinstance(n_channels, Epoch):
        n_channels = n_channels.n_channels
    if n_channels < 3:
        raise TooFewChannels(f"need at least 3 channels to form three groups, got {n_channels}")
    q, r = divmod(n_channels, 3)
    bounds = np.cumsum([0] + [q + (1 if i < r else 0) for i in range(3)])
    return [np.arange(bounds[i], bounds[i + 1]) for i in range(3)]


def average_group(data: np.ndarray, group: Sequence[int]) -> np.ndarray:
    """Per-sample mean over the group's channels, in float64."""
    group = np.asarray(group, dtype=int)
    if group.size == 0:
        raise ValueError("channel group is empty")
    data = data.data if isinstance(data, Epoch) else data
    return np.asarray(data, dtype=np.float64)[group].mean(axis=0)


def resize_bilinear(m: np.ndarray, height: int, width: int) -> np.ndarray:
    """Corner-aligned bilinear resize: output (i, j) samples the source at
    ``(i * (H0-1)/(H-1), j * (W0-1)/(W-1))``.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 2 or m.shape[1] < 2:
        raise DegenerateInput(f"source must be at least 2x2, got shape {m.shape}")
    if height < 2 or width < 2:
        raise DegenerateInput(f"target must be at least 2x2, got {height}x{width}")

    def axis(n_src, n_dst):
        pos = np.arange(n_dst) * (n_src - 1) / (n_dst - 1)
        i0 = np.minimum(np.floor(pos).astype(int), n_src - 2)
        return i0, pos - i0

    r0, wr = axis(m.shape[0], height)
    c0, wc = axis(m.shape[1], width)
    # (1-w)*a + w*b is exact at w in {0, 1}
    rows = (1 - wr)[:, None] * m[r0] + wr[:, None] * m[r0 + 1]
    out = (1 - wc)[None, :] * rows[:, c0] + wc[None, :] * rows[:, c0 + 1]
    return np.clip(out, m.min(), m.max())


def normalize_stack(p1, p2, p3, mode: str = JOINT_MINMAX) -> np.ndarray:
    """Min-max scale three planes into a (3, H, W) float32 stack.

    A zero value range maps to all zeros.
    """
    planes = [np.asarray(p, dtype=np.float64) for p in (p1, p2, p3)]
    if not planes[0].shape == planes[1].shape == planes[2].shape:
        raise ShapeMismatch(f"plane shapes differ: {[p.shape for p in planes]}")
    stack = np.stack(planes)
    if mode == JOINT_MINMAX:
        lo, hi = stack.min(), stack.max()
        out = (stack - lo) / (hi - lo) if hi > lo else np.zeros_like(stack)
    elif mode == PER_PLANE_MINMAX:
        out = np.zeros_like(stack)
        for i, p in enumerate(stack):
            lo, hi = p.min(), p.max()
            if hi > lo:
                out[i] = (p - lo) / (hi - lo)
    else:
        raise ValueError(f"unknown normalization {mode!r}")
    return out.astype(np.float32)


def _forge_planes(data: np.ndarray, cfg: ForgeConfig, sample_rate_hz: float) -> np.ndarray:
    planes = []
    for group in split_channels(data.shape[0]):
        tfr = spwvd(average_group(data, group), cfg.spwvd, sample_rate_hz)
        planes.append(resize_bilinear(tfr.values, cfg.out_height, cfg.out_width))
    return normalize_stack(*planes, mode=cfg.normalization)


def forge_epoch(e: Epoch, cfg: ForgeConfig = ForgeConfig(), sample_rate_hz: float = 512.0) -> ForgedImage:
    """Plane order follows group order; row 0 of every plane is 0 Hz."""
    return ForgedImage(_forge_planes(e.data, cfg, sample_rate_hz), e.subject_id, e.label, e.epoch_index)


def forge_signals(X: np.ndarray, cfg: ForgeConfig = ForgeConfig(), sample_rate_hz: float = 512.0) -> np.ndarray:
    """Forge a batch (n, n_channels, n_samples) into (n, 3, H, W)."""
    X = np.asarray(X)
    out = np.empty((X.shape[0], 3, cfg.out_height, cfg.out_width), dtype=np.float32)
    for i, sig in enumerate(X):
        out[i] = _forge_planes(sig, cfg, sample_rate_hz)
    return out


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------

def export_ppm(img, path) -> None:
    """Binary P6, maxval 255; plane 0 -> red, 1 -> green, 2 -> blue."""
    planes = img.planes if isinstance(img, ForgedImage) else np.asarray(img)
    if planes.ndim != 3 or planes.shape[0] != 3:
        raise ShapeMismatch(f"expected (3, H, W) planes, got {planes.shape}")
    _, h, w = planes.shape
    pixels = np.rint(np.clip(planes, 0.0, 1.0) * 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(pixels.transpose(1, 2, 0)).tobytes())


def read_ppm(path) -> np.ndarray:
    """Read a binary P6 file written by :func:`export_ppm` as (3, H, W) floats in [0, 1]."""
    buf = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(buf):
            raise ValueError(f"{path}: truncated PPM header")
        while buf[pos:pos + 1].isspace():
            pos += 1
        if buf[pos:pos + 1] == b"#":
            pos = buf.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        tokens.append(buf[start:pos].decode("ascii"))
    pos += 1
    if tokens[0] != "P6":
        raise ValueError(f"{path}: not a binary PPM (magic {tokens[0]!r})")
    w, h, maxval = (int(t) for t in tokens[1:])
    pixels = np.frombuffer(buf, dtype=np.uint8, count=w * h * 3, offset=pos)
    return pixels.reshape(h, w, 3).transpose(2, 0, 1).astype(np.float32) / maxval


INDEX_NAME = "index.tsv"
_INDEX_HEADER = "file\tsubject_id\tlabel\tepoch_index\theight\twidth"


def write_forged_dataset(images: Iterable[ForgedImage], out_dir, sample_rate_hz: float = 512.0,
                         seed: int | None = None) -> Path:
    """One raw tensor file per image (3 channels x H*W samples, row-major) plus ``index.tsv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    if seed is not None:
        lines.append(f"# seed={seed}")
    lines.append(_INDEX_HEADER)
    for img in images:
        _, h, w = img.planes.shape
        name = f"{img.subject_id}_e{img.epoch_index:04d}.frg"
        write_raw_array(out_dir / name, img.planes.reshape(3, h * w), sample_rate_hz)
        lines.append(f"{name}\t{img.subject_id}\t{img.label.name}\t{img.epoch_index}\t{h}\t{w}")
    index = out_dir / INDEX_NAME
    index.write_text("\n".join(lines) + "\n")
    return index


def read_forged_dataset(out_dir) -> list[ForgedImage]:
    out_dir = Path(out_dir)
    images = []
    for line in (out_dir / INDEX_NAME).read_text().splitlines():
        if not line.strip() or line.startswith("#") or line == _INDEX_HEADER:
            continue
        name, sid, label, idx, h, w = line.split("\t")
        data, _ = read_raw_array(out_dir / name)
        h, w = int(h), int(w)
        images.append(ForgedImage(data.reshape(3, h, w), sid, ClassLabel.parse(label), int(idx)))
    return images


# --------------------------------------------------------------------------
# estimator wrapper
# --------------------------------------------------------------------------

class ForgedChannelTransformer(TransformerMixin, BaseEstimator):
    """Turn epochs (n_epochs, n_channels, n_samples) into forged images (n_epochs, 3, H, W).

    Stateless: ``fit`` only validates parameters.
    """

    def __init__(self, sample_rate_hz=512.0, n_freq_bins=2048, time_window=("hamming", 31),
                 lag_window=("hamming", 255), out_height=256, out_width=256,
                 normalization=JOINT_MINMAX):
        self.sample_rate_hz = sample_rate_hz
        self.n_freq_bins = n_freq_bins
        self.time_window = time_window
        self.lag_window = lag_window
        self.out_height = out_height
        self.out_width = out_width
        self.normalization = normalization

    def _config(self) -> ForgeConfig:
        return ForgeConfig(
            SpwvdConfig(self.n_freq_bins, tuple(self.time_window), tuple(self.lag_window)),
            self.out_height, self.out_width, self.normalization,
        )

    def fit(self, X=None, y=None):
        self.config_ = self._config()
        return self

    def transform(self, X):
        X = check_array(X, allow_nd=True, dtype=np.float64)
        if X.ndim != 3:
            raise ValueError(f"expected (n_epochs, n_channels, n_samples), got shape {X.shape}")
        cfg = getattr(self, "config_", None) or self._config()
        return forge_signals(X, cfg, self.sample_rate_hz)
