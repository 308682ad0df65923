"""Run configuration and the manifest file format.

Config files are line-oriented ``section.key = value`` pairs; ``#`` starts a
comment. Example::

    forge.out_height = 64
    forge.n_freq_bins = 512
    train.epochs = 10
    losocv.base_seed = 7

Manifest files list one subject per line as whitespace-separated
``subject_id label path`` (label ``HC`` or ``PD``; relative paths resolve
against the manifest's directory). A line ``@epoch_seconds <value>`` sets
the epoch duration; ``#`` lines are comments.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .core import ClassLabel, DatasetManifest, ManifestEntry, Recording
from .forge import ForgeConfig
from .ingest import read_bdf, read_raw
from .nn.train import TrainConfig
from .preprocess import ExplicitList, KeepAll, KurtosisThreshold
from .tfr import SpwvdConfig

__all__ = [
    "AppConfig",
    "load_config",
    "apply_overrides",
    "read_manifest",
    "write_manifest",
    "load_entry",
    "parse_policy",
]


@dataclass
class PathsSection:
    data_dir: str = "."
    out_dir: str = "out"


@dataclass
class PreprocessSection:
    bandpass: bool = True
    low_hz: float = 0.5
    high_hz: float = 50.0
    ica: bool = False
    policy: str = "keep_all"


@dataclass
class ForgeSection:
    epoch_seconds: float = 0.0          # 0 means: take it from the manifest
    n_freq_bins: int = 2048
    time_window: str = "hamming"
    time_window_len: int = 31
    lag_window: str = "hamming"
    lag_window_len: int = 255
    out_height: int = 256
    out_width: int = 256
    normalization: str = "joint"

    def to_forge_config(self) -> ForgeConfig:
        spw = SpwvdConfig(self.n_freq_bins, (self.time_window, self.time_window_len),
                          (self.lag_window, self.lag_window_len))
        return ForgeConfig(spw, self.out_height, self.out_width, self.normalization)


@dataclass
class TrainSection:
    lr: float = 1e-4
    epochs: int = 30
    batch_size: int = 150
    l2_coeff: float = 0.01

    def to_train_config(self, seed: int = 0) -> TrainConfig:
        return TrainConfig(self.lr, self.epochs, self.batch_size, self.l2_coeff, seed)


@dataclass
class LosocvSection:
    base_seed: int = 0
    n_jobs: int = 1


@dataclass
class SynthSection:
    n_per_class: int = 8
    duration_s: float = 60.0
    n_channels: int = 32
    sample_rate_hz: float = 512.0
    amplitude: float = 10.0
    bandwidth_hz: float = 1.0
    noise_sigma: float = 10.0


@dataclass
class AppConfig:
    """Every run setting; ``losocv.base_seed`` is the single source of randomness."""

    paths: PathsSection = field(default_factory=PathsSection)
    synth: SynthSection = field(default_factory=SynthSection)
    preprocess: PreprocessSection = field(default_factory=PreprocessSection)
    forge: ForgeSection = field(default_factory=ForgeSection)
    train: TrainSection = field(default_factory=TrainSection)
    losocv: LosocvSection = field(default_factory=LosocvSection)
    threads: int = 0


def _coerce(current: Any, raw: str, key: str):
    if isinstance(current, bool):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    return raw.strip()


def apply_overrides(cfg: AppConfig, pairs: dict[str, str]) -> AppConfig:
    """Set dotted keys (``forge.out_height``) from string values, type-checked against the defaults."""
    for key, raw in pairs.items():
        parts = key.strip().split(".")
        target = cfg
        for part in parts[:-1]:
            if not hasattr(target, part) or not dataclasses.is_dataclass(getattr(target, part)):
                raise KeyError(f"unknown config section in {key!r}")
            target = getattr(target, part)
        name = parts[-1]
        if not hasattr(target, name) or dataclasses.is_dataclass(getattr(target, name)):
            raise KeyError(f"unknown config key {key!r}")
        setattr(target, name, _coerce(getattr(target, name), str(raw), key))
    return cfg


def parse_config_text(text: str) -> dict[str, str]:
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        pairs[key.strip()] = value.strip()
    return pairs


def load_config(path) -> AppConfig:
    return apply_overrides(AppConfig(), parse_config_text(Path(path).read_text()))


def dump_config(cfg: AppConfig) -> str:
    lines = []
    for section in dataclasses.fields(cfg):
        value = getattr(cfg, section.name)
        if dataclasses.is_dataclass(value):
            for f in dataclasses.fields(value):
                lines.append(f"{section.name}.{f.name} = {getattr(value, f.name)}")
        else:
            lines.append(f"{section.name} = {value}")
    return "\n".join(lines) + "\n"


def parse_policy(spec: str):
    """``keep_all`` | ``kurtosis:<threshold>`` | ``list:<i>,<j>,...``"""
    spec = spec.strip().lower()
    if spec in ("keep_all", "keepall", "none"):
        return KeepAll()
    kind, _, arg = spec.partition(":")
    if kind == "kurtosis":
        return KurtosisThreshold(float(arg))
    if kind == "list":
        return ExplicitList(tuple(int(v) for v in arg.split(",") if v.strip()))
    raise ValueError(f"unknown rejection policy {spec!r}")


# --------------------------------------------------------------------------
# manifests
# --------------------------------------------------------------------------

def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    base = path.parent
    entries = []
    epoch_seconds = 2.0
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("@"):
            key, _, value = line[1:].partition(" ")
            if key != "epoch_seconds":
                raise ValueError(f"{path}:{lineno}: unknown directive @{key}")
            epoch_seconds = float(value)
            continue
        fields = line.split()
        if len(fields) != 3:
            raise ValueError(f"{path}:{lineno}: expected 'subject_id label path', got {line!r}")
        sid, label, rel = fields
        p = Path(rel)
        entries.append(ManifestEntry(sid, ClassLabel.parse(label), p if p.is_absolute() else base / p))
    return DatasetManifest(entries, epoch_seconds)


def write_manifest(m: DatasetManifest, path, seed: int | None = None) -> None:
    path = Path(path)
    lines = []
    if seed is not None:
        lines.append(f"# seed={seed}")
    lines.append(f"@epoch_seconds {m.epoch_seconds!r}")
    for e in m.entries:
        p = Path(e.path)
        try:
            p = p.relative_to(path.parent)
        except ValueError:
            pass
        lines.append(f"{e.subject_id} {e.label.name} {p.as_posix()}")
    path.write_text("\n".join(lines) + "\n")


def load_entry(entry: ManifestEntry) -> Recording:
    """Read a manifest entry by extension: ``.bdf`` or the raw tensor format."""
    path = Path(entry.path)
    if path.suffix.lower() == ".bdf":
        return read_bdf(path, entry.subject_id, entry.label)
    return read_raw(path, entry.subject_id, entry.label)
