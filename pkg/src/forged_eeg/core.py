"""Domain types shared by every stage: recordings, labels, epochs, manifests."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import BadLabel, BadRate, EpochTooLong, NonFinite, ShapeMismatch

__all__ = [
    "ClassLabel",
    "Recording",
    "Epoch",
    "ManifestEntry",
    "DatasetManifest",
    "validate_recording",
    "epoch_recording",
    "epoch_length",
]


class ClassLabel(enum.IntEnum):
    """Subject class. The integer value is the network target (HC=0, PD=1)."""

    HC = 0
    PD = 1

    @classmethod
    def parse(cls, value) -> "ClassLabel":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.strip().upper()]
            except KeyError:
                raise BadLabel(f"unknown class label {value!r} (expected HC or PD)") from None
        try:
            return cls(int(value))
        except (ValueError, TypeError):
            raise BadLabel(f"unknown class label {value!r} (expected 0 or 1)") from None

    def other(self) -> "ClassLabel":
        return ClassLabel(1 - int(self))


def _frozen_float32(data) -> np.ndarray:
    arr = np.array(data, dtype=np.float32, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Recording:
    """A labeled multichannel signal, ``data`` shaped (n_channels, n_samples) in microvolts.

    The constructor only coerces ``data`` to a read-only float32 copy; call
    :func:`validate_recording` to check the invariants.
    """

    subject_id: str
    label: ClassLabel
    sample_rate_hz: float
    channel_names: tuple[str, ...]
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "label", ClassLabel.parse(self.label))
        object.__setattr__(self, "channel_names", tuple(str(c) for c in self.channel_names))
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        object.__setattr__(self, "data", _frozen_float32(self.data))

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    def with_data(self, data) -> "Recording":
        return Recording(self.subject_id, self.label, self.sample_rate_hz, self.channel_names, data)


@dataclass(frozen=True, eq=False)
class Epoch:
    """One fixed-duration slice of a recording; ``data`` is a read-only view."""

    subject_id: str
    label: ClassLabel
    epoch_index: int
    data: np.ndarray

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class ManifestEntry:
    subject_id: str
    label: ClassLabel
    path: Path


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    epoch_seconds: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        ids = [e.subject_id for e in self.entries]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate subject ids in manifest: {dup}")
        if self.epoch_seconds <= 0:
            raise ValueError("epoch_seconds must be positive")

    @property
    def subject_ids(self) -> list[str]:
        return [e.subject_id for e in self.entries]

    def labels(self) -> dict[str, ClassLabel]:
        return {e.subject_id: e.label for e in self.entries}


def validate_recording(r: Recording, min_channels: int = 3) -> None:
    """Raise if any :class:`Recording` invariant is violated.

    ``min_channels`` can be lowered for stages (such as ICA) that do not
    need the three-group split.
    """
    data = r.data
    if data.ndim != 2:
        raise ShapeMismatch(f"data must be 2-D (channels, samples), got shape {data.shape}")
    if data.shape[0] != len(r.channel_names):
        raise ShapeMismatch(
            f"{len(r.channel_names)} channel names but {data.shape[0]} data rows"
        )
    if data.shape[0] < min_channels:
        raise ShapeMismatch(f"need at least {min_channels} channels, got {data.shape[0]}")
    if data.shape[1] < 1:
        raise ShapeMismatch("recording has no samples")
    if not (r.sample_rate_hz > 0 and np.isfinite(r.sample_rate_hz)):
        raise BadRate(f"sample rate must be positive, got {r.sample_rate_hz}")
    bad = ~np.isfinite(data)
    if bad.any():
        ch, t = np.argwhere(bad)[0]
        raise NonFinite(ch, t)


def epoch_length(epoch_seconds: float, sample_rate_hz: float) -> int:
    return int(round(epoch_seconds * sample_rate_hz))


def epoch_recording(r: Recording, epoch_seconds: float = 2.0) -> list[Epoch]:
    """Cut ``r`` into consecutive non-overlapping epochs; the tail remainder is dropped."""
    n = epoch_length(epoch_seconds, r.sample_rate_hz)
    if n < 1:
        raise ValueError(f"epoch of {epoch_seconds} s at {r.sample_rate_hz} Hz has no samples")
    count = r.n_samples // n
    if count == 0:
        raise EpochTooLong(
            f"{r.subject_id}: recording has {r.n_samples} samples, one epoch needs {n}"
        )
    return [
        Epoch(r.subject_id, r.label, k, r.data[:, k * n:(k + 1) * n])
        for k in range(count)
    ]


def stack_epochs(epochs: Sequence[Epoch]) -> np.ndarray:
    """(n_epochs, n_channels, n_samples) float32 array."""
    return np.stack([e.data for e in epochs]).astype(np.float32, copy=False)
