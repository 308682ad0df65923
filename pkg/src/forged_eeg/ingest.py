"""Getting recordings into the pipeline.

Three sources are supported:

* the raw tensor format (``FRGTENS1``), a lossless little-endian dump of a
  float32 channel-major matrix;
* single-rate BioSemi BDF files (24-bit);
* a seeded synthetic EEG generator used for desk-scale experiments.

Raw tensor layout (all little-endian)::

    offset  size  field
    0       8     magic b"FRGTENS1"
    8       4     n_channels  (uint32)
    12      8     n_samples   (uint64)
    20      8     sample_rate_hz (float64)
    28      4*C*N payload, float32, channel-major
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import ClassLabel, Recording, validate_recording
from .errors import BadMagic, BadSpec, MixedRates, RangeOverflow, TruncatedFile

__all__ = [
    "RAW_MAGIC",
    "RAW_HEADER_SIZE",
    "write_raw",
    "read_raw",
    "write_raw_array",
    "read_raw_array",
    "BdfHeader",
    "read_bdf",
    "read_bdf_header",
    "write_bdf",
    "Peak",
    "SynthSpec",
    "synth_recording",
    "default_channel_names",
    "CLASS_PEAK_HZ",
    "synthetic_cohort",
]

RAW_MAGIC = b"FRGTENS1"
_RAW_HEAD = struct.Struct("<8sIQd")
RAW_HEADER_SIZE = _RAW_HEAD.size  # 28


def default_channel_names(n: int) -> tuple[str, ...]:
    return tuple(f"ch{i:02d}" for i in range(n))


# --------------------------------------------------------------------------
# raw tensor format
# --------------------------------------------------------------------------

def write_raw_array(path, data: np.ndarray, sample_rate_hz: float) -> None:
    data = np.asarray(data, dtype="<f4")
    if data.ndim != 2:
        raise ValueError(f"raw tensor payload must be 2-D, got shape {data.shape}")
    c, n = data.shape
    with open(path, "wb") as fh:
        fh.write(_RAW_HEAD.pack(RAW_MAGIC, c, n, float(sample_rate_hz)))
        fh.write(np.ascontiguousarray(data).tobytes())


def read_raw_array(path) -> tuple[np.ndarray, float]:
    """Return ``(data, sample_rate_hz)`` from a raw tensor file."""
    path = Path(path)
    buf = path.read_bytes()
    if len(buf) < RAW_HEADER_SIZE:
        if buf[:8] != RAW_MAGIC[:len(buf[:8])]:
            raise BadMagic(f"{path}: not a raw tensor file")
        raise TruncatedFile(path, RAW_HEADER_SIZE, len(buf))
    magic, c, n, fs = _RAW_HEAD.unpack_from(buf)
    if magic != RAW_MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}, expected {RAW_MAGIC!r}")
    expected = RAW_HEADER_SIZE + 4 * c * n
    if len(buf) < expected:
        raise TruncatedFile(path, expected, len(buf))
    data = np.frombuffer(buf, dtype="<f4", count=c * n, offset=RAW_HEADER_SIZE)
    return data.reshape(c, n).astype(np.float32), fs


def write_raw(r: Recording, path) -> None:
    validate_recording(r)
    write_raw_array(path, r.data, r.sample_rate_hz)


def read_raw(path, subject_id: str | None = None, label=ClassLabel.HC,
             channel_names: Sequence[str] | None = None) -> Recording:
    """Read a raw tensor file as a :class:`Recording`.

    The format carries no subject metadata; ``subject_id`` defaults to the
    file stem and ``label`` must come from the manifest.
    """
    data, fs = read_raw_array(path)
    names = tuple(channel_names) if channel_names is not None else default_channel_names(data.shape[0])
    sid = Path(path).stem if subject_id is None else subject_id
    return Recording(sid, label, fs, names, data)


# --------------------------------------------------------------------------
# BDF
# --------------------------------------------------------------------------

_DIG_MIN = -(1 << 23)
_DIG_MAX = (1 << 23) - 1


@dataclass
class BdfHeader:
    n_records: int
    record_duration_s: float
    labels: list[str]
    physical_min: np.ndarray
    physical_max: np.ndarray
    digital_min: np.ndarray
    digital_max: np.ndarray
    samples_per_record: np.ndarray
    header_bytes: int

    @property
    def n_channels(self) -> int:
        return len(self.labels)


def _ascii(buf: bytes) -> str:
    return buf.decode("ascii", errors="replace").strip()


def read_bdf_header(path) -> BdfHeader:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(256)
        if len(head) < 256:
            raise TruncatedFile(path, 256, len(head))
        if head[0] != 0xFF or head[1:8] != b"BIOSEMI":
            raise BadMagic(f"{path}: not a BioSemi BDF file (first bytes {head[:8]!r})")
        header_bytes = int(_ascii(head[184:192]))
        n_records = int(_ascii(head[236:244]))
        duration = float(_ascii(head[244:252]))
        ns = int(_ascii(head[252:256]))
        if ns < 1:
            raise ValueError(f"{path}: header declares {ns} signals")
        ext = fh.read(256 * ns)
        if len(ext) < 256 * ns:
            raise TruncatedFile(path, 256 + 256 * ns, 256 + len(ext))

    def column(offset, width):
        start = offset * ns
        return [_ascii(ext[start + i * width:start + (i + 1) * width]) for i in range(ns)]

    labels = column(0, 16)
    # field widths: label 16, transducer 80, dimension 8, pmin 8, pmax 8,
    # dmin 8, dmax 8, prefilter 80, samples/record 8, reserved 32
    base = 16 + 80 + 8
    pmin = np.array([float(v) for v in column(base, 8)])
    pmax = np.array([float(v) for v in column(base + 8, 8)])
    dmin = np.array([int(v) for v in column(base + 16, 8)])
    dmax = np.array([int(v) for v in column(base + 24, 8)])
    spr = np.array([int(v) for v in column(base + 32 + 80, 8)])
    if np.any(dmax == dmin):
        raise ValueError(f"{path}: zero digital range")
    return BdfHeader(n_records, duration, labels, pmin, pmax, dmin, dmax, spr, header_bytes)


def read_bdf(path, subject_id: str | None = None, label=ClassLabel.HC) -> Recording:
    """Parse a single-rate 24-bit BDF file into a :class:`Recording` in physical units.

    Channels labelled ``Status`` are dropped with a warning.
    """
    path = Path(path)
    hdr = read_bdf_header(path)
    if np.ptp(hdr.samples_per_record) != 0:
        raise MixedRates(f"{path}: channels have unequal samples per record {hdr.samples_per_record.tolist()}")
    spr = int(hdr.samples_per_record[0])
    ns = hdr.n_channels
    record_bytes = 3 * spr * ns
    size = path.stat().st_size
    n_records = hdr.n_records
    if n_records < 0:
        n_records = (size - hdr.header_bytes) // record_bytes
    expected = hdr.header_bytes + n_records * record_bytes
    if size < expected:
        raise TruncatedFile(path, expected, size)

    with open(path, "rb") as fh:
        fh.seek(hdr.header_bytes)
        raw = np.frombuffer(fh.read(n_records * record_bytes), dtype=np.uint8)
    # 3-byte little-endian two's complement -> int32
    trip = raw.reshape(-1, 3).astype(np.int32)
    digital = trip[:, 0] | (trip[:, 1] << 8) | (trip[:, 2] << 16)
    digital = np.where(digital >= 1 << 23, digital - (1 << 24), digital)
    digital = digital.reshape(n_records, ns, spr).transpose(1, 0, 2).reshape(ns, n_records * spr)

    gain = (hdr.physical_max - hdr.physical_min) / (hdr.digital_max - hdr.digital_min)
    data = (digital - hdr.digital_min[:, None]) * gain[:, None] + hdr.physical_min[:, None]

    keep = [i for i, name in enumerate(hdr.labels) if name.lower() != "status"]
    if len(keep) != ns:
        warnings.warn(f"{path}: dropping Status channel", stacklevel=2)
    fs = spr / hdr.record_duration_s
    sid = path.stem if subject_id is None else subject_id
    return Recording(sid, label, fs, [hdr.labels[i] for i in keep], data[keep])


def _fmt(value, width: int = 8) -> bytes:
    s = str(value)
    if len(s) > width:
        raise ValueError(f"header field {s!r} wider than {width} characters")
    return s.ljust(width).encode("ascii")


def _num_field(value: float) -> str:
    for precision in range(8, 0, -1):
        s = f"{value:.{precision}g}"
        if len(s) <= 8:
            return s
    raise RangeOverflow(f"physical bound {value} does not fit an 8-character BDF field")


def _header_number(value: float, upward: bool) -> float:
    """Round ``value`` away from zero to a number printable in 8 header characters."""
    for decimals in range(6, -1, -1):
        scale = 10 ** decimals
        v = math.ceil(value * scale) / scale if upward else math.floor(value * scale) / scale
        s = f"{v:.{decimals}f}"
        if len(s) <= 8:
            return float(s)
    raise RangeOverflow(f"physical bound {value} does not fit an 8-character BDF field")


def write_bdf(r: Recording, path, physical_min=None, physical_max=None,
              record_duration_s: float = 1.0) -> None:
    """Write ``r`` as a single-rate 24-bit BDF file.

    Without explicit bounds each channel gets a symmetric physical range 5%
    wider than its peak magnitude (``±1`` for an all-zero channel). The
    number of samples must be a whole number of records.
    """
    validate_recording(r)
    data = r.data.astype(np.float64)
    ns, n = data.shape
    spr_f = r.sample_rate_hz * record_duration_s
    spr = int(round(spr_f))
    if abs(spr - spr_f) > 1e-9 or n % spr:
        raise ValueError(f"{n} samples at {r.sample_rate_hz} Hz do not fill whole {record_duration_s} s records")
    n_records = n // spr

    if physical_min is None or physical_max is None:
        peak = np.abs(data).max(axis=1) * 1.05
        peak[peak == 0] = 1.0
        pmax = np.array([_header_number(p, True) for p in peak])
        pmin = -pmax
    else:
        pmin = np.broadcast_to(np.asarray(physical_min, dtype=float), (ns,))
        pmax = np.broadcast_to(np.asarray(physical_max, dtype=float), (ns,))
    # encode against the bounds exactly as the header will store them
    pmin_s = [_num_field(v) for v in pmin]
    pmax_s = [_num_field(v) for v in pmax]
    pmin = np.array([float(v) for v in pmin_s])
    pmax = np.array([float(v) for v in pmax_s])
    if np.any(pmax <= pmin):
        raise ValueError("physical_max must exceed physical_min")
    lo = data.min(axis=1)
    hi = data.max(axis=1)
    bad = np.flatnonzero((lo < pmin) | (hi > pmax))
    if bad.size:
        c = int(bad[0])
        raise RangeOverflow(
            f"channel {c} spans [{lo[c]}, {hi[c]}] outside physical range [{pmin[c]}, {pmax[c]}]"
        )

    scale = (_DIG_MAX - _DIG_MIN) / (pmax - pmin)
    digital = np.rint((data - pmin[:, None]) * scale[:, None] + _DIG_MIN).astype(np.int64)
    np.clip(digital, _DIG_MIN, _DIG_MAX, out=digital)
    u = (digital & 0xFFFFFF).astype(np.uint32)
    # records: record-major, then channel, then sample
    u = u.reshape(ns, n_records, spr).transpose(1, 0, 2).reshape(-1)
    payload = np.empty((u.size, 3), dtype=np.uint8)
    payload[:, 0] = u & 0xFF
    payload[:, 1] = (u >> 8) & 0xFF
    payload[:, 2] = (u >> 16) & 0xFF

    header_bytes = 256 * (ns + 1)
    head = bytearray()
    head += b"\xffBIOSEMI"
    head += _fmt(r.subject_id[:80], 80)
    head += _fmt("forged-eeg", 80)
    head += _fmt("01.01.00") + _fmt("00.00.00")
    head += _fmt(header_bytes)
    head += _fmt("24BIT", 44)
    head += _fmt(n_records)
    head += _fmt(f"{record_duration_s:g}")
    head += _fmt(ns, 4)
    fields = [
        [_fmt(name[:16], 16) for name in r.channel_names],
        [_fmt("", 80)] * ns,
        [_fmt("uV")] * ns,
        [_fmt(v) for v in pmin_s],
        [_fmt(v) for v in pmax_s],
        [_fmt(_DIG_MIN)] * ns,
        [_fmt(_DIG_MAX)] * ns,
        [_fmt("", 80)] * ns,
        [_fmt(spr)] * ns,
        [_fmt("", 32)] * ns,
    ]
    for col in fields:
        for item in col:
            head += item
    assert len(head) == header_bytes
    with open(path, "wb") as fh:
        fh.write(bytes(head))
        fh.write(payload.tobytes())


# --------------------------------------------------------------------------
# synthetic EEG
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Peak:
    center_freq_hz: float
    bandwidth_hz: float
    amplitude: float


@dataclass(frozen=True)
class SynthSpec:
    class_profile: tuple[Peak, ...]
    noise_sigma: float = 1.0
    duration_s: float = 60.0
    n_channels: int = 32
    sample_rate_hz: float = 512.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "class_profile",
                           tuple(p if isinstance(p, Peak) else Peak(*p) for p in self.class_profile))


def _check_spec(spec: SynthSpec) -> None:
    if spec.duration_s <= 0:
        raise BadSpec("duration_s must be positive")
    if spec.sample_rate_hz <= 0 or spec.n_channels < 1:
        raise BadSpec("sample_rate_hz and n_channels must be positive")
    if spec.noise_sigma < 0:
        raise BadSpec("noise_sigma must be non-negative")
    nyq = spec.sample_rate_hz / 2
    for p in spec.class_profile:
        if not 0 <= p.center_freq_hz < nyq:
            raise BadSpec(f"peak at {p.center_freq_hz} Hz is outside [0, {nyq}) Hz")
        if p.bandwidth_hz < 0:
            raise BadSpec("peak bandwidth must be non-negative")


def _phase_jitter(rng: np.random.Generator, n: int, fs: float, bandwidth: float) -> np.ndarray:
    """Zero-mean Gaussian noise band-limited to (0, ``bandwidth``] Hz with unit std (radians)."""
    spec = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    spec[(freqs == 0) | (freqs > bandwidth)] = 0.0
    slow = np.fft.irfft(spec, n)
    std = slow.std()
    return slow / std if std > 0 else slow


def synth_recording(spec: SynthSpec, subject_id: str, label) -> Recording:
    """Generate a deterministic synthetic recording.

    Each channel is the sum of one oscillation per spectral peak plus white
    Gaussian noise. A peak's instantaneous frequency wanders around its
    peak's phase drifts by band-limited noise (band ``bandwidth``, std one
    radian), which keeps a carrier line at the center frequency and spreads
    the remaining power over about +-``bandwidth``; a zero-bandwidth
    peak is a pure sinusoid with a random per-channel phase.
    """
    _check_spec(spec)
    fs = spec.sample_rate_hz
    n = int(round(spec.duration_s * fs))
    rng = np.random.default_rng(spec.seed)
    t = np.arange(n) / fs
    data = np.zeros((spec.n_channels, n))
    for ch in range(spec.n_channels):
        for p in spec.class_profile:
            phase0 = rng.uniform(0, 2 * np.pi)
            phase = 2 * np.pi * p.center_freq_hz * t + phase0
            if p.bandwidth_hz > 0:
                phase += _phase_jitter(rng, n, fs, p.bandwidth_hz)
            data[ch] += p.amplitude * np.cos(phase)
        if spec.noise_sigma > 0:
            data[ch] += spec.noise_sigma * rng.standard_normal(n)
    return Recording(subject_id, label, fs, default_channel_names(spec.n_channels), data)


CLASS_PEAK_HZ = {ClassLabel.HC: 8.0, ClassLabel.PD: 20.0}


def synthetic_cohort(n_per_class: int = 8, duration_s: float = 60.0, n_channels: int = 32,
                     sample_rate_hz: float = 512.0, seed: int = 0, amplitude: float = 10.0,
                     bandwidth_hz: float = 1.0, noise_sigma: float = 10.0):
    """Subjects for the separability experiment: HC peak at 8 Hz, PD at 20 Hz.

    Returns ``[(subject_id, label, SynthSpec), ...]``, HC subjects first; each
    subject gets its own seed derived from ``seed``.
    """
    seeds = np.random.SeedSequence(seed).generate_state(2 * n_per_class, dtype=np.uint64)
    cohort = []
    for ci, label in enumerate((ClassLabel.HC, ClassLabel.PD)):
        for i in range(n_per_class):
            spec = SynthSpec(
                (Peak(CLASS_PEAK_HZ[label], bandwidth_hz, amplitude),),
                noise_sigma, duration_s, n_channels, sample_rate_hz,
                int(seeds[ci * n_per_class + i]),
            )
            cohort.append((f"{label.name}{i + 1:02d}", label, spec))
    return cohort
