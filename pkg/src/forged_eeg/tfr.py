"""Analytic signal and the discrete smoothed pseudo Wigner-Ville distribution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import EvenLength, TooShort

__all__ = [
    "WINDOW_KINDS",
    "make_window",
    "analytic_signal",
    "SpwvdConfig",
    "TfrMatrix",
    "spwvd",
]

WINDOW_KINDS = ("hamming", "gaussian", "rect")


def make_window(kind: str, length: int) -> np.ndarray:
    """Symmetric odd-length window with peak value 1 at the center sample."""
    length = int(length)
    if length < 1 or length % 2 == 0:
        raise EvenLength(f"window length must be odd and positive, got {length}")
    kind = kind.lower()
    if length == 1:
        return np.ones(1)
    k = np.arange(length)
    if kind == "hamming":
        w = 0.54 - 0.46 * np.cos(2 * np.pi * k / (length - 1))
    elif kind == "gaussian":
        sigma = length / 6
        w = np.exp(-0.5 * ((k - (length - 1) / 2) / sigma) ** 2)
    elif kind == "rect":
        w = np.ones(length)
    else:
        raise ValueError(f"unknown window kind {kind!r}; choose from {WINDOW_KINDS}")
    w = 0.5 * (w + w[::-1])
    return w / w[(length - 1) // 2]


def analytic_signal(x) -> np.ndarray:
    """FFT Hilbert construction: keep DC (and Nyquist), double positive bins, drop negative ones."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    if n < 2:
        raise TooShort("analytic signal needs at least 2 samples")
    spec = np.fft.fft(x, axis=-1)
    weights = np.zeros(n)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[n // 2] = 1.0
        weights[1:n // 2] = 2.0
    else:
        weights[1:(n + 1) // 2] = 2.0
    return np.fft.ifft(spec * weights, axis=-1)


@dataclass(frozen=True)
class SpwvdConfig:
    """``time_window`` smooths along time (g), ``lag_window`` along lag (h)."""

    n_freq_bins: int = 2048
    time_window: tuple[str, int] = ("hamming", 31)
    lag_window: tuple[str, int] = ("hamming", 255)

    def __post_init__(self):
        for kind, length in (self.time_window, self.lag_window):
            if length < 1 or length % 2 == 0:
                raise EvenLength(f"{kind} window length must be odd and positive, got {length}")
        if self.n_freq_bins < self.lag_window[1]:
            raise ValueError(
                f"n_freq_bins={self.n_freq_bins} cannot hold {self.lag_window[1]} lags"
            )


@dataclass(frozen=True, eq=False)
class TfrMatrix:
    values: np.ndarray          # (n_freq_bins, n_times), row 0 is 0 Hz
    freq_axis_hz: np.ndarray
    time_axis_s: np.ndarray
    imag_residual: float = 0.0  # max |imag| / max |real| before discarding


def _lag_products(z: np.ndarray, half_lag: int) -> np.ndarray:
    """P[n, m + M] = z[n + m] * conj(z[n - m]), zero when an index leaves the signal."""
    nt = z.size
    p = np.zeros((nt, 2 * half_lag + 1), dtype=np.complex128)
    for m in range(-half_lag, half_lag + 1):
        lo, hi = abs(m), nt - abs(m)
        if hi <= lo:
            continue
        n = np.arange(lo, hi)
        p[lo:hi, m + half_lag] = z[n + m] * np.conj(z[n - m])
    return p


def _smooth_time(p: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Sum_u g[u] * P[n - u, :] with zero outside the signal (u centered on g)."""
    half = (g.size - 1) // 2
    full = fftconvolve(p, g[:, None], mode="full", axes=0)
    return full[half:half + p.shape[0]]


def spwvd(x, cfg: SpwvdConfig = SpwvdConfig(), sample_rate_hz: float = 1.0) -> TfrMatrix:
    """Smoothed pseudo Wigner-Ville distribution of a real signal.

    With ``z`` the analytic signal, the local kernel at time ``n`` and lag
    ``m`` is ``K[n, m] = h[m] * sum_u g[u] z[n-u+m] conj(z[n-u-m])``.
    Lags are wrapped onto an ``n_freq_bins``-point FFT so that row ``k``
    sits at ``k * fs / (2 * n_freq_bins)`` Hz and the rows span [0, fs/2).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"spwvd takes a 1-D signal, got shape {x.shape}")
    nt = x.size
    g = make_window(*cfg.time_window)
    h = make_window(*cfg.lag_window)
    if nt < h.size:
        raise TooShort(f"signal of {nt} samples is shorter than the {h.size}-sample lag window")
    half_lag = (h.size - 1) // 2
    nf = cfg.n_freq_bins

    z = analytic_signal(x)
    kernel = _smooth_time(_lag_products(z, half_lag), g) * h
    lags = np.zeros((nt, nf), dtype=np.complex128)
    lags[:, :half_lag + 1] = kernel[:, half_lag:]
    if half_lag:
        lags[:, nf - half_lag:] = kernel[:, :half_lag]
    spec = np.fft.fft(lags, axis=1)
    real = spec.real
    peak = np.abs(real).max()
    residual = float(np.abs(spec.imag).max() / peak) if peak > 0 else 0.0
    return TfrMatrix(
        values=np.ascontiguousarray(real.T),
        freq_axis_hz=np.arange(nf) * sample_rate_hz / (2 * nf),
        time_axis_s=np.arange(nt) / sample_rate_hz,
        imag_residual=residual,
    )

