"""Signal cleaning: zero-phase FIR band-pass and FastICA artifact removal."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.signal import oaconvolve
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from .core import Recording, validate_recording
from .errors import BadBand, BadIndex, NoConvergenceWarning, RankDeficient, TooShort

__all__ = [
    "FirKernel",
    "design_bandpass",
    "frequency_response",
    "apply_zero_phase",
    "IcaDecomposition",
    "fastica",
    "KeepAll",
    "KurtosisThreshold",
    "ExplicitList",
    "excess_kurtosis",
    "reject_and_rebuild",
    "BandpassFilter",
    "IcaCleaner",
]


@dataclass(frozen=True, eq=False)
class FirKernel:
    taps: np.ndarray
    low_hz: float
    high_hz: float
    sample_rate_hz: float

    @property
    def n_taps(self) -> int:
        return self.taps.size


def _lowpass(cutoff: float, fs: float, n_taps: int) -> np.ndarray:
    k = np.arange(n_taps) - (n_taps - 1) / 2
    h = 2 * cutoff / fs * np.sinc(2 * cutoff / fs * k) * np.hamming(n_taps)
    return h / h.sum()


def design_bandpass(sample_rate_hz: float, low_hz: float = 0.5, high_hz: float = 50.0) -> FirKernel:
    """Hamming-windowed sinc band-pass.

    Built as the difference of two unity-DC-gain low-passes, so the DC gain is
    zero up to rounding. Tap count is the smallest odd integer at least
    ``3.3 * fs / transition`` with ``transition = min(low, (fs/2 - high) / 4)``.
    """
    fs = float(sample_rate_hz)
    if not 0 < low_hz < high_hz < fs / 2:
        raise BadBand(f"need 0 < low ({low_hz}) < high ({high_hz}) < fs/2 ({fs / 2})")
    transition = min(low_hz, 0.25 * (fs / 2 - high_hz))
    n_taps = math.ceil(3.3 * fs / transition)
    if n_taps % 2 == 0:
        n_taps += 1
    taps = _lowpass(high_hz, fs, n_taps) - _lowpass(low_hz, fs, n_taps)
    # exact symmetry; the two halves can differ in the last bit otherwise
    taps = 0.5 * (taps + taps[::-1])
    return FirKernel(taps, float(low_hz), float(high_hz), fs)


def frequency_response(kernel: FirKernel, freqs_hz) -> np.ndarray:
    """Complex DTFT of the kernel evaluated at ``freqs_hz``."""
    f = np.atleast_1d(np.asarray(freqs_hz, dtype=float))
    n = np.arange(kernel.n_taps)
    omega = 2 * np.pi * f / kernel.sample_rate_hz
    return np.exp(-1j * np.outer(omega, n)) @ kernel.taps


def _filter_rows(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    half = (taps.size - 1) // 2
    if x.shape[-1] <= taps.size:
        raise TooShort(f"signal of {x.shape[-1]} samples is not longer than the {taps.size}-tap kernel")
    padded = np.pad(np.asarray(x, dtype=np.float64), [(0, 0)] * (x.ndim - 1) + [(half, half)], mode="reflect")
    shape = (1,) * (x.ndim - 1) + (taps.size,)
    return oaconvolve(padded, taps.reshape(shape), mode="valid", axes=-1)


def apply_zero_phase(r: Recording, kernel: FirKernel) -> Recording:
    """Filter every channel with the symmetric kernel, compensating its group delay.

    Edges are reflection-padded by half the kernel length.
    """
    return r.with_data(_filter_rows(r.data, kernel.taps))


@dataclass(frozen=True, eq=False)
class IcaDecomposition:
    unmixing: np.ndarray       # total: rotation @ whitening
    mixing: np.ndarray
    sources: np.ndarray
    whitening: np.ndarray
    rotation: np.ndarray       # orthonormal unmixing in whitened space
    channel_means: np.ndarray
    converged: bool
    n_iter: int
    source: Recording

    @property
    def n_components(self) -> int:
        return self.unmixing.shape[0]


def _sym_decorrelate(w: np.ndarray) -> np.ndarray:
    s, u = np.linalg.eigh(w @ w.T)
    s = np.clip(s, np.finfo(w.dtype).tiny, None)
    return (u / np.sqrt(s)) @ u.T @ w


def fastica(r: Recording, max_iter: int = 500, tol: float = 1e-6, seed: int = 0) -> IcaDecomposition:
    """Symmetric FastICA with the ``tanh`` contrast on all channels.

    Data are centered and whitened through the eigendecomposition of their
    covariance. Iteration stops once every row of the rotation changes by
    less than ``tol`` (``max |1 - |<w_new, w_old>|| < tol``). Hitting
    ``max_iter`` emits :class:`NoConvergenceWarning` and returns the partial
    result with ``converged=False``.
    """
    validate_recording(r, min_channels=1)
    x = r.data.astype(np.float64)
    k, n = x.shape
    if n < 10 * k:
        raise TooShort(f"need at least {10 * k} samples for {k} channels, got {n}")
    means = x.mean(axis=1)
    xc = x - means[:, None]
    cov = xc @ xc.T / n
    d, e = np.linalg.eigh(cov)
    if d[0] <= 1e-12 * d[-1]:
        raise RankDeficient(f"covariance eigenvalues span [{d[0]:.3g}, {d[-1]:.3g}]")
    whitening = (e / np.sqrt(d)).T
    z = whitening @ xc

    rng = np.random.default_rng(seed)
    w = _sym_decorrelate(rng.standard_normal((k, k)))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        y = w @ z
        g = np.tanh(y)
        g_prime = 1.0 - g * g
        w_new = _sym_decorrelate(g @ z.T / n - g_prime.mean(axis=1)[:, None] * w)
        change = np.max(np.abs(np.abs(np.einsum("ij,ij->i", w_new, w)) - 1.0))
        w = w_new
        if change < tol:
            converged = True
            break
    if not converged:
        warnings.warn(f"FastICA did not converge in {max_iter} iterations", NoConvergenceWarning, stacklevel=2)

    unmixing = w @ whitening
    mixing = np.linalg.inv(unmixing)
    sources = unmixing @ xc
    return IcaDecomposition(unmixing, mixing, sources, whitening, w, means, converged, it, r)


@dataclass(frozen=True)
class KeepAll:
    pass


@dataclass(frozen=True)
class KurtosisThreshold:
    """Reject components whose excess kurtosis exceeds ``threshold``."""

    threshold: float


@dataclass(frozen=True)
class ExplicitList:
    indices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))


RejectionPolicy = Union[KeepAll, KurtosisThreshold, ExplicitList]


def excess_kurtosis(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    xc = x - x.mean(axis=-1, keepdims=True)
    m2 = np.mean(xc ** 2, axis=-1)
    m4 = np.mean(xc ** 4, axis=-1)
    return m4 / m2 ** 2 - 3.0


def rejected_components(d: IcaDecomposition, policy: RejectionPolicy) -> list[int]:
    k = d.n_components
    if isinstance(policy, KeepAll):
        return []
    if isinstance(policy, KurtosisThreshold):
        return [int(i) for i in np.flatnonzero(excess_kurtosis(d.sources) > policy.threshold)]
    if isinstance(policy, ExplicitList):
        bad = [i for i in policy.indices if not 0 <= i < k]
        if bad:
            raise BadIndex(f"component indices {bad} outside [0, {k})")
        return sorted(set(policy.indices))
    raise TypeError(f"unknown rejection policy {policy!r}")


def reject_and_rebuild(d: IcaDecomposition, policy: RejectionPolicy = KeepAll()) -> Recording:
    """Zero the rejected sources and remix them back to channel space."""
    drop = rejected_components(d, policy)
    sources = d.sources.copy()
    sources[drop] = 0.0
    rebuilt = d.mixing @ sources + d.channel_means[:, None]
    return d.source.with_data(rebuilt)


# --------------------------------------------------------------------------
# estimator wrappers
# --------------------------------------------------------------------------

def _check_signals(X) -> np.ndarray:
    X = check_array(X, allow_nd=True, dtype=np.float64, ensure_2d=False)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise ValueError(f"expected (n_signals, n_channels, n_samples), got shape {X.shape}")
    return X


class BandpassFilter(TransformerMixin, BaseEstimator):
    """Zero-phase band-pass on arrays shaped (n_signals, n_channels, n_samples).

    Stateless; ``fit`` only designs the kernel.
    """

    def __init__(self, sample_rate_hz=512.0, low_hz=0.5, high_hz=50.0):
        self.sample_rate_hz = sample_rate_hz
        self.low_hz = low_hz
        self.high_hz = high_hz

    def fit(self, X=None, y=None):
        self.kernel_ = design_bandpass(self.sample_rate_hz, self.low_hz, self.high_hz)
        return self

    def transform(self, X):
        if not hasattr(self, "kernel_"):
            self.fit()
        X = _check_signals(X)
        return _filter_rows(X, self.kernel_.taps).astype(np.float32)


class IcaCleaner(TransformerMixin, BaseEstimator):
    """Per-signal FastICA followed by component rejection.

    Each signal in the batch is decomposed independently, as EEG recordings
    are in practice; nothing is learned across signals.
    """

    def __init__(self, policy: RejectionPolicy = KeepAll(), max_iter=500, tol=1e-6,
                 sample_rate_hz=512.0, random_state=0):
        self.policy = policy
        self.max_iter = max_iter
        self.tol = tol
        self.sample_rate_hz = sample_rate_hz
        self.random_state = random_state

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        X = _check_signals(X)
        out = np.empty(X.shape, dtype=np.float32)
        for i, sig in enumerate(X):
            rec = Recording("", 0, self.sample_rate_hz, [f"ch{c}" for c in range(sig.shape[0])], sig)
            d = fastica(rec, self.max_iter, self.tol, self.random_state)
            out[i] = reject_and_rebuild(d, self.policy).data
        return out


def clean_recording(r: Recording, band: Sequence[float] | None = (0.5, 50.0), ica: bool = False,
                    policy: RejectionPolicy = KeepAll(), seed: int = 0) -> Recording:
    """Band-pass (if ``band``) then optional ICA rejection."""
    validate_recording(r)
    if band is not None:
        r = apply_zero_phase(r, design_bandpass(r.sample_rate_hz, *band))
    if ica:
        r = reject_and_rebuild(fastica(r, seed=seed), policy)
    return r
