import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forged_eeg.errors import EvenLength, TooShort
from forged_eeg.tfr import SpwvdConfig, analytic_signal, make_window, spwvd
from oracles import spwvd_direct

FS = 512.0
TINY = SpwvdConfig(32, ("hamming", 5), ("hamming", 15))


def test_rect_window():
    assert np.array_equal(make_window("rect", 5), np.ones(5))


@pytest.mark.parametrize("kind", ["hamming", "gaussian", "rect"])
def test_length_one_window(kind):
    assert np.array_equal(make_window(kind, 1), [1.0])


def test_hamming_closed_form():
    k = np.arange(5)
    ref = 0.54 - 0.46 * np.cos(2 * np.pi * k / 4)
    assert np.allclose(make_window("hamming", 5), ref / ref[2], atol=1e-15)


@pytest.mark.parametrize("kind", ["hamming", "gaussian", "rect"])
@pytest.mark.parametrize("length", [3, 31, 255])
def test_window_shape(kind, length):
    w = make_window(kind, length)
    assert np.array_equal(w, w[::-1])
    assert np.all(w > 0)
    assert w[(length - 1) // 2] == 1.0 == w.max()


def test_gaussian_sigma():
    w = make_window("gaussian", 61)
    assert w[40] == pytest.approx(np.exp(-0.5 * (10 / (61 / 6)) ** 2), rel=1e-12)


def test_even_window_rejected():
    with pytest.raises(EvenLength):
        make_window("hamming", 4)
    with pytest.raises(EvenLength):
        SpwvdConfig(512, ("hamming", 30), ("hamming", 255))


def test_analytic_of_zero():
    assert np.all(analytic_signal(np.zeros(16)) == 0)


def test_analytic_exact_bin_cosine():
    n = 1024
    t = np.arange(n)
    z = analytic_signal(np.cos(2 * np.pi * 32 * t / n))
    assert np.abs(z - np.exp(2j * np.pi * 32 * t / n)).max() <= 1e-6


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 300), seed=st.integers(0, 2 ** 16))
def test_analytic_real_part_is_input(n, seed):
    x = np.random.default_rng(seed).standard_normal(n) * 100
    z = analytic_signal(x)
    assert np.abs(z.real - x).max() <= 1e-9 * np.abs(x).max()


def test_analytic_too_short():
    with pytest.raises(TooShort):
        analytic_signal([1.0])


def test_paper_output_shape():
    out = spwvd(np.random.default_rng(0).standard_normal(1024), SpwvdConfig(), FS)
    assert out.values.shape == (2048, 1024)
    assert out.freq_axis_hz[0] == 0 and out.freq_axis_hz[-1] < FS / 2
    assert np.all(np.diff(out.freq_axis_hz) > 0) and np.all(np.diff(out.time_axis_s) > 0)
    assert np.all(np.isfinite(out.values))


def test_zero_input():
    assert np.all(spwvd(np.zeros(300), SpwvdConfig(256), FS).values == 0)


def test_too_short():
    with pytest.raises(TooShort):
        spwvd(np.ones(200), SpwvdConfig(), FS)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_matches_direct_double_sum(seed):
    x = np.random.default_rng(seed).standard_normal(64)
    fast = spwvd(x, TINY).values
    slow = spwvd_direct(x, make_window("hamming", 5), make_window("hamming", 15), 32)
    assert np.abs(fast - slow).max() <= 1e-9


def test_matches_direct_with_other_windows():
    x = np.random.default_rng(7).standard_normal(40)
    cfg = SpwvdConfig(16, ("gaussian", 7), ("rect", 9))
    slow = spwvd_direct(x, make_window("gaussian", 7), make_window("rect", 9), 16)
    assert np.abs(spwvd(x, cfg).values - slow).max() <= 1e-9


def test_tone_energy_concentration():
    t = np.arange(1024) / FS
    out = spwvd(np.cos(2 * np.pi * 10 * t), SpwvdConfig(), FS)
    edge = (255 - 1) // 2 + (31 - 1) // 2
    v = np.clip(out.values[:, edge:1024 - edge], 0, None) ** 2
    near = np.abs(out.freq_axis_hz - 10) <= 2
    frac = v[near].sum(axis=0) / v.sum(axis=0)
    assert frac.min() >= 0.9


def test_realness_residual():
    out = spwvd(np.random.default_rng(3).standard_normal(512), SpwvdConfig(512), FS)
    assert out.imag_residual < 1e-9


def test_time_shift_covariance():
    rng = np.random.default_rng(4)
    x = rng.standard_normal(400)
    d = 37
    cfg = SpwvdConfig(64, ("hamming", 7), ("hamming", 31))
    # the FFT analytic signal is global, so delay circularly: that commutes
    # exactly with the Hilbert construction
    a = spwvd(x, cfg).values
    b = spwvd(np.roll(x, d), cfg).values
    # columns far from both edges see the same kernel support in both signals
    lo, hi = 60 + d, 400 - 60
    assert np.abs(b[:, lo:hi] - a[:, lo - d:hi - d]).max() <= 1e-6 * np.abs(a).max()


@settings(max_examples=15, deadline=None)
@given(a=st.floats(0.01, 100), seed=st.integers(0, 2 ** 16))
def test_amplitude_scaling(a, seed):
    x = np.random.default_rng(seed).standard_normal(64)
    base = spwvd(x, TINY).values
    scaled = spwvd(a * x, TINY).values
    assert np.abs(scaled - a * a * base).max() <= 1e-9 * a * a * np.abs(base).max()


def test_chirp_argmax_increases():
    t = np.arange(1024) / FS
    f0, f1, dur = 5.0, 50.0, 2.0
    x = np.cos(2 * np.pi * (f0 * t + 0.5 * (f1 - f0) / dur * t ** 2))
    out = spwvd(x, SpwvdConfig(1024), FS)
    edge = 142
    ridge = out.freq_axis_hz[out.values[:, edge:1024 - edge].argmax(axis=0)]
    assert np.all(np.diff(ridge) >= 0)
    assert ridge[-1] > ridge[0]
