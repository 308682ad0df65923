import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forged_eeg.core import ClassLabel, Recording, epoch_recording, validate_recording
from forged_eeg.errors import BadLabel, BadRate, EpochTooLong, NonFinite, ShapeMismatch


def test_valid_recording_passes(make_recording):
    validate_recording(make_recording())


def test_nan_sample_is_located(make_recording):
    r = make_recording()
    data = r.data.copy()
    data[5, 100] = np.nan
    with pytest.raises(NonFinite) as info:
        validate_recording(r.with_data(data))
    assert (info.value.channel, info.value.sample) == (5, 100)
    assert "(channel 5, sample 100)" in str(info.value)


def test_name_row_mismatch(make_recording):
    r = make_recording()
    bad = Recording(r.subject_id, r.label, r.sample_rate_hz, r.channel_names, r.data[:31])
    with pytest.raises(ShapeMismatch):
        validate_recording(bad)


def test_bad_rate(make_recording):
    r = make_recording()
    with pytest.raises(BadRate):
        validate_recording(Recording("S", "HC", 0.0, r.channel_names, r.data))


def test_recording_is_immutable(make_recording):
    r = make_recording()
    with pytest.raises(ValueError):
        r.data[0, 0] = 1.0
    assert r.data.dtype == np.float32


def test_label_encoding():
    assert int(ClassLabel.HC) == 0 and int(ClassLabel.PD) == 1
    assert ClassLabel.parse("pd") is ClassLabel.PD
    assert ClassLabel.parse(0) is ClassLabel.HC
    assert ClassLabel.HC.other() is ClassLabel.PD
    with pytest.raises(BadLabel):
        ClassLabel.parse("XX")


def test_200_seconds_gives_100_epochs(make_recording):
    r = make_recording(n_samples=200 * 512)
    epochs = epoch_recording(r, 2.0)
    assert len(epochs) == 100
    assert all(e.data.shape == (32, 1024) for e in epochs)


def test_exactly_one_epoch(make_recording):
    assert len(epoch_recording(make_recording(n_samples=1024), 2.0)) == 1


def test_remainder_dropped(make_recording):
    r = make_recording(n_samples=int(5.5 * 512))
    epochs = epoch_recording(r, 2.0)
    assert len(epochs) == 2
    assert epochs[-1].data.shape == (32, 1024)


def test_too_short(make_recording):
    with pytest.raises(EpochTooLong):
        epoch_recording(make_recording(n_samples=1000), 2.0)


@settings(max_examples=40, deadline=None)
@given(n_samples=st.integers(16, 600), length=st.integers(1, 16), extra=st.integers(0, 15))
def test_epochs_tile_prefix(n_samples, length, extra):
    rng = np.random.default_rng(n_samples)
    fs = 8.0
    r = Recording("S", "PD", fs, ["a", "b", "c"], rng.standard_normal((3, n_samples)))
    epochs = epoch_recording(r, length / fs)
    count = n_samples // length
    assert len(epochs) == count
    assert [e.epoch_index for e in epochs] == list(range(count))
    joined = np.concatenate([e.data for e in epochs], axis=1)
    assert np.array_equal(joined, r.data[:, :count * length])
    # appending fewer than one epoch of samples leaves the count unchanged
    tail = rng.standard_normal((3, min(extra, length - 1 - n_samples % length)))
    longer = r.with_data(np.concatenate([r.data, tail], axis=1))
    assert len(epoch_recording(longer, length / fs)) == count
