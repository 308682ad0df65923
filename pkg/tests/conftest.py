import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from forged_eeg.core import ClassLabel, Recording  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def make_recording(rng):
    def make(n_channels=32, n_samples=1024, fs=512.0, subject="S01", label=ClassLabel.HC, scale=10.0):
        data = rng.standard_normal((n_channels, n_samples)) * scale
        names = [f"ch{i:02d}" for i in range(n_channels)]
        return Recording(subject, label, fs, names, data)

    return make


_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    failed = report.failed or (report.when == "call" and report.skipped)
    if report.when == "call" or failed:
        previous = _criteria.get(number, (title, True))[1]
        _criteria[number] = (title, previous and not failed)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
