"""The nine acceptance criteria, one test each, at their stated tolerances.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""

import time

import numpy as np
import pytest

from forged_eeg.cli import main
from forged_eeg.core import ClassLabel, DatasetManifest, ManifestEntry, Recording, epoch_recording
from forged_eeg.forge import (
    ForgeConfig,
    ForgedImage,
    average_group,
    export_ppm,
    forge_epoch,
    normalize_stack,
    read_ppm,
    resize_bilinear,
    split_channels,
)
from forged_eeg.ingest import read_bdf, read_bdf_header, read_raw, write_bdf, write_raw
from forged_eeg.losocv import make_folds, parse_report_csv, report_from_table, split_fold
from forged_eeg.nn import (
    build_paper_cnn,
    conv2d_backward,
    conv2d_forward,
    fc_backward,
    fc_forward,
    maxpool_backward,
    maxpool_forward,
    relu_backward,
    relu_forward,
    softmax_ce,
)
from forged_eeg.tfr import SpwvdConfig, make_window, spwvd
from oracles import central_difference, rel_error, spwvd_direct
from reference_losocv import AVERAGE, ROWS

FS = 512.0


@pytest.mark.criterion(1, "architecture: 1,115,524 parameters, per-layer counts and shape chain exact")
def test_criterion_1_architecture():
    start = time.perf_counter()
    m = build_paper_cnn()
    assert m.param_count() == 1_115_524
    assert m.layer_param_counts() == [224, 1168, 4640, 27744, 1080050, 1632, 66]
    chain = [s for s, layer in zip(m.shapes, m.layers) if layer.kind not in ("ReLU", "Softmax")]
    assert chain == [(8, 254, 254), (8, 127, 127), (16, 125, 125), (32, 62, 62), (32, 31, 31),
                     (96, 15, 15), (21600,), (50,), (32,), (2,)]
    assert time.perf_counter() - start < 1.0


@pytest.mark.criterion(2, "gradients: every layer within 1e-4 relative of central differences, 20 trials each")
def test_criterion_2_gradients():
    start = time.perf_counter()
    for trial in range(20):
        rng = np.random.default_rng(7000 + trial)
        stride = 1 + trial % 2
        x = rng.standard_normal((2, int(rng.integers(1, 4)), int(rng.integers(3, 8)), int(rng.integers(3, 8))))
        w = rng.standard_normal((int(rng.integers(1, 4)), x.shape[1], 3, 3))
        b = rng.standard_normal(w.shape[0])
        r = rng.standard_normal(conv2d_forward(x, w, b, stride).shape)
        f = lambda: float(np.sum(conv2d_forward(x, w, b, stride) * r))
        gx, gw, gb = conv2d_backward(x, w, r, stride)
        for analytic, arr in ((gx, x), (gw, w), (gb, b)):
            assert rel_error(analytic, central_difference(f, arr)) < 1e-4, ("conv", trial)

        shape = (2, 2, int(rng.integers(2, 7)), int(rng.integers(2, 7)))
        xp = rng.permutation(int(np.prod(shape))).reshape(shape) * 0.01
        out, idx = maxpool_forward(xp)
        rp = rng.standard_normal(out.shape)
        f = lambda: float(np.sum(maxpool_forward(xp)[0] * rp))
        assert rel_error(maxpool_backward(rp, idx, xp.shape), central_difference(f, xp)) < 1e-4, ("pool", trial)

        xr = rng.standard_normal((3, 6))
        xr[np.abs(xr) < 1e-2] = 0.5
        rr = rng.standard_normal(xr.shape)
        f = lambda: float(np.sum(relu_forward(xr) * rr))
        assert rel_error(relu_backward(xr, rr), central_difference(f, xr)) < 1e-4, ("relu", trial)

        xf, wf, bf = rng.standard_normal((3, 5)), rng.standard_normal((4, 5)), rng.standard_normal(4)
        rf = rng.standard_normal((3, 4))
        f = lambda: float(np.sum(fc_forward(xf, wf, bf) * rf))
        gx, gw, gb = fc_backward(xf, wf, rf)
        for analytic, arr in ((gx, xf), (gw, wf), (gb, bf)):
            assert rel_error(analytic, central_difference(f, arr)) < 1e-4, ("fc", trial)

        logits = rng.standard_normal((4, 2)) * 3
        labels = rng.integers(0, 2, 4)
        _, g = softmax_ce(logits, labels)
        num = central_difference(lambda: softmax_ce(logits, labels)[0], logits)
        assert rel_error(g, num) < 1e-4, ("softmax_ce", trial)
    assert time.perf_counter() - start < 60


@pytest.mark.criterion(3, "SPWVD: direct-sum oracle to 1e-9, 2048x1024 shape, realness, 10 Hz concentration")
def test_criterion_3_spwvd():
    start = time.perf_counter()
    x = np.random.default_rng(3).standard_normal(64)
    cfg = SpwvdConfig(32, ("hamming", 5), ("hamming", 15))
    oracle = spwvd_direct(x, make_window("hamming", 5), make_window("hamming", 15), 32)
    assert np.abs(spwvd(x, cfg).values - oracle).max() <= 1e-9

    t = np.arange(1024) / FS
    out = spwvd(np.cos(2 * np.pi * 10 * t), SpwvdConfig(), FS)
    assert out.values.shape == (2048, 1024)
    assert out.imag_residual < 1e-9
    edge = 127 + 15
    energy = np.clip(out.values[:, edge:1024 - edge], 0, None) ** 2
    near = np.abs(out.freq_axis_hz - 10.0) <= 2.0
    assert (energy[near].sum(axis=0) / energy.sum(axis=0)).min() >= 0.9
    assert time.perf_counter() - start < 120


@pytest.mark.criterion(4, "pipeline arithmetic: 100 epochs, (11, 11, 10) split, forge equals stage composition")
def test_criterion_4_pipeline_arithmetic():
    rng = np.random.default_rng(4)
    r = Recording("S01", ClassLabel.PD, FS, [f"c{i}" for i in range(32)], rng.standard_normal((32, 200 * 512)))
    epochs = epoch_recording(r, 2.0)
    assert len(epochs) == 100
    groups = split_channels(32)
    assert [len(g) for g in groups] == [11, 11, 10]

    e = epochs[17]
    cfg = ForgeConfig()
    planes = [resize_bilinear(spwvd(average_group(e.data, g), cfg.spwvd, FS).values, 256, 256) for g in groups]
    manual = normalize_stack(*planes)
    assert forge_epoch(e, cfg, FS).planes.tobytes() == manual.tobytes()


@pytest.mark.criterion(5, "published LOSOCV rows aggregate to 28/31 = 90.32% and mean test acc 86.80%")
def test_criterion_5_table_arithmetic():
    start = time.perf_counter()
    report = report_from_table([row[:6] for row in ROWS])
    assert sum(r.correct for r in report.rows) == 28
    assert f"{100 * report.subject_accuracy:.2f}" == f"{AVERAGE['subject_acc']:.2f}"
    assert f"{100 * report.mean_test_acc:.2f}" == f"{AVERAGE['test_acc']:.2f}"
    assert [r.predicted_label.name for r in report.rows] == [row[6] for row in ROWS]
    assert time.perf_counter() - start < 1.0


@pytest.mark.criterion(6, "no leakage: no test-subject image in any fold's training set")
def test_criterion_6_no_leakage():
    rng = np.random.default_rng(6)
    for n_hc, n_pd in ((16, 15), (2, 1), (5, 7)):
        entries = [ManifestEntry(f"HC{i}", ClassLabel.HC, "") for i in range(n_hc)]
        entries += [ManifestEntry(f"PD{i}", ClassLabel.PD, "") for i in range(n_pd)]
        order = rng.permutation(len(entries))
        m = DatasetManifest([entries[i] for i in order])
        images = [ForgedImage(np.zeros((3, 2, 2), np.float32), e.subject_id, e.label, k)
                  for e in m.entries for k in range(int(rng.integers(1, 5)))]
        images = [images[i] for i in rng.permutation(len(images))]
        for fold in make_folds(m):
            train, test = split_fold(fold, images)
            assert not any(im.subject_id == fold.test_subject_id for im in train)
            assert all(im.subject_id == fold.test_subject_id for im in test)
            assert len(train) + len(test) == len(images)


# ---------------------------------------------------------------- synthetic end to end

REDUCED = ["--n-freq-bins", "512", "--out-height", "64", "--out-width", "64",
           "--epochs", "10", "--batch-size", "32", "--seed", "0"]


def _full_run(root):
    data, out = root / "data", root / "out"
    assert main(["synth", "--out", str(data), "--seed", "0"]) == 0
    assert main(["losocv", "--data-dir", str(data), "--out", str(out), *REDUCED]) == 0
    return (out / "report.csv").read_bytes()


@pytest.fixture(scope="module")
def two_runs(tmp_path_factory):
    first = _full_run(tmp_path_factory.mktemp("run_a"))
    second = _full_run(tmp_path_factory.mktemp("run_b"))
    return first, second


@pytest.mark.slow
@pytest.mark.criterion(7, "synthetic 16-subject LOSOCV (64x64, 512 bins, 10 epochs, batch 32): subject accuracy >= 0.90")
def test_criterion_7_synthetic_end_to_end(two_runs):
    report = parse_report_csv(two_runs[0].decode())
    assert len(report.rows) == 16
    assert sorted(r.label for r in report.rows).count(ClassLabel.HC) == 8
    print(f"subject accuracy {report.subject_accuracy:.4f}, mean test acc {report.mean_test_acc:.4f}")
    assert report.subject_accuracy >= 0.90


@pytest.mark.slow
@pytest.mark.criterion(8, "determinism: two full runs with the same seed give bit-identical report files")
def test_criterion_8_determinism(two_runs):
    first, second = two_runs
    assert first == second


@pytest.mark.criterion(9, "format round trips: raw lossless, BDF within 24-bit step, PPM within 1/255")
def test_criterion_9_round_trips(tmp_path):
    rng = np.random.default_rng(9)
    r = Recording("S", ClassLabel.HC, FS, [f"c{i}" for i in range(32)], rng.standard_normal((32, 1024)) * 50)
    write_raw(r, tmp_path / "r.frg")
    assert read_raw(tmp_path / "r.frg").data.tobytes() == r.data.tobytes()

    write_bdf(r, tmp_path / "r.bdf")
    hdr = read_bdf_header(tmp_path / "r.bdf")
    step = (hdr.physical_max - hdr.physical_min) / (2 ** 24 - 1)
    err = np.abs(read_bdf(tmp_path / "r.bdf").data.astype(np.float64) - r.data.astype(np.float64))
    assert np.all(err <= step[:, None])

    planes = rng.uniform(0, 1, (3, 256, 256)).astype(np.float32)
    export_ppm(ForgedImage(planes), tmp_path / "i.ppm")
    assert np.abs(read_ppm(tmp_path / "i.ppm") - planes).max() <= 1 / 255
