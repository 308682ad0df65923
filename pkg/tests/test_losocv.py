import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forged_eeg.core import ClassLabel, DatasetManifest, ManifestEntry, Recording
from forged_eeg.errors import EmptyPredictions, FoldFailed, SingleClass, TooFewSubjects
from forged_eeg.forge import ForgeConfig, ForgedImage
from forged_eeg.losocv import (
    REPORT_HEADER,
    Fold,
    FoldResult,
    LosocvReport,
    fold_seed,
    losocv_on_images,
    make_folds,
    parse_report_csv,
    render_report,
    report_from_table,
    run_losocv,
    split_fold,
    subject_prediction,
    write_report,
)
from forged_eeg.nn import TrainConfig
from forged_eeg.tfr import SpwvdConfig
from reference_losocv import AVERAGE, ROWS


def _manifest(n_hc, n_pd):
    entries = [ManifestEntry(f"HC{i:02d}", ClassLabel.HC, f"hc{i}") for i in range(n_hc)]
    entries += [ManifestEntry(f"PD{i:02d}", ClassLabel.PD, f"pd{i}") for i in range(n_pd)]
    return DatasetManifest(entries)


def _images(m, per_subject=3, size=8):
    out = []
    for e in m.entries:
        for k in range(per_subject):
            planes = np.full((3, size, size), 0.1 + 0.8 * int(e.label), np.float32)
            out.append(ForgedImage(planes, e.subject_id, e.label, k))
    return out


def test_31_subject_folds():
    m = _manifest(16, 15)
    folds = make_folds(m)
    assert len(folds) == 31
    assert [f.test_subject_id for f in folds] == m.subject_ids
    for f in folds:
        assert len(f.train_subject_ids) == 30 and f.test_subject_id not in f.train_subject_ids
        assert set(f.train_subject_ids) | {f.test_subject_id} == set(m.subject_ids)


def test_fold_errors():
    with pytest.raises(TooFewSubjects):
        make_folds(_manifest(1, 0))
    with pytest.raises(SingleClass):
        make_folds(_manifest(3, 0))


def test_subject_prediction_examples():
    hc = ClassLabel.HC
    preds = [hc] * 23 + [ClassLabel.PD]
    label, acc, correct = subject_prediction(preds, hc)
    assert (label, correct) == (hc, True) and acc == pytest.approx(0.9583, abs=1e-4)
    label, acc, correct = subject_prediction([hc] + [ClassLabel.PD] * 15, hc)
    assert (label, correct) == (ClassLabel.PD, False) and acc == 0.0625


def test_exact_half_is_incorrect():
    label, acc, correct = subject_prediction([0, 1, 0, 1], ClassLabel.PD)
    assert acc == 0.5 and not correct and label is ClassLabel.HC


def test_empty_predictions():
    with pytest.raises(EmptyPredictions):
        subject_prediction([], ClassLabel.HC)


@settings(max_examples=50, deadline=None)
@given(preds=st.lists(st.integers(0, 1), min_size=1, max_size=60), label=st.integers(0, 1))
def test_prediction_rule(preds, label):
    predicted, acc, correct = subject_prediction(preds, label)
    assert correct == (predicted == label) == (acc > 0.5)


def test_published_table_aggregation():
    report = report_from_table([r[:6] for r in ROWS])
    assert [row.predicted_label.name for row in report.rows] == [r[6] for r in ROWS]
    assert sum(r.correct for r in report.rows) == 28
    assert round(100 * report.subject_accuracy, 2) == AVERAGE["subject_acc"]
    assert round(100 * report.mean_test_acc, 2) == AVERAGE["test_acc"]
    assert round(100 * report.mean_train_acc, 2) == AVERAGE["train_acc"]
    assert round(report.mean_train_loss, 3) == AVERAGE["train_loss"]
    assert round(report.mean_test_loss, 3) == AVERAGE["test_loss"]


def test_split_fold_has_no_leakage():
    m = _manifest(3, 3)
    images = _images(m)
    for fold in make_folds(m):
        train, test = split_fold(fold, images)
        assert all(im.subject_id != fold.test_subject_id for im in train)
        assert {im.subject_id for im in test} == {fold.test_subject_id}
        assert len(train) + len(test) == len(images)


def test_split_fold_detects_leakage():
    images = _images(_manifest(2, 2))
    bad = Fold("HC00", ("HC00", "HC01", "PD00", "PD01"))
    with pytest.raises(AssertionError):
        split_fold(bad, images)


def test_fold_seed_keyed_by_subject():
    assert fold_seed(0, "HC01") == fold_seed(0, "HC01")
    assert fold_seed(0, "HC01") != fold_seed(1, "HC01")
    assert fold_seed(0, "HC01") != fold_seed(0, "HC02")


def _row(sid, label, vals, correct=True):
    return FoldResult(sid, ClassLabel.parse(label), *vals, ClassLabel.parse(label), correct)


def test_render_counts_and_round_trip():
    rng = np.random.default_rng(0)
    rows = [_row(f"S{i}", "HC" if i % 2 else "PD", tuple(rng.uniform(0, 1, 4)), bool(i % 3)) for i in range(31)]
    for r in rows:
        if not r.correct:
            r.predicted_label = r.label.other()
    report = LosocvReport(rows)
    text, csv_text = render_report(report)
    assert len(text.strip().splitlines()) == 1 + 32
    lines = csv_text.strip().splitlines()
    assert lines[0] == ",".join(REPORT_HEADER)
    assert len(lines) == 1 + 32 and lines[-1].startswith("Average")
    back = parse_report_csv(csv_text)
    assert back.rows == report.rows
    assert float(lines[-1].split(",")[-1]) == report.subject_accuracy


def test_single_fold_average():
    report = LosocvReport([_row("S1", "HC", (0.1, 0.9, 0.2, 0.8))])
    assert (report.mean_train_loss, report.mean_train_acc, report.mean_test_loss, report.mean_test_acc) == (
        0.1, 0.9, 0.2, 0.8)
    _, csv_text = render_report(report)
    avg = csv_text.strip().splitlines()[-1].split(",")
    assert [float(v) for v in avg[2:6]] == [0.1, 0.9, 0.2, 0.8]


@settings(max_examples=30, deadline=None)
@given(vals=st.lists(st.tuples(*[st.floats(0, 1)] * 4, st.booleans()), min_size=1, max_size=20))
def test_report_averages_are_column_means(vals):
    rows = [_row(f"S{i}", "PD", v[:4], v[4]) for i, v in enumerate(vals)]
    report = LosocvReport(rows)
    cols = np.array([v[:4] for v in vals])
    assert abs(report.mean_test_acc - cols[:, 3].mean()) <= 1e-9
    assert abs(report.mean_train_loss - cols[:, 0].mean()) <= 1e-9
    assert report.subject_accuracy == sum(v[4] for v in vals) / len(vals)
    assert parse_report_csv(render_report(report)[1]).rows == rows


def test_write_report_records_seed(tmp_path):
    path = tmp_path / "r.csv"
    write_report(LosocvReport([_row("S1", "HC", (0.1, 0.9, 0.2, 0.8))]), path, seed=5)
    text = path.read_text()
    assert text.startswith("# seed=5\n")
    assert parse_report_csv(text).rows[0].subject_id == "S1"


CFG = TrainConfig(lr=1e-3, epochs=2, batch_size=4)


def _small_images(m):
    return _images(m, per_subject=2, size=32)


def test_losocv_on_images_small():
    m = _manifest(2, 2)
    report = losocv_on_images(m, _small_images(m), CFG, base_seed=3)
    assert [r.subject_id for r in report.rows] == m.subject_ids
    for r in report.rows:
        assert 0 <= r.test_acc <= 1 and 0 <= r.train_acc <= 1
        assert r.correct == (r.predicted_label == r.label)
        assert len(r.history.loss) == CFG.epochs


def test_manifest_order_does_not_change_results():
    m = _manifest(2, 2)
    images = _small_images(m)
    a = losocv_on_images(m, images, CFG, base_seed=3)
    rev = DatasetManifest(list(reversed(m.entries)))
    b = losocv_on_images(rev, images, CFG, base_seed=3)
    assert {r.subject_id: r for r in a.rows} == {r.subject_id: r for r in b.rows}
    assert a.mean_test_acc == pytest.approx(b.mean_test_acc, abs=1e-12)


def test_parallel_folds_match_serial():
    m = _manifest(2, 2)
    images = _small_images(m)
    serial = losocv_on_images(m, images, CFG, base_seed=1)
    parallel = losocv_on_images(m, images, CFG, base_seed=1, n_jobs=2)
    assert render_report(serial)[1] == render_report(parallel)[1]


def test_failed_fold_names_subject():
    m = _manifest(2, 2)
    images = [im for im in _small_images(m) if im.subject_id != "PD01"]
    with pytest.raises(FoldFailed) as info:
        losocv_on_images(m, images, CFG)
    assert info.value.subject_id == "PD01"


def test_run_losocv_with_loader():
    m = _manifest(2, 2)
    rng = np.random.default_rng(0)

    def load(entry):
        f = 8.0 if entry.label is ClassLabel.HC else 20.0
        t = np.arange(1024) / 256.0
        data = np.sin(2 * np.pi * f * t) + 0.1 * rng.standard_normal((6, 1024))
        return Recording(entry.subject_id, entry.label, 256.0, [f"c{i}" for i in range(6)], data)

    cfg = ForgeConfig(SpwvdConfig(128, ("hamming", 7), ("hamming", 63)), 32, 32)
    report = run_losocv(m, cfg, CFG, load=load)
    assert len(report.rows) == 4

    def broken(entry):
        raise OSError(f"cannot read {entry.path}")

    with pytest.raises(FoldFailed) as info:
        run_losocv(m, cfg, CFG, load=broken)
    assert info.value.subject_id == "HC00"
