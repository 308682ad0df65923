"""Leave-one-subject-out cross-validation and its per-subject report."""

from __future__ import annotations

import csv
import hashlib
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import ClassLabel, DatasetManifest, Recording, epoch_recording
from .errors import EmptyPredictions, FoldFailed, SingleClass, TooFewSubjects
from .forge import ForgeConfig, ForgedImage, forge_epoch
from .nn.model import build_paper_cnn
from .nn.train import History, TrainConfig, evaluate, predict, train

__all__ = [
    "Fold",
    "FoldResult",
    "LosocvReport",
    "make_folds",
    "subject_prediction",
    "prediction_from_accuracy",
    "fold_seed",
    "split_fold",
    "run_losocv",
    "losocv_on_images",
    "render_report",
    "parse_report_csv",
    "REPORT_HEADER",
]

log = logging.getLogger(__name__)

REPORT_HEADER = ["subject_id", "label", "train_loss", "train_acc", "test_loss", "test_acc", "pred", "correct"]


@dataclass(frozen=True)
class Fold:
    test_subject_id: str
    train_subject_ids: tuple[str, ...]


@dataclass
class FoldResult:
    """Accuracies are fractions in [0, 1]."""

    subject_id: str
    label: ClassLabel
    train_loss: float
    train_acc: float
    test_loss: float
    test_acc: float
    predicted_label: ClassLabel
    correct: bool
    history: History | None = field(default=None, compare=False, repr=False)


@dataclass
class LosocvReport:
    rows: list[FoldResult]

    def _mean(self, name: str) -> float:
        return float(np.mean([getattr(r, name) for r in self.rows]))

    @property
    def mean_train_loss(self) -> float:
        return self._mean("train_loss")

    @property
    def mean_train_acc(self) -> float:
        return self._mean("train_acc")

    @property
    def mean_test_loss(self) -> float:
        return self._mean("test_loss")

    @property
    def mean_test_acc(self) -> float:
        return self._mean("test_acc")

    @property
    def subject_accuracy(self) -> float:
        return sum(r.correct for r in self.rows) / len(self.rows)


def make_folds(m: DatasetManifest) -> list[Fold]:
    ids = m.subject_ids
    if len(ids) < 2:
        raise TooFewSubjects(f"LOSOCV needs at least 2 subjects, manifest has {len(ids)}")
    if len({e.label for e in m.entries}) < 2:
        raise SingleClass("manifest holds a single class")
    return [Fold(sid, tuple(o for o in ids if o != sid)) for sid in ids]


def prediction_from_accuracy(epoch_accuracy: float, true_label) -> tuple[ClassLabel, bool]:
    """Strictly above one half keeps the true label; exactly one half counts as wrong."""
    true_label = ClassLabel.parse(true_label)
    if epoch_accuracy > 0.5:
        return true_label, True
    return true_label.other(), False


def subject_prediction(epoch_predictions: Sequence, true_label) -> tuple[ClassLabel, float, bool]:
    """Return ``(predicted_label, epoch_accuracy, correct)`` for one held-out subject."""
    if len(epoch_predictions) == 0:
        raise EmptyPredictions("no epoch predictions for subject")
    true_label = ClassLabel.parse(true_label)
    preds = np.array([int(ClassLabel.parse(p)) for p in epoch_predictions])
    accuracy = float(np.mean(preds == int(true_label)))
    predicted, correct = prediction_from_accuracy(accuracy, true_label)
    return predicted, accuracy, correct


def fold_seed(base_seed: int, subject_id: str) -> int:
    """Seed keyed by subject identity, so results do not depend on manifest order."""
    digest = hashlib.sha256(f"{int(base_seed)}:{subject_id}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def split_fold(fold: Fold, images: Sequence[ForgedImage]) -> tuple[list[ForgedImage], list[ForgedImage]]:
    """Partition by provenance; raises if a test-subject image would leak into training."""
    train_ids = set(fold.train_subject_ids)
    train_set = [im for im in images if im.subject_id in train_ids]
    test_set = [im for im in images if im.subject_id == fold.test_subject_id]
    leaked = [im for im in train_set if im.subject_id == fold.test_subject_id]
    if leaked:
        raise AssertionError(f"{len(leaked)} images of {fold.test_subject_id} in training data")
    return train_set, test_set


def _as_arrays(images: Sequence[ForgedImage]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([im.planes for im in images]).astype(np.float32, copy=False)
    y = np.array([int(im.label) for im in images], dtype=np.int64)
    return x, y


def _run_fold(fold: Fold, label: ClassLabel, images: Sequence[ForgedImage],
              train_cfg: TrainConfig, base_seed: int) -> FoldResult:
    train_set, test_set = split_fold(fold, images)
    if not test_set:
        raise EmptyPredictions(f"no images for test subject {fold.test_subject_id}")
    x_train, y_train = _as_arrays(train_set)
    x_test, y_test = _as_arrays(test_set)
    seed = fold_seed(base_seed, fold.test_subject_id)
    cfg = TrainConfig(**{**train_cfg.__dict__, "seed": seed})
    model = build_paper_cnn(seed, x_train.shape[1:])
    model, history = train(model, x_train, y_train, cfg)
    train_loss, train_acc = evaluate(model, x_train, y_train)
    test_loss, _ = evaluate(model, x_test, y_test)
    classes, _ = predict(model, x_test)
    predicted, test_acc, correct = subject_prediction(classes, label)
    return FoldResult(fold.test_subject_id, label, train_loss, train_acc, test_loss, test_acc,
                      predicted, correct, history)


def losocv_on_images(m: DatasetManifest, images: Sequence[ForgedImage], train_cfg: TrainConfig,
                     base_seed: int = 0, n_jobs: int = 1) -> LosocvReport:
    """LOSOCV over already-forged images; one fresh network per fold."""
    labels = m.labels()
    folds = make_folds(m)

    def run(fold):
        try:
            return _run_fold(fold, labels[fold.test_subject_id], images, train_cfg, base_seed)
        except Exception as exc:
            raise FoldFailed(fold.test_subject_id, exc) from exc

    if n_jobs == 1:
        rows = []
        for i, fold in enumerate(folds, 1):
            rows.append(run(fold))
            log.info("fold %d/%d (%s): test acc %.4f", i, len(folds), fold.test_subject_id, rows[-1].test_acc)
    else:
        from joblib import Parallel, delayed

        rows = Parallel(n_jobs=n_jobs)(delayed(run)(fold) for fold in folds)
    return LosocvReport(rows)


def forge_recording(r: Recording, epoch_seconds: float, forge_cfg: ForgeConfig) -> list[ForgedImage]:
    return [forge_epoch(e, forge_cfg, r.sample_rate_hz) for e in epoch_recording(r, epoch_seconds)]


def run_losocv(m: DatasetManifest, forge_cfg: ForgeConfig, train_cfg: TrainConfig, base_seed: int = 0,
               load: Callable[..., Recording] | None = None,
               preprocess: Callable[[Recording], Recording] | None = None,
               n_jobs: int = 1) -> LosocvReport:
    """Full harness: load every recording, forge its epochs, then cross-validate.

    ``load(entry)`` defaults to reading the manifest path by extension
    (``.bdf`` or raw tensor).
    """
    if load is None:
        from .config import load_entry as load
    make_folds(m)
    images: list[ForgedImage] = []
    for entry in m.entries:
        try:
            rec = load(entry)
            if preprocess is not None:
                rec = preprocess(rec)
            images.extend(forge_recording(rec, m.epoch_seconds, forge_cfg))
        except Exception as exc:
            raise FoldFailed(entry.subject_id, exc) from exc
        log.info("forged %s", entry.subject_id)
    return losocv_on_images(m, images, train_cfg, base_seed, n_jobs)


# --------------------------------------------------------------------------
# rendering
# --------------------------------------------------------------------------

def render_report(r: LosocvReport) -> tuple[str, str]:
    """Return ``(text_table, csv_text)``; both end with an Average row."""
    lines = [f"{'Type':<5}{'Subject':<12}{'Train Loss':>11}{'Train Acc (%)':>15}"
             f"{'Test Loss':>11}{'Test Acc (%)':>14}{'Pred.':>7}"]
    for row in r.rows:
        lines.append(f"{row.label.name:<5}{row.subject_id:<12}{row.train_loss:>11.3f}{100 * row.train_acc:>15.2f}"
                     f"{row.test_loss:>11.3f}{100 * row.test_acc:>14.2f}{row.predicted_label.name:>7}")
    lines.append(f"{'Average':<17}{r.mean_train_loss:>11.3f}{100 * r.mean_train_acc:>15.2f}"
                 f"{r.mean_test_loss:>11.3f}{100 * r.mean_test_acc:>14.2f}"
                 f"{f'{100 * r.subject_accuracy:.2f} (%)':>12}")

    def num(v):
        return repr(float(v))

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_HEADER)
    for row in r.rows:
        writer.writerow([row.subject_id, row.label.name, num(row.train_loss), num(row.train_acc),
                         num(row.test_loss), num(row.test_acc), row.predicted_label.name, int(row.correct)])
    writer.writerow(["Average", "", num(r.mean_train_loss), num(r.mean_train_acc),
                     num(r.mean_test_loss), num(r.mean_test_acc), "", num(r.subject_accuracy)])
    return "\n".join(lines) + "\n", buf.getvalue()


def parse_report_csv(text: str) -> LosocvReport:
    """Inverse of the CSV half of :func:`render_report` (the Average row is recomputed)."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames != REPORT_HEADER:
        raise ValueError(f"unexpected report header {reader.fieldnames}")
    rows = []
    for rec in reader:
        if rec["subject_id"] == "Average":
            break
        rows.append(FoldResult(
            rec["subject_id"], ClassLabel.parse(rec["label"]),
            float(rec["train_loss"]), float(rec["train_acc"]),
            float(rec["test_loss"]), float(rec["test_acc"]),
            ClassLabel.parse(rec["pred"]), bool(int(rec["correct"])),
        ))
    return LosocvReport(rows)


def write_report(r: LosocvReport, path, seed: int | None = None) -> str:
    text, csv_text = render_report(r)
    header = f"# seed={seed}\n" if seed is not None else ""
    Path(path).write_text(header + csv_text)
    return text


def report_from_table(rows: Sequence[tuple[str, str, float, float, float, float]]) -> LosocvReport:
    """Build a report from published-style rows ``(subject, label, train_loss, train_acc%, test_loss, test_acc%)``."""
    out = []
    for sid, label, tr_loss, tr_acc, te_loss, te_acc in rows:
        label = ClassLabel.parse(label)
        pred, correct = prediction_from_accuracy(te_acc / 100, label)
        out.append(FoldResult(sid, label, tr_loss, tr_acc / 100, te_loss, te_acc / 100, pred, correct))
    return LosocvReport(out)

