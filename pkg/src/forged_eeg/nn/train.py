from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyDataset
from .layers import softmax, softmax_ce
from .model import CnnModel
from .optim import AdamState, adam_step


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    epochs: int = 30
    batch_size: int = 150
    l2_coeff: float = 0.01
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr < 0 or self.l2_coeff < 0:
            raise ValueError("lr and l2_coeff must be non-negative")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")


@dataclass
class History:
    """Per training-epoch mean data loss (L2 term excluded) and running accuracy."""

    loss: list[float] = field(default_factory=list)
    accuracy: list[float] = field(default_factory=list)


def train(model: CnnModel, images: np.ndarray, labels, cfg: TrainConfig = TrainConfig()) -> tuple[CnnModel, History]:
    """Minibatch Adam on softmax cross-entropy; updates ``model`` in place.

    Each pass shuffles with a generator seeded by ``cfg.seed``; given the
    seed the whole run is deterministic.
    """
    images = np.asarray(images)
    labels = np.asarray(labels, dtype=np.int64)
    n = images.shape[0]
    if n == 0:
        raise EmptyDataset("no training images")
    if labels.shape != (n,):
        raise ValueError(f"{n} images but labels of shape {labels.shape}")
    rng = np.random.default_rng(cfg.seed)
    state = AdamState(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    params = model.params
    mask = model.decay_mask
    history = History()
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            logits = model.logits(images[idx], keep=True)
            loss, grad = softmax_ce(logits, labels[idx])
            model.backward(grad)
            adam_step(params, model.grads, state, cfg.l2_coeff, mask)
            loss_sum += loss * idx.size
            correct += int(np.sum(logits.argmax(axis=1) == labels[idx]))
        history.loss.append(loss_sum / n)
        history.accuracy.append(correct / n)
    return model, history


def predict_proba(model: CnnModel, images: np.ndarray, batch_size: int = 64) -> np.ndarray:
    images = np.asarray(images)
    out = [softmax(model.logits(images[i:i + batch_size])) for i in range(0, images.shape[0], batch_size)]
    return np.concatenate(out) if out else np.zeros((0, 2), dtype=model.dtype)


def predict(model: CnnModel, images: np.ndarray, batch_size: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(classes, probabilities)``."""
    proba = predict_proba(model, images, batch_size)
    return proba.argmax(axis=1), proba


def evaluate(model: CnnModel, images: np.ndarray, labels, batch_size: int = 64) -> tuple[float, float]:
    """Mean cross-entropy and accuracy over a dataset, without updating the model."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise EmptyDataset("no evaluation images")
    loss_sum = 0.0
    correct = 0
    for i in range(0, labels.size, batch_size):
        logits = model.logits(np.asarray(images[i:i + batch_size]))
        loss, _ = softmax_ce(logits, labels[i:i + batch_size])
        loss_sum += loss * logits.shape[0]
        correct += int(np.sum(logits.argmax(axis=1) == labels[i:i + batch_size]))
    return loss_sum / labels.size, correct / labels.size
