from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..errors import BadLabel
from .model import build_paper_cnn
from .train import TrainConfig, evaluate, predict_proba, train


class ForgedCnnClassifier(ClassifierMixin, BaseEstimator):
    """Scikit-learn wrapper around the from-scratch CNN.

    ``X`` is (n_images, 3, H, W); ``y`` holds 0 (HC) / 1 (PD). The network's
    first FC layer is sized from the image shape seen in ``fit``.

    Attributes
    ----------
    model_ : CnnModel
    history_ : History
        Per training-epoch loss and running accuracy.
    classes_ : ndarray
    """

    def __init__(self, lr=1e-4, epochs=30, batch_size=150, l2_coeff=0.01, random_state=0):
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.l2_coeff = l2_coeff
        self.random_state = random_state

    def _train_config(self) -> TrainConfig:
        return TrainConfig(self.lr, self.epochs, self.batch_size, self.l2_coeff, self.random_state)

    @staticmethod
    def _check_images(X):
        X = check_array(X, allow_nd=True, dtype=np.float32)
        if X.ndim != 4 or X.shape[1] != 3:
            raise ValueError(f"expected images shaped (n, 3, H, W), got {X.shape}")
        return X

    def fit(self, X, y):
        X = self._check_images(X)
        y = np.asarray(y).astype(np.int64)
        if y.shape != (X.shape[0],):
            raise ValueError(f"{X.shape[0]} images but y has shape {y.shape}")
        if np.any((y < 0) | (y > 1)):
            raise BadLabel("labels must be 0 (HC) or 1 (PD)")
        self.classes_ = np.array([0, 1])
        self.model_ = build_paper_cnn(self.random_state, X.shape[1:])
        _, self.history_ = train(self.model_, X, y, self._train_config())
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        return predict_proba(self.model_, self._check_images(X))

    def predict(self, X):
        return self.predict_proba(X).argmax(axis=1)

    def score_loss(self, X, y) -> tuple[float, float]:
        """Mean cross-entropy and accuracy on ``(X, y)``."""
        check_is_fitted(self, "model_")
        return evaluate(self.model_, self._check_images(X), y)
