"""Perceptron and the naive consistent threshold strategy."""
from __future__ import annotations

import numpy as np

from .base import OnlineLearner, UpdateReport, as_binary_label, as_context


class Perceptron(OnlineLearner):
    """Additive-update halfspace learner through the origin, ``w_1 = e_1``.

    Never raises on non-realizable streams.
    """

    _max_norm = None

    def __init__(self):
        pass

    def _init_state(self, n_features: int) -> None:
        self.n_features_in_ = int(n_features)
        self.coef_ = np.eye(self.n_features_in_)[0].copy()
        self.n_mistakes_ = 0

    def predict_one(self, x) -> int:
        self._ensure_state(x)
        return 1 if float(self.coef_ @ np.asarray(x, dtype=float)) >= 0 else -1

    def step(self, x, y) -> dict:
        rep = self.update(x, y)
        return {"y_hat": rep.prediction, "mistake": rep.mistake}

    def update(self, x, y) -> UpdateReport:
        x = as_context(x, getattr(self, "n_features_in_", None), None)
        y = as_binary_label(y)
        self._ensure_state(x)
        y_hat = self.predict_one(x)
        mistake = y_hat != y
        if mistake:
            self.coef_ = self.coef_ + y * x
            self.n_mistakes_ += 1
        return UpdateReport(y_hat, y, mistake)

    def boundary_(self) -> tuple[np.ndarray, float]:
        return self.coef_.copy(), 0.0


class NaiveThresholdClassifier(OnlineLearner):
    """Consistent 1-D threshold learner that hugs the largest negative point.

    Predicts ``sign(x - lo - eta)`` while ``lo + eta < hi``, and otherwise
    thresholds at the midpoint of ``[lo, hi]``, where ``lo`` is the largest
    context labelled -1 so far (at least -1) and ``hi`` the smallest
    labelled +1 (at most 1).
    """

    def __init__(self, eta: float = 1e-3):
        self.eta = eta

    def _init_state(self, n_features: int) -> None:
        if int(n_features) != 1:
            raise ValueError("threshold learner needs scalar contexts")
        self.n_features_in_ = 1
        self.lo_ = -1.0
        self.hi_ = 1.0
        self.n_mistakes_ = 0

    def threshold_(self) -> float:
        if self.lo_ + self.eta < self.hi_:
            return self.lo_ + self.eta
        return 0.5 * (self.lo_ + self.hi_)

    def predict_one(self, x) -> int:
        self._ensure_state(x)
        return 1 if float(np.asarray(x).reshape(-1)[0]) - self.threshold_() >= 0 else -1

    def update(self, x, y) -> UpdateReport:
        x = as_context(x, 1, 1.0)
        y = as_binary_label(y)
        self._ensure_state(x)
        y_hat = self.predict_one(x)
        v = float(x[0])
        if y == -1:
            self.lo_ = max(self.lo_, v)
        else:
            self.hi_ = min(self.hi_, v)
        mistake = y_hat != y
        self.n_mistakes_ += int(mistake)
        return UpdateReport(y_hat, y, mistake)

    def boundary_(self) -> tuple[np.ndarray, float]:
        return np.array([1.0]), -self.threshold_()
