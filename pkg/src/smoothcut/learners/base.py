"""Shared pieces of the online learner contract."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array

NORM_SLACK = 1e-12


class NonRealizable(RuntimeError):
    """A cutting-plane learner's version space collapsed.

    Raised when the labels seen so far are inconsistent with every
    classifier in the learner's class (or numerically indistinguishable
    from that). ``round`` is the 1-based round index when known.
    """

    def __init__(self, message: str, round: int | None = None):
        super().__init__(message if round is None else f"round {round}: {message}")
        self.detail = message
        self.round = round


class InvalidDistribution(ValueError):
    """The inverse-gap weights do not form a probability vector."""


class MapDeclarationError(ValueError):
    """A user-supplied feature map breaks its declared contract."""


@dataclass
class UpdateReport:
    """What happened on one call to ``update``."""

    prediction: Any
    label: Any
    mistake: bool
    recomputed: bool = False
    log_volume: float = float("nan")
    extras: dict = field(default_factory=dict)


def sign(v: float) -> int:
    """Sign with the convention sign(0) = +1."""
    return 1 if v >= 0 else -1


def as_context(x, n_features: int | None = None, max_norm: float | None = 1.0) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if n_features is not None and x.shape[0] != n_features:
        raise ValueError(f"context has {x.shape[0]} features, expected {n_features}")
    if max_norm is not None and float(x @ x) > (max_norm + NORM_SLACK) ** 2:
        raise ValueError(f"context norm {np.linalg.norm(x):.6g} exceeds {max_norm}")
    return x


def as_binary_label(y) -> int:
    y = int(y)
    if y not in (-1, 1):
        raise ValueError(f"binary labels must be -1 or +1, got {y}")
    return y


class OnlineLearner(BaseEstimator):
    """Batch conveniences layered on ``predict_one`` and ``update``.

    Subclasses implement ``_init_state(n_features)``, ``predict_one`` and
    ``update``; fitted state lives in attributes with a trailing underscore.
    """

    _max_norm: float | None = 1.0

    def _ensure_state(self, x) -> None:
        if not hasattr(self, "n_features_in_"):
            self._init_state(int(np.asarray(x).reshape(-1).shape[0]))

    def _init_state(self, n_features: int) -> None:  # pragma: no cover - abstract
        raise NotImplementedError

    def reset(self):
        for key in [k for k in vars(self) if k.endswith("_") and not k.startswith("__")]:
            delattr(self, key)
        return self

    def partial_fit(self, X, y):
        X = check_array(X, ensure_2d=True, dtype=float)
        y = np.asarray(y)
        if y.shape[0] != X.shape[0]:
            raise ValueError("X and y have different lengths")
        for xi, yi in zip(X, y):
            self.update(xi, yi.item() if hasattr(yi, "item") else yi)
        return self

    def fit(self, X, y):
        self.reset()
        return self.partial_fit(X, y)

    def predict(self, X) -> np.ndarray:
        X = check_array(X, ensure_2d=True, dtype=float)
        return np.array([self.predict_one(xi) for xi in X])
