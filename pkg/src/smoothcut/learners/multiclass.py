"""K-class linear classification from pairwise John-center learners."""
from __future__ import annotations

from typing import Optional

import numpy as np

from .base import OnlineLearner, UpdateReport, as_context
from .john import JohnLinearClassifier


class KClassClassifier(OnlineLearner):
    """One binary learner per class pair ``i < j``; classes are ``1..K``.

    The pair ``(i, j)`` answers +1 when it believes ``i`` beats ``j``.
    The prediction is the smallest ``i`` that beats every ``j > i``
    (``K`` when no smaller class qualifies). On a mistake exactly one
    pair receives an error update.

    Passing ``M`` to :meth:`predict_one` / :meth:`update` restricts both
    prediction and the choice of pair to classes ``1..M``; this is the
    supervised variant where the caller guarantees ``y <= M``.
    """

    def __init__(self, n_classes: int = 2, dormant: bool = False, tol: float = 1e-8,
                 gap: float = 1e-6, floor: float = 1e-10, prune_factor: int = 8):
        self.n_classes = n_classes
        self.dormant = dormant
        self.tol = tol
        self.gap = gap
        self.floor = floor
        self.prune_factor = prune_factor

    def _init_state(self, n_features: int) -> None:
        K = int(self.n_classes)
        if K < 1:
            raise ValueError("n_classes must be >= 1")
        self.n_features_in_ = int(n_features)
        self.pairs_: dict[tuple[int, int], JohnLinearClassifier] = {}
        for i in range(1, K + 1):
            for j in range(i + 1, K + 1):
                pair = JohnLinearClassifier(self.tol, self.gap, self.floor,
                                            self.prune_factor, dormant=self.dormant)
                pair._init_state(self.n_features_in_)
                self.pairs_[(i, j)] = pair
        self.n_rounds_ = 0
        self.n_mistakes_ = 0
        self.binary_updates_: dict[tuple[int, int], int] = {key: 0 for key in self.pairs_}

    def _limit(self, M: Optional[int]) -> int:
        K = int(self.n_classes)
        if M is None:
            return K
        M = int(M)
        if not 1 <= M <= K:
            raise ValueError(f"M must lie in [1, {K}], got {M}")
        return M

    def pair_predictions(self, x, M: Optional[int] = None) -> dict[tuple[int, int], int]:
        self._ensure_state(x)
        M = self._limit(M)
        return {(i, j): p.predict_one(x) for (i, j), p in self.pairs_.items() if j <= M}

    def predict_one(self, x, M: Optional[int] = None) -> int:
        self._ensure_state(x)
        M = self._limit(M)
        x = np.asarray(x, dtype=float)
        for i in range(1, M):
            if all(self.pairs_[(i, j)].predict_one(x) == 1 for j in range(i + 1, M + 1)):
                return i
        return M

    def select_pair(self, x, y: int, y_hat: int, M: Optional[int] = None) -> tuple[int, int]:
        """The pair charged with a mistake, smallest qualifying ``j`` first."""
        M = self._limit(M)
        if y < y_hat:
            for j in range(y + 1, M + 1):
                if self.pairs_[(y, j)].predict_one(x) == -1:
                    return y, j
            raise RuntimeError("no pair disqualifies the true class; prediction rule broken")
        return y_hat, y

    @property
    def log_volume_(self) -> float:
        return float(sum(p.log_volume_ for p in self.pairs_.values()))

    def update(self, x, y, M: Optional[int] = None) -> UpdateReport:
        x = as_context(x, getattr(self, "n_features_in_", None), self._max_norm)
        self._ensure_state(x)
        y = int(y)
        M = self._limit(M)
        if not 1 <= y <= M:
            raise ValueError(f"label {y} outside 1..{M}")
        self.n_rounds_ += 1
        y_hat = self.predict_one(x, M)
        if y_hat == y:
            return UpdateReport(y_hat, y, False, False, self.log_volume_,
                                {"pair": None, "binary_updates": 0})
        self.n_mistakes_ += 1
        i, j = self.select_pair(x, y, y_hat, M)
        label = 1 if y_hat > y else -1
        rep = self.pairs_[(i, j)].error_update(x, label)
        self.binary_updates_[(i, j)] += 1
        return UpdateReport(y_hat, y, True, rep.recomputed, self.log_volume_,
                            {"pair": (i, j), "binary_label": label, "binary_updates": 1,
                             "activated": rep.extras.get("activated", False)})
