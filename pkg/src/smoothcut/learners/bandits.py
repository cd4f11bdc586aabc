"""Contextual bandits by inverse gap weighting over per-action regressors."""
from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np
from sklearn.base import BaseEstimator

from .base import InvalidDistribution
from .piecewise import PiecewiseRegressor


def igw_probabilities(predictions, gamma: float, mu: float) -> tuple[np.ndarray, int]:
    """Action distribution from predicted losses; returns (p, greedy index)."""
    yhat = np.asarray(predictions, dtype=float)
    if not (gamma > 0 and mu > 0):
        raise InvalidDistribution("gamma and mu must be positive")
    b = int(np.argmin(yhat))
    p = 1.0 / (mu + gamma * (yhat - yhat[b]))
    p[b] = 0.0
    p[b] = 1.0 - float(np.sum(p))
    if p[b] < 0:
        raise InvalidDistribution(
            f"greedy action gets mass {p[b]:.3g} < 0 (mu={mu} is below the action count?)")
    return p, b


class IGWBandit(BaseEstimator):
    """Inverse-gap-weighted exploration on top of one regressor per action.

    Losses are predicted by ``n_actions`` independent online regressors
    (piecewise-linear by default). ``gamma_schedule='sqrt_t'`` uses the
    learning rate ``gamma * sqrt(A t)`` at round ``t``; ``'constant'``
    keeps ``gamma`` fixed. ``mu`` defaults to the number of actions.
    """

    def __init__(self, n_actions: int = 3, gamma: float = 10.0, mu: Optional[float] = None,
                 gamma_schedule: str = "constant", n_pieces: int = 2,
                 regressor_factory: Optional[Callable] = None):
        self.n_actions = n_actions
        self.gamma = gamma
        self.mu = mu
        self.gamma_schedule = gamma_schedule
        self.n_pieces = n_pieces
        self.regressor_factory = regressor_factory

    def _ensure_state(self) -> None:
        if hasattr(self, "regressors_"):
            return
        if self.gamma_schedule not in ("constant", "sqrt_t"):
            raise ValueError(f"unknown gamma_schedule {self.gamma_schedule!r}")
        make = self.regressor_factory or (lambda: PiecewiseRegressor(n_pieces=self.n_pieces))
        self.regressors_ = [make() for _ in range(int(self.n_actions))]
        self.mu_ = float(self.n_actions if self.mu is None else self.mu)
        self.t_ = 0

    def gamma_at(self, t: int) -> float:
        if self.gamma_schedule == "sqrt_t":
            return float(self.gamma) * math.sqrt(int(self.n_actions) * max(t, 1))
        return float(self.gamma)

    def predict_losses(self, x) -> np.ndarray:
        self._ensure_state()
        return np.array([r.predict_one(x) for r in self.regressors_])

    def probabilities(self, x, t: Optional[int] = None) -> tuple[np.ndarray, int]:
        self._ensure_state()
        t = self.t_ + 1 if t is None else t
        return igw_probabilities(self.predict_losses(x), self.gamma_at(t), self.mu_)

    def decide(self, x, rng: np.random.Generator) -> tuple[int, np.ndarray]:
        """Sample an action; returns (action, probabilities)."""
        self._ensure_state()
        self.t_ += 1
        p, _ = igw_probabilities(self.predict_losses(x), self.gamma_at(self.t_), self.mu_)
        a = int(np.searchsorted(np.cumsum(p), rng.random() * np.sum(p), side="right"))
        return min(a, len(p) - 1), p

    def reward(self, x, action: int, loss: float):
        """Feed the observed loss to the chosen action's regressor only."""
        self._ensure_state()
        return self.regressors_[int(action)].update(x, loss)
