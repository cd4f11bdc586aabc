"""Online piecewise-linear regression through exact clustering."""
from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from ..erm_oracle import ErmInfeasible, erm_partition
from .base import OnlineLearner, UpdateReport, as_context
from .multiclass import KClassClassifier


class PiecewiseRegressor(OnlineLearner):
    """Predicts ``g_k(x)`` with ``k`` chosen by a supervised K-class learner.

    Pieces become known once the ERM oracle finds a cluster of at least
    ``ell + 1`` unexplained examples fitted by one function; until then
    examples wait in the uncertain set. Rounds whose label matches a
    known piece only train the classifier.

    Parameters
    ----------
    n_pieces : K, the maximum number of pieces.
    ell : determination number (defaults to the piece dimension).
    features : optional map applied before fitting pieces (polynomial pieces).
    fit_tol : relative tolerance for "g(x) equals y".
    """

    _max_norm = 1.0

    def __init__(self, n_pieces: int = 2, ell: Optional[int] = None,
                 features: Optional[Callable] = None, fit_tol: float = 1e-8,
                 dormant: bool = False, tol: float = 1e-8, gap: float = 1e-6,
                 floor: float = 1e-10, prune_factor: int = 8):
        self.n_pieces = n_pieces
        self.ell = ell
        self.features = features
        self.fit_tol = fit_tol
        self.dormant = dormant
        self.tol = tol
        self.gap = gap
        self.floor = floor
        self.prune_factor = prune_factor

    def _init_state(self, n_features: int) -> None:
        self.n_features_in_ = int(n_features)
        dim = self._phi(np.zeros(n_features)).shape[0]
        self.ell_ = dim if self.ell is None else int(self.ell)
        self.pieces_: list[np.ndarray] = []
        self.uncertain_: list[tuple[np.ndarray, float]] = []
        self.classifier_ = KClassClassifier(self.n_pieces, self.dormant, self.tol, self.gap,
                                            self.floor, self.prune_factor)
        self.classifier_._init_state(n_features)
        self.n_rounds_ = 0
        self.n_mistakes_ = 0
        self.n_undiscovered_mistakes_ = 0
        self.erm_input_sizes_: list[int] = []
        self.discovery_rounds_: list[int] = []

    def _phi(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        return x if self.features is None else np.asarray(self.features(x), dtype=float).reshape(-1)

    @property
    def n_known_(self) -> int:
        return len(self.pieces_)

    @property
    def log_volume_(self) -> float:
        return self.classifier_.log_volume_

    def _matches(self, value: float, y: float) -> bool:
        return abs(value - y) <= self.fit_tol * max(1.0, abs(y))

    def predict_piece(self, x) -> Optional[int]:
        """0-based index of the piece the classifier picks, or None if none known."""
        self._ensure_state(x)
        if not self.pieces_:
            return None
        return self.classifier_.predict_one(x, len(self.pieces_)) - 1

    def predict_one(self, x) -> float:
        k = self.predict_piece(x)
        if k is None:
            return 0.0
        return float(self.pieces_[k] @ self._phi(x))

    def step(self, x, y) -> tuple[float, UpdateReport]:
        rep = self.update(x, y)
        return rep.prediction, rep

    def update(self, x, y) -> UpdateReport:
        x = as_context(x, getattr(self, "n_features_in_", None), self._max_norm)
        self._ensure_state(x)
        y = float(y)
        self.n_rounds_ += 1
        phi = self._phi(x)
        k_hat = self.predict_piece(x)
        y_hat = 0.0 if k_hat is None else float(self.pieces_[k_hat] @ phi)
        mistake = not self._matches(y_hat, y)
        if mistake:
            self.n_mistakes_ += 1
        extras = {"n_known": len(self.pieces_), "erm_input_size": None,
                  "k_hat": k_hat, "k_star": None, "classifier_update": False}

        k_star = next((k for k, g in enumerate(self.pieces_) if self._matches(float(g @ phi), y)),
                      None)
        if k_star is not None:
            extras["k_star"] = k_star
            recomputed = False
            if k_hat != k_star:
                rep = self.classifier_.update(x, k_star + 1, len(self.pieces_))
                recomputed = rep.recomputed
                extras["classifier_update"] = True
            return UpdateReport(y_hat, y, mistake, recomputed, self.log_volume_, extras)

        if mistake:
            self.n_undiscovered_mistakes_ += 1
        extras["undiscovered"] = True
        pool = self.uncertain_ + [(x, y)]
        extras["erm_input_size"] = len(pool)
        self.erm_input_sizes_.append(len(pool))
        X_pool = np.vstack([p[0] for p in pool])
        y_pool = np.array([p[1] for p in pool])
        try:
            sol = erm_partition(X_pool, y_pool, int(self.n_pieces), self.ell_, self.fit_tol,
                                self.features)
        except ErmInfeasible as err:
            raise ErmInfeasible(str(err), round=self.n_rounds_) from err

        Phi = np.vstack([self._phi(p[0]) for p in pool])
        promoted = []
        for g, cluster in zip(sol.functions, sol.clusters):
            if len(cluster) >= self.ell_ + 1:
                # refit on the whole cluster; the exact fit makes this a no-op
                # up to rounding but averages away the subset's conditioning
                g = np.linalg.lstsq(Phi[cluster], y_pool[cluster], rcond=None)[0]
                self.pieces_.append(g)
                promoted.append(g)
                self.discovery_rounds_.append(self.n_rounds_)
        if promoted:
            self.uncertain_ = [
                p for p, ph in zip(pool, Phi)
                if not any(self._matches(float(g @ ph), p[1]) for g in promoted)
            ]
        else:
            self.uncertain_ = pool
        extras["n_known"] = len(self.pieces_)
        extras["promoted"] = len(promoted)
        return UpdateReport(y_hat, y, mistake, False, self.log_volume_, extras)
