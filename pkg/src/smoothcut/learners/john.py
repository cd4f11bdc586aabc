"""Cutting-plane classifiers that predict with the John ellipsoid center."""
from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import nnls

from ..convex_geometry import (
    BOX_TAG,
    Ellipsoid,
    HalfspacePolytope,
    InfeasibleOrDegenerate,
    log_unit_ball_volume,
    max_inscribed_ellipsoid,
    prune_redundant,
)
from .base import (
    NonRealizable,
    OnlineLearner,
    MapDeclarationError,
    UpdateReport,
    as_binary_label,
    as_context,
    sign,
)

CONE_RESIDUAL = 1e-12


def _unit_ball(d: int) -> Ellipsoid:
    c = np.zeros(d)
    B = np.eye(d)
    c.setflags(write=False)
    B.setflags(write=False)
    return Ellipsoid(c, B, log_unit_ball_volume(d))


class JohnLinearClassifier(OnlineLearner):
    """Halfspace learner through the origin driven by John-center cuts.

    The version space starts as the box ``[-1, 1]^d`` with ``w = e_1``.
    Every labelled example cuts the version space by
    ``<w, y x> >= 0``; on a mistake the classifier jumps to the center of
    the John ellipsoid of what is left.

    Parameters
    ----------
    tol, gap, floor : solver feasibility tolerance, log-det optimality gap
        and eigenvalue floor.
    prune_factor : LP pruning runs once the number of data cuts exceeds
        ``prune_factor * d`` (and afterwards twice the surviving count).
    dormant : predict +1 until the first :meth:`error_update`, which
        reinitializes the instance with ``w = e_1``.
    conic_filter : skip cuts already implied by earlier ones (a
        nonnegative combination of stored cut normals, checked by NNLS).
    """

    def __init__(self, tol: float = 1e-8, gap: float = 1e-6, floor: float = 1e-10,
                 prune_factor: int = 8, dormant: bool = False, conic_filter: bool = True):
        self.tol = tol
        self.gap = gap
        self.floor = floor
        self.prune_factor = prune_factor
        self.dormant = dormant
        self.conic_filter = conic_filter

    # state -------------------------------------------------------------
    def _init_state(self, n_features: int) -> None:
        d = int(n_features)
        self.n_features_in_ = d
        self.poly_ = HalfspacePolytope.box(d)
        self.coef_ = np.eye(d)[0].copy()
        self.ellipsoid_ = _unit_ball(d)
        self.log_volume_ = self.ellipsoid_.log_volume
        self.n_rounds_ = 0
        self.n_mistakes_ = 0
        self.n_recomputes_ = 0
        self.n_cuts_skipped_ = 0
        self.prune_threshold_ = self.prune_factor * d
        self.dormant_ = bool(self.dormant)
        self._cone = np.zeros((d, 0))

    @property
    def dim(self) -> int:
        return self.n_features_in_

    def boundary_(self) -> tuple[np.ndarray, float]:
        """Decision boundary ``<w, x> + b = 0`` in input coordinates."""
        return self.coef_.copy(), 0.0

    # prediction --------------------------------------------------------
    def decision_value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        self._ensure_state(x)
        return float(self.coef_ @ x)

    def predict_one(self, x) -> int:
        self._ensure_state(x)
        if self.dormant_:
            return 1
        return 1 if float(self.coef_ @ np.asarray(x, dtype=float)) >= 0 else -1

    # updates -----------------------------------------------------------
    def update(self, x, y) -> UpdateReport:
        """Cut by the example; recompute the John center on a mistake."""
        x = as_context(x, getattr(self, "n_features_in_", None), self._max_norm)
        y = as_binary_label(y)
        self._ensure_state(x)
        self.n_rounds_ += 1
        y_hat = self.predict_one(x)
        mistake = y_hat != y
        self._add_cut(-y * x)
        recomputed = False
        if mistake:
            self.n_mistakes_ += 1
            self._recompute()
            recomputed = True
        return UpdateReport(y_hat, y, mistake, recomputed, self.log_volume_)

    def error_update(self, x, y) -> UpdateReport:
        """Cut and recompute unconditionally (used by the K-class reduction)."""
        x = as_context(x, getattr(self, "n_features_in_", None), self._max_norm)
        y = as_binary_label(y)
        self._ensure_state(x)
        self.n_rounds_ += 1
        self.n_mistakes_ += 1
        y_hat = self.predict_one(x)
        if self.dormant_:
            d = self.n_features_in_
            self._init_state(d)
            self.dormant_ = False
            self.n_rounds_ = self.n_mistakes_ = 1
            self._add_cut(-y * x)
            return UpdateReport(y_hat, y, True, False, self.log_volume_,
                                {"activated": True})
        self._add_cut(-y * x)
        self._recompute()
        return UpdateReport(y_hat, y, True, True, self.log_volume_)

    def _add_cut(self, normal: np.ndarray) -> None:
        nrm = float(np.linalg.norm(normal))
        if nrm == 0.0:
            return
        a = normal / nrm
        if self.conic_filter and self._cone.shape[1] > 0:
            coef, _ = nnls(self._cone, a)
            # recompute the residual: the one nnls reports is not always accurate
            resid = float(np.linalg.norm(self._cone @ coef - a))
            if resid <= CONE_RESIDUAL:
                self.n_cuts_skipped_ += 1
                return
        self.poly_ = self.poly_.cut(a, 0.0, self.n_rounds_)
        self._cone = np.column_stack([self._cone, a])
        n_data = self.poly_.n_constraints - 2 * self.n_features_in_
        if n_data > self.prune_threshold_:
            self._prune()

    def _prune(self) -> None:
        d = self.n_features_in_
        self.poly_ = prune_redundant(self.poly_)
        data = self.poly_.tags != BOX_TAG
        self._cone = self.poly_.normals[data].T.copy()
        self.prune_threshold_ = max(self.prune_factor * d, 2 * int(np.sum(data)))

    def _recompute(self) -> None:
        try:
            try:
                E = max_inscribed_ellipsoid(self.poly_, tol=self.tol, gap=self.gap,
                                            floor=self.floor, warm=self.ellipsoid_)
            except InfeasibleOrDegenerate:
                # the warm start is only a preconditioner; retry without it
                E = max_inscribed_ellipsoid(self.poly_, tol=self.tol, gap=self.gap,
                                            floor=self.floor)
        except InfeasibleOrDegenerate as err:
            raise NonRealizable(f"version space collapsed: {err}",
                                round=self.n_rounds_) from err
        self.ellipsoid_ = E
        self.coef_ = np.array(E.center)
        self.log_volume_ = E.log_volume
        self.n_recomputes_ += 1


def affine_lift(x, z: float) -> np.ndarray:
    """Map ``x`` to ``z * (x, 1) / 4``; ``z`` should lie in [1, 2]."""
    x = np.asarray(x, dtype=float).reshape(-1)
    return z * np.append(x, 1.0) / 4.0


class AffineLiftClassifier(OnlineLearner):
    """Affine halfspaces ``sign(<w, x> + b)`` via a randomized lift.

    Each context is mapped to ``z (x, 1) / 4`` with ``z ~ Unif(1, 2)`` and
    fed to a :class:`JohnLinearClassifier` in one more dimension.
    """

    def __init__(self, random_state=None, tol: float = 1e-8, gap: float = 1e-6,
                 floor: float = 1e-10, prune_factor: int = 8):
        self.random_state = random_state
        self.tol = tol
        self.gap = gap
        self.floor = floor
        self.prune_factor = prune_factor

    def _init_state(self, n_features: int) -> None:
        self.n_features_in_ = int(n_features)
        self.rng_ = np.random.default_rng(self.random_state)
        self.inner_ = JohnLinearClassifier(self.tol, self.gap, self.floor, self.prune_factor)
        self.inner_._init_state(self.n_features_in_ + 1)

    def wrap(self, x, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        rng = rng if rng is not None else self.rng_
        return affine_lift(x, rng.uniform(1.0, 2.0))

    def predict_one(self, x) -> int:
        self._ensure_state(x)
        w = self.inner_.coef_
        return sign(float(w[:-1] @ np.asarray(x, dtype=float)) + float(w[-1]))

    def update(self, x, y) -> UpdateReport:
        x = as_context(x, getattr(self, "n_features_in_", None), 1.0)
        self._ensure_state(x)
        return self.inner_.update(self.wrap(x), y)

    def boundary_(self) -> tuple[np.ndarray, float]:
        w = self.inner_.coef_
        return w[:-1].copy(), float(w[-1])

    @property
    def log_volume_(self) -> float:
        return self.inner_.log_volume_

    @property
    def n_mistakes_(self) -> int:
        return self.inner_.n_mistakes_


class CoordinateFeatureClassifier(OnlineLearner):
    """John-center learner on coordinatewise features ``(phi_1(x_1), ..., phi_d(x_d))``.

    ``maps`` is one callable applied to every coordinate or a sequence of
    callables, each increasing on [-1, 1] with derivative at least
    ``alpha`` and range inside [-1, 1]. The declaration is probed on a
    grid when the learner is initialised.
    """

    def __init__(self, maps=None, alpha: float = 1.0, n_probe: int = 1000,
                 tol: float = 1e-8, gap: float = 1e-6, floor: float = 1e-10,
                 prune_factor: int = 8):
        self.maps = maps
        self.alpha = alpha
        self.n_probe = n_probe
        self.tol = tol
        self.gap = gap
        self.floor = floor
        self.prune_factor = prune_factor

    def _maps_for(self, d: int) -> list[Callable]:
        if self.maps is None:
            return [lambda u: u] * d
        if callable(self.maps):
            return [self.maps] * d
        maps = list(self.maps)
        if len(maps) != d:
            raise ValueError(f"{len(maps)} coordinate maps for {d} coordinates")
        return maps

    def _init_state(self, n_features: int) -> None:
        d = int(n_features)
        maps = self._maps_for(d)
        for i, f in enumerate(maps):
            probe_coordinate_map(f, self.alpha, self.n_probe, name=f"coordinate {i}")
        self.n_features_in_ = d
        self.maps_ = maps
        self.inner_ = JohnLinearClassifier(self.tol, self.gap, self.floor, self.prune_factor)
        self.inner_._init_state(d)

    def wrap(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        self._ensure_state(x)
        return np.array([float(f(v)) for f, v in zip(self.maps_, x)])

    def predict_one(self, x) -> int:
        return self.inner_.predict_one(self.wrap(x))

    def update(self, x, y) -> UpdateReport:
        x = as_context(x, getattr(self, "n_features_in_", None), 1.0)
        phi = self.wrap(x)
        # the inner learner works on phi(x), which may leave the unit ball
        return _update_unbounded(self.inner_, phi, y)

    @property
    def log_volume_(self) -> float:
        return self.inner_.log_volume_


def _update_unbounded(inner: JohnLinearClassifier, phi: np.ndarray, y) -> UpdateReport:
    saved = inner._max_norm
    inner._max_norm = None
    try:
        return inner.update(phi, y)
    finally:
        inner._max_norm = saved


def probe_coordinate_map(f: Callable, alpha: float, n_probe: int = 1000,
                         name: str = "map") -> None:
    """Check on a grid that ``f`` has slope >= alpha and stays in [-1, 1]."""
    if not alpha > 0:
        raise MapDeclarationError(f"{name}: alpha must be positive")
    grid = np.linspace(-1.0, 1.0, int(n_probe))
    vals = np.array([float(f(u)) for u in grid])
    if np.any(np.abs(vals) > 1.0 + 1e-12):
        raise MapDeclarationError(f"{name}: range leaves [-1, 1] (max |phi| = {np.max(np.abs(vals)):.6g})")
    slopes = np.diff(vals) / np.diff(grid)
    # a secant slope is an average of the derivative, so a dip below alpha
    # on the grid is a certificate of violation (up to rounding)
    worst = float(np.min(slopes))
    if worst < alpha * (1.0 - 1e-9):
        raise MapDeclarationError(f"{name}: slope {worst:.6g} below declared alpha {alpha:.6g}")


class MonomialFeatures:
    """All monomials of degree <= ``degree`` in ``d`` variables, scaled into the unit ball.

    The constant monomial is included, so affine and polynomial
    boundaries are both linear in feature space.
    """

    def __init__(self, d: int, degree: int):
        self.d = int(d)
        self.degree = int(degree)
        exps = []

        def rec(prefix, remaining, i):
            if i == self.d:
                exps.append(tuple(prefix))
                return
            for e in range(remaining + 1):
                rec(prefix + [e], remaining - e, i + 1)

        rec([], self.degree, 0)
        exps.sort(key=lambda e: (sum(e), [-v for v in e]))
        self.exponents = np.array(exps, dtype=int)
        self.n_output_features = len(exps)
        self._scale = 1.0 / math.sqrt(self.n_output_features)

    def get_params(self, deep: bool = True) -> dict:
        return {"d": self.d, "degree": self.degree}

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        return self._scale * np.prod(x[None, :] ** self.exponents, axis=1)


class PolynomialMetaPointClassifier(OnlineLearner):
    """Polynomial-boundary classifier with delayed, batched recomputes.

    Predicts ``sign(<w, phi(x)>)`` and cuts the version space in feature
    space on every round. Misclassified feature vectors are collected per
    label; when either bucket holds ``p`` of them their average (the
    meta-point) is formed, the John center is recomputed and both buckets
    are emptied.

    ``p`` defaults to ``ceil(C m ell log(L ell T / delta))`` with ``m`` the
    feature dimension, ``ell`` the degree and ``L`` the Lipschitz constant.
    """

    def __init__(self, features=None, degree: int = 2, lipschitz: float = 1.0,
                 horizon: int = 10_000, delta: float = 0.05, C: float = 2.0,
                 p: Optional[int] = None, tol: float = 1e-8, gap: float = 1e-6,
                 floor: float = 1e-10, prune_factor: int = 8):
        self.features = features
        self.degree = degree
        self.lipschitz = lipschitz
        self.horizon = horizon
        self.delta = delta
        self.C = C
        self.p = p
        self.tol = tol
        self.gap = gap
        self.floor = floor
        self.prune_factor = prune_factor

    def bucket_capacity(self, m: int) -> int:
        if self.p is not None:
            return int(self.p)
        ell = max(int(self.degree), 1)
        arg = max(self.lipschitz * ell * self.horizon / self.delta, math.e)
        return int(math.ceil(self.C * m * ell * math.log(arg)))

    def _init_state(self, n_features: int) -> None:
        self.n_features_in_ = int(n_features)
        phi = self.features if self.features is not None else MonomialFeatures(n_features, self.degree)
        self.features_ = phi
        m = int(np.asarray(phi(np.zeros(n_features))).reshape(-1).shape[0])
        self.n_output_features_ = m
        self.p_ = self.bucket_capacity(m)
        if self.p_ < 1:
            raise ValueError("bucket capacity p must be positive")
        self.inner_ = JohnLinearClassifier(self.tol, self.gap, self.floor, self.prune_factor)
        self.inner_._init_state(m)
        self.bucket_pos_: list[np.ndarray] = []
        self.bucket_neg_: list[np.ndarray] = []
        self.meta_points_: list[tuple[np.ndarray, int]] = []
        self.n_mistakes_ = 0

    def predict_one(self, x) -> int:
        self._ensure_state(x)
        return self.inner_.predict_one(np.asarray(self.features_(x), dtype=float))

    def update(self, x, y) -> UpdateReport:
        x = as_context(x, getattr(self, "n_features_in_", None), 1.0)
        y = as_binary_label(y)
        self._ensure_state(x)
        phi = np.asarray(self.features_(x), dtype=float)
        inner = self.inner_
        inner.n_rounds_ += 1
        y_hat = inner.predict_one(phi)
        mistake = y_hat != y
        inner._add_cut(-y * phi)
        if mistake:
            self.n_mistakes_ += 1
            inner.n_mistakes_ += 1
            (self.bucket_pos_ if y == 1 else self.bucket_neg_).append(phi)
        recomputed = False
        extras = {}
        if max(len(self.bucket_pos_), len(self.bucket_neg_)) == self.p_:
            full, label = ((self.bucket_pos_, 1) if len(self.bucket_pos_) == self.p_
                           else (self.bucket_neg_, -1))
            meta = np.mean(np.vstack(full), axis=0)
            self.meta_points_.append((meta, label))
            extras["meta_point"] = meta
            extras["meta_label"] = label
            inner._recompute()
            recomputed = True
            self.bucket_pos_ = []
            self.bucket_neg_ = []
        return UpdateReport(y_hat, y, mistake, recomputed, inner.log_volume_, extras)

    @property
    def log_volume_(self) -> float:
        return self.inner_.log_volume_
