"""Smoothed context samplers, label oracles and corruption schedules.

Every sampler draws from its current distribution with
``next_context(t, rng, learner)``; ``t`` is the 1-based round and
``learner`` (optional) lets adaptive samplers look at the learner's
decision boundary. Sampling never mutates adversary state; samplers that
also choose labels (``provides_labels``) update their state in
``label``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .convex_geometry import log_unit_ball_volume, sample_uniform_ball

LOWER_BOUND_EPS = 1.0 - math.exp(-1.0)


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("zero vector has no direction")
    return v / n


def random_unit_vector(d: int, rng: np.random.Generator) -> np.ndarray:
    return _unit(rng.standard_normal(d))


# ---------------------------------------------------------------------------
# center policies

class CenterPolicy:
    """Chooses where a local-noise adversary centers its next draw."""

    def center(self, t: int, rng: np.random.Generator, learner, radius: float, d: int) -> np.ndarray:
        raise NotImplementedError


class BoundaryTracker(CenterPolicy):
    """Aim at a random point of the learner's decision boundary.

    The boundary ``<w, x> + b = 0`` comes from ``learner.boundary_()``. The
    center is uniform along a random direction within the boundary,
    restricted to the ball of the given radius; if the boundary misses
    that ball the closest boundary point is pulled back onto it. Without a
    learner the center is uniform in the ball.
    """

    def center(self, t, rng, learner, radius, d):
        if learner is None or not hasattr(learner, "boundary_") or not hasattr(learner, "n_features_in_"):
            return radius * sample_uniform_ball(d, rng)
        w, b = learner.boundary_()
        w = np.asarray(w, dtype=float)
        ww = float(w @ w)
        if ww == 0.0:
            return radius * sample_uniform_ball(d, rng)
        p0 = -float(b) * w / ww
        n0 = float(np.linalg.norm(p0))
        if n0 >= radius:
            return p0 * (radius / n0)
        u = rng.standard_normal(d)
        u -= (u @ w) / ww * w
        nu = np.linalg.norm(u)
        if d == 1 or nu == 0.0:
            return p0
        u /= nu
        reach = math.sqrt(max(radius * radius - n0 * n0, 0.0))
        return p0 + reach * rng.uniform(-1.0, 1.0) * u


class UniformCenter(CenterPolicy):
    def center(self, t, rng, learner, radius, d):
        return radius * sample_uniform_ball(d, rng)


class FixedCenter(CenterPolicy):
    def __init__(self, point):
        self.point = np.asarray(point, dtype=float)

    def center(self, t, rng, learner, radius, d):
        n = np.linalg.norm(self.point)
        return self.point if n <= radius else self.point * (radius / n)


CENTER_POLICIES = {"boundary": BoundaryTracker, "uniform": UniformCenter}


def make_center_policy(choice) -> CenterPolicy:
    if isinstance(choice, CenterPolicy):
        return choice
    if choice is None:
        return BoundaryTracker()
    if isinstance(choice, str):
        if choice not in CENTER_POLICIES:
            raise ValueError(f"unknown center policy {choice!r}")
        return CENTER_POLICIES[choice]()
    return FixedCenter(choice)


# ---------------------------------------------------------------------------
# samplers

class Adversary:
    kind = "base"
    provides_labels = False
    sigma: float = 1.0
    sigma_dir: Optional[float] = None

    def __init__(self, d: int):
        if d < 1:
            raise ValueError("d must be >= 1")
        self.d = int(d)

    def next_context(self, t: int, rng: np.random.Generator, learner=None) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict:
        return {"kind": self.kind, "d": self.d, "sigma": self.sigma, "sigma_dir": self.sigma_dir}


class UniformAdversary(Adversary):
    """Contexts uniform on the unit ball (sigma = 1)."""

    kind = "uniform"

    def next_context(self, t, rng, learner=None):
        return sample_uniform_ball(self.d, rng)


class EpsBallAdversary(Adversary):
    """Uniform noise on an eps-ball around an adversarial center; sigma = eps^d.

    The center is shrunk into the ball of radius ``1 - eps`` so that the
    context stays in the unit ball; the noise itself is never rescaled.
    """

    kind = "eps_ball"

    def __init__(self, d: int, eps: float = 0.1, center=None):
        super().__init__(d)
        if not 0 < eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        self.eps = float(eps)
        self.policy = make_center_policy(center)
        self.sigma = self.eps ** self.d

    def next_context(self, t, rng, learner=None):
        c = self.policy.center(t, rng, learner, 1.0 - self.eps, self.d)
        return c + self.eps * sample_uniform_ball(self.d, rng)

    def params(self):
        return {**super().params(), "eps": self.eps, "center": type(self.policy).__name__}


class DirectionalLineAdversary(Adversary):
    """``x = center + a e`` with ``a ~ Unif[-r/2, r/2]`` along a fixed unit vector ``e``.

    Only the projection onto ``e`` is randomised, so the sampler is
    smooth in that direction (density of ``<x, e>`` at most ``1/r``)
    while having no density in R^d. Centers stay within
    ``center_radius`` of the origin (default 1/2).
    """

    kind = "directional_line"

    def __init__(self, d: int, r: float = 0.1, direction=None, direction_seed: int = 0,
                 center=None, center_radius: float = 0.5):
        super().__init__(d)
        if not 0 < r <= 2:
            raise ValueError("r must lie in (0, 2]")
        if not 0 <= center_radius <= 1 - 0.5 * r:
            raise ValueError("center_radius must lie in [0, 1 - r/2]")
        self.r = float(r)
        self.center_radius = float(center_radius)
        if direction is None:
            direction = random_unit_vector(d, np.random.default_rng(direction_seed))
        self.direction = _unit(direction)
        self.policy = make_center_policy(center)
        self.sigma_dir = self.r
        self.sigma = 0.0

    def next_context(self, t, rng, learner=None):
        c = self.policy.center(t, rng, learner, self.center_radius, self.d)
        return c + rng.uniform(-0.5 * self.r, 0.5 * self.r) * self.direction

    def params(self):
        return {**super().params(), "r": self.r, "direction": self.direction.tolist(),
                "center_radius": self.center_radius,
                "center": type(self.policy).__name__}


class LowerBound1DAdversary(Adversary):
    """Keeps hitting the edge of the one-dimensional disagreement interval.

    ``D`` is the interval between the largest context labelled -1 and
    the smallest labelled +1 (initially [-1, 1]); its length is ``R`` and
    midpoint ``w``. With probability ``min(mu(A) / sigma, 1)`` the context
    is uniform on ``A = {x in D : (1 - eps) R / 2 <= |x - w| <= R / 2}``
    (``mu`` is the uniform probability on [-1, 1], so ``mu(A) = eps R / 2``).
    Otherwise, with ``rest='outside'`` (default), the context is uniform on
    the already-decided region ``[-1, 1] \\ D``, which keeps the density
    ratio at most ``1/sigma`` whenever ``sigma <= eps / (1 + eps)``; with
    ``rest='null'`` it is the fixed ``null_point``, an atom. The null
    point is also used while the decided region is empty. Labels
    strictly inside the margin are fair coin flips, everything else is
    labelled consistently.

    Contexts are ``s * direction`` for the scalar ``s``; with ``d = 1`` and
    the default direction that is just ``s``.
    """

    kind = "lower_bound_1d"
    provides_labels = True

    def __init__(self, d: int = 1, sigma: float = 0.01, eps: float = LOWER_BOUND_EPS,
                 null_point: float = -1.0, rest: str = "outside", direction=None):
        super().__init__(d)
        if not 0 < sigma <= 1:
            raise ValueError("sigma must lie in (0, 1]")
        if not 0 < eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if rest not in ("outside", "null"):
            raise ValueError("rest must be 'outside' or 'null'")
        self.sigma = float(sigma)
        self.eps = float(eps)
        self.null_point = float(null_point)
        self.rest = rest
        self.direction = np.eye(d)[0] if direction is None else _unit(direction)
        self.lo = -1.0
        self.hi = 1.0
        self.n_margin_hits = 0

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.hi + self.lo)

    def annulus_mass(self) -> float:
        return 0.5 * self.eps * self.length

    def hit_probability(self) -> float:
        return min(self.annulus_mass() / self.sigma, 1.0)

    def next_scalar(self, rng: np.random.Generator) -> float:
        u_hit, u_side, u_pos = rng.random(3)
        if u_hit >= self.hit_probability():
            left, right = self.lo + 1.0, 1.0 - self.hi
            if self.rest == "null" or left + right <= 0.0:
                return self.null_point
            v = u_pos * (left + right)
            return -1.0 + v if v < left else self.hi + (v - left)
        R = self.length
        offset = 0.5 * R * (1.0 - self.eps + self.eps * u_pos)
        return self.midpoint + (offset if u_side < 0.5 else -offset)

    def next_context(self, t, rng, learner=None):
        return self.next_scalar(rng) * self.direction

    def label(self, x, rng: np.random.Generator) -> int:
        s = float(np.asarray(x, dtype=float).reshape(-1) @ self.direction)
        # compare with the endpoints directly; a midpoint test loses exactness
        if s <= self.lo:
            y = -1
        elif s >= self.hi:
            y = 1
        else:
            self.n_margin_hits += 1
            y = 1 if rng.random() < 0.5 else -1
        if y == -1:
            self.lo = max(self.lo, s)
        else:
            self.hi = min(self.hi, s)
        return y

    def params(self):
        return {**super().params(), "eps": self.eps, "null_point": self.null_point, "rest": self.rest}


class NaivePunisher(Adversary):
    """Sweeps [-1, 1] left to right in steps of ``2 sigma``, then goes uniform."""

    kind = "naive_punisher"

    def __init__(self, d: int = 1, sigma: float = 0.01):
        if d != 1:
            raise ValueError("naive_punisher is one-dimensional")
        super().__init__(1)
        if not 0 < sigma <= 1:
            raise ValueError("sigma must lie in (0, 1]")
        self.sigma = float(sigma)
        self.sweep_rounds = int(math.floor(1.0 / self.sigma))

    def next_context(self, t, rng, learner=None):
        a = rng.random()
        if t <= self.sweep_rounds:
            x = -1.0 + 2.0 * self.sigma * (t - 1) + 2.0 * self.sigma * a
        else:
            x = -1.0 + 2.0 * a
        return np.array([min(x, 1.0)])


class FixedPointAdversary(Adversary):
    """Always plays the same context; not smooth (sigma = 0).

    Useful for exercising error paths with contradictory labels.
    """

    kind = "fixed"

    def __init__(self, d: int, point=None):
        super().__init__(d)
        point = np.eye(d)[0] * 0.5 if point is None else np.asarray(point, dtype=float)
        if point.shape != (d,) or np.linalg.norm(point) > 1.0:
            raise ValueError("point must be a d-vector in the unit ball")
        self.point = point
        self.sigma = 0.0

    def next_context(self, t, rng, learner=None):
        return self.point.copy()

    def params(self):
        return {**super().params(), "point": self.point.tolist()}


class RademacherAdversary(Adversary):
    """Coin-flip labels on the first ``n_random`` (generic) points, then a consistent halfspace.

    After the random phase a linear separator consistent with the coin
    flips is fixed and used for all later labels, so the stream stays
    realizable for linear learners when ``n_random <= d``.
    """

    kind = "rademacher"
    provides_labels = True

    def __init__(self, d: int, n_random: Optional[int] = None):
        super().__init__(d)
        self.n_random = self.d if n_random is None else int(n_random)
        self._seen: list[tuple[np.ndarray, int]] = []
        self.w_star: Optional[np.ndarray] = None

    def next_context(self, t, rng, learner=None):
        return sample_uniform_ball(self.d, rng)

    def label(self, x, rng):
        x = np.asarray(x, dtype=float)
        if self.w_star is None and len(self._seen) < self.n_random:
            y = 1 if rng.random() < 0.5 else -1
            self._seen.append((x, y))
            return y
        if self.w_star is None:
            self.w_star = self._separator()
        return 1 if float(self.w_star @ x) >= 0 else -1

    def _separator(self) -> np.ndarray:
        X = np.vstack([p[0] for p in self._seen])
        y = np.array([p[1] for p in self._seen], dtype=float)
        res = linprog(np.zeros(self.d), A_ub=-(y[:, None] * X), b_ub=-np.ones(len(y)),
                      bounds=[(None, None)] * self.d, method="highs")
        if res.status != 0:
            raise RuntimeError("coin flips are not linearly separable")
        return _unit(res.x)


# ---------------------------------------------------------------------------
# label oracles

class LinearOracle:
    """``sign(<w, x>)`` with sign(0) = +1."""

    kind = "linear"

    def __init__(self, w):
        self.w = _unit(w)

    @classmethod
    def random(cls, d: int, rng: np.random.Generator) -> "LinearOracle":
        return cls(random_unit_vector(d, rng))

    def __call__(self, x) -> int:
        return 1 if float(self.w @ np.asarray(x, dtype=float)) >= 0 else -1

    def lifted_parameter(self) -> np.ndarray:
        return self.w.copy()

    def params(self) -> dict:
        return {"kind": self.kind, "w": self.w.tolist()}


class AffineOracle:
    """``sign(<w, x> + b)`` normalised to ``||w||^2 + b^2 = 1``.

    Requires ``||w|| >= 1/2`` after normalisation, which is no loss of
    generality for boundaries that meet the unit ball.
    """

    kind = "affine"

    def __init__(self, w, b: float):
        w = np.asarray(w, dtype=float).reshape(-1)
        n = math.sqrt(float(w @ w) + float(b) ** 2)
        if n == 0:
            raise ValueError("zero affine functional")
        self.w = w / n
        self.b = float(b) / n
        if np.linalg.norm(self.w) < 0.5 - 1e-12:
            raise ValueError("normalised ||w|| must be at least 1/2")

    @classmethod
    def random(cls, d: int, rng: np.random.Generator) -> "AffineOracle":
        direction = random_unit_vector(d, rng)
        norm_w = rng.uniform(0.5, 1.0)
        b = math.sqrt(max(1.0 - norm_w ** 2, 0.0)) * (1 if rng.random() < 0.5 else -1)
        return cls(norm_w * direction, b)

    def __call__(self, x) -> int:
        return 1 if float(self.w @ np.asarray(x, dtype=float)) + self.b >= 0 else -1

    def lifted_parameter(self) -> np.ndarray:
        return np.append(self.w, self.b)

    def params(self) -> dict:
        return {"kind": self.kind, "w": self.w.tolist(), "b": self.b}


class ThresholdOracle:
    """``sign(<x, e> - theta)`` for a unit direction ``e`` (default ``e_1``)."""

    kind = "threshold"

    def __init__(self, theta: float = 0.0, direction=None, d: int = 1):
        self.theta = float(theta)
        self.direction = np.eye(d)[0] if direction is None else _unit(direction)

    def __call__(self, x) -> int:
        return 1 if float(self.direction @ np.asarray(x, dtype=float)) - self.theta >= 0 else -1

    def params(self) -> dict:
        return {"kind": self.kind, "theta": self.theta, "direction": self.direction.tolist()}


class FeatureOracle:
    """``sign(<w, phi(x)>)`` for a fixed feature map."""

    kind = "feature"

    def __init__(self, phi: Callable, w):
        self.phi = phi
        self.w = _unit(w)

    def __call__(self, x) -> int:
        return 1 if float(self.w @ np.asarray(self.phi(x), dtype=float)) >= 0 else -1

    def params(self) -> dict:
        return {"kind": self.kind, "w": self.w.tolist()}


class KClassOracle:
    """Class ``argmax_i <w_i, x>`` in ``1..K``, ties to the smaller index."""

    kind = "k_class"

    def __init__(self, W):
        self.W = np.asarray(W, dtype=float)
        if self.W.ndim != 2:
            raise ValueError("W must be K x d")

    @classmethod
    def random(cls, K: int, d: int, rng: np.random.Generator) -> "KClassOracle":
        return cls(sample_uniform_ball(d, rng, size=K))

    @property
    def n_classes(self) -> int:
        return self.W.shape[0]

    def __call__(self, x) -> int:
        return int(np.argmax(self.W @ np.asarray(x, dtype=float))) + 1

    def pair_parameter(self, i: int, j: int) -> np.ndarray:
        """Normalised ``w_i - w_j`` (1-based classes), the truth for pair (i, j)."""
        v = self.W[i - 1] - self.W[j - 1]
        n = np.linalg.norm(v)
        return v / n if n > 0 else v

    def params(self) -> dict:
        return {"kind": self.kind, "W": self.W.tolist()}


class PiecewiseOracle:
    """``<a_k, x>`` where ``k`` is the K-class argmax of ``W``."""

    kind = "piecewise"

    def __init__(self, W, pieces):
        self.classifier = KClassOracle(W)
        self.pieces = np.asarray(pieces, dtype=float)
        if self.pieces.shape[0] != self.classifier.n_classes:
            raise ValueError("need one piece per class")

    @classmethod
    def random(cls, K: int, d: int, rng: np.random.Generator) -> "PiecewiseOracle":
        W = sample_uniform_ball(d, rng, size=K)
        pieces = rng.standard_normal((K, d))
        return cls(W, pieces)

    def piece(self, x) -> int:
        return self.classifier(x)

    def __call__(self, x) -> float:
        return float(self.pieces[self.piece(x) - 1] @ np.asarray(x, dtype=float))

    def params(self) -> dict:
        return {"kind": self.kind, "W": self.classifier.W.tolist(), "pieces": self.pieces.tolist()}


class ActionLossOracle:
    """Noiseless loss of each action, one piecewise-linear function per action."""

    kind = "action_losses"

    def __init__(self, oracles: Sequence[PiecewiseOracle]):
        self.oracles = list(oracles)

    @classmethod
    def random(cls, n_actions: int, K: int, d: int, rng: np.random.Generator) -> "ActionLossOracle":
        return cls([PiecewiseOracle.random(K, d, rng) for _ in range(n_actions)])

    @property
    def n_actions(self) -> int:
        return len(self.oracles)

    def losses(self, x) -> np.ndarray:
        return np.array([o(x) for o in self.oracles])

    def params(self) -> dict:
        return {"kind": self.kind, "actions": [o.params() for o in self.oracles]}


# ---------------------------------------------------------------------------
# corruption

@dataclass
class CorruptionSchedule:
    """Rounds whose binary labels are flipped; ``n_err`` counts one plus the flips."""

    flip_times: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        self.flip_times = frozenset(int(t) for t in self.flip_times)

    @property
    def n_err(self) -> int:
        return 1 + len(self.flip_times)

    def corrupt(self, t: int, label: int) -> int:
        return -label if t in self.flip_times else label


def corrupt(schedule: CorruptionSchedule, t: int, label: int) -> int:
    return schedule.corrupt(t, label)


# ---------------------------------------------------------------------------
# smoothness audit

@dataclass
class SmoothnessAudit:
    """Histogram estimate of the density ratio dp/dmu against 1/sigma."""

    max_ratio: float
    max_ratio_stderr: float
    mean_ratio: float
    mean_ratio_stderr: float
    core_ratio: float
    core_ratio_stderr: float
    declared: float
    n_draws: int
    n_cells_used: int
    n_core_cells: int


def smoothness_audit(adv: Adversary, n_draws: int, n_cells: int, rng: np.random.Generator,
                     t: int = 1, learner=None) -> SmoothnessAudit:
    """Estimate ``sup dp_t/dmu`` on a cubic grid with ``n_cells`` cells per axis.

    Only grid cells lying entirely inside the unit ball are used, so each
    cell's base mass is exact. ``mean_ratio`` averages over the occupied
    cells. ``core_ratio`` averages only over cells whose grid neighbours
    are all occupied; it drops the cells cut by the support's edge and is
    the statistic to compare with ``1/sigma`` for flat densities.
    """
    d = adv.d
    X = np.vstack([adv.next_context(t, rng, learner) for _ in range(int(n_draws))])
    h = 2.0 / n_cells
    idx = np.clip(np.floor((X + 1.0) / h).astype(int), 0, n_cells - 1)
    keys, counts = np.unique(idx, axis=0, return_counts=True)
    far_corner = np.maximum(np.abs(-1.0 + keys * h), np.abs(-1.0 + (keys + 1) * h))
    inside = np.sum(far_corner ** 2, axis=1) <= 1.0 + 1e-12
    mass = h ** d / math.exp(log_unit_ball_volume(d))
    if not np.any(inside):
        raise ValueError("no occupied grid cell lies inside the ball; use more cells")
    freq = counts[inside] / n_draws
    ratios = freq / mass
    errs = np.sqrt(freq * (1 - freq) / n_draws) / mass
    k = int(np.argmax(ratios))
    declared = 1.0 / adv.sigma if adv.sigma > 0 else math.inf
    occupied = {tuple(key) for key in keys}
    offsets = [o for o in itertools.product((-1, 0, 1), repeat=d) if any(o)]
    core = np.array([all(tuple(key + np.array(o)) in occupied for o in offsets)
                     for key in keys[inside]], dtype=bool)
    core_vals = ratios[core]
    if core_vals.size > 1:
        core_ratio = float(np.mean(core_vals))
        core_se = float(np.std(core_vals, ddof=1) / math.sqrt(core_vals.size))
    else:
        core_ratio = core_se = float("nan")
    return SmoothnessAudit(
        max_ratio=float(ratios[k]),
        max_ratio_stderr=float(errs[k]),
        mean_ratio=float(np.mean(ratios)),
        mean_ratio_stderr=float(np.std(ratios, ddof=1) / math.sqrt(len(ratios))) if len(ratios) > 1 else float(errs[0]),
        core_ratio=core_ratio,
        core_ratio_stderr=core_se,
        declared=declared,
        n_draws=int(n_draws),
        n_cells_used=int(np.sum(inside)),
        n_core_cells=int(core_vals.size),
    )
