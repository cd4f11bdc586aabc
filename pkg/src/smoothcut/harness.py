"""Experiment runner, trace bookkeeping and the checks built on traces.

Seeds
-----
Trial ``i`` of a run with master seed ``s`` draws every random quantity
from ``default_rng(SeedSequence(s, spawn_key=(i, stream)))`` where
``stream`` is one of :data:`STREAMS`. Streams are independent, so e.g.
changing the learner never perturbs the context sequence.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import linprog
from scipy.spatial import HalfspaceIntersection, QhullError

from . import adversaries as adv_mod
from .config import ComponentSpec, ConfigError, ExperimentConfig
from .convex_geometry import HalfspacePolytope, LPFailure, chebyshev_center
from .erm_oracle import ErmInfeasible
from .learners import (
    AffineLiftClassifier,
    CoordinateFeatureClassifier,
    IGWBandit,
    InvalidDistribution,
    JohnLinearClassifier,
    KClassClassifier,
    MonomialFeatures,
    NaiveThresholdClassifier,
    NonRealizable,
    Perceptron,
    PiecewiseRegressor,
    PolynomialMetaPointClassifier,
)

STREAMS = {"oracle": 0, "contexts": 1, "labels": 2, "learner": 3, "bandit": 4,
           "monte_carlo": 5, "adversary": 6}
CSV_COLUMNS = ("t", "mistake", "cum_mistakes", "log_volume", "recompute", "wallclock_us")
DECAY_FACTOR = 8.0 / 9.0
DISAGREEMENT_TAU = 1e-9


def trial_rng(master_seed: int, trial: int, stream: str | int) -> np.random.Generator:
    key = STREAMS[stream] if isinstance(stream, str) else int(stream)
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=(int(trial), key)))


# ---------------------------------------------------------------------------
# coordinate maps usable from config files

def coordinate_map(desc) -> Callable[[float], float]:
    """Build a monotone map of [-1, 1] onto itself from a name or ``{name: ..., <param>: ...}``.

    ``identity`` (slope 1), ``cubic`` with parameter ``b >= 0``:
    ``(u + b u^3) / (1 + b)`` (slope >= 1 / (1 + b)), and ``tanh`` with
    parameter ``a > 0``: ``tanh(a u) / tanh(a)``.
    """
    if isinstance(desc, str):
        desc = {"name": desc}
    if not isinstance(desc, dict) or "name" not in desc:
        raise ConfigError(f"bad coordinate map {desc!r}")
    desc = dict(desc)
    name = desc.pop("name")
    if name == "identity" and not desc:
        return lambda u: u
    if name == "cubic" and set(desc) <= {"b"}:
        b = float(desc.get("b", 1.0))
        return lambda u: (u + b * u ** 3) / (1.0 + b)
    if name == "tanh" and set(desc) <= {"a"}:
        a = float(desc.get("a", 1.0))
        return lambda u: math.tanh(a * u) / math.tanh(a)
    raise ConfigError(f"unknown coordinate map {name!r} with parameters {sorted(desc)}")


def _maps_from(desc, d: int):
    if desc is None:
        return None
    if isinstance(desc, list):
        return [coordinate_map(s) for s in desc]
    return [coordinate_map(desc)] * d


# ---------------------------------------------------------------------------
# registries

@dataclass
class BuildContext:
    d: int
    horizon: int
    delta: float
    rng: np.random.Generator


def _call(factory, kind: str, **kwargs):
    try:
        return factory(**kwargs)
    except TypeError as err:
        raise ConfigError(f"{kind}: {err}") from None


def _learner_john(ctx, p):
    return _call(JohnLinearClassifier, "john_linear", **p)


def _learner_affine(ctx, p):
    return _call(AffineLiftClassifier, "affine_lift", random_state=ctx.rng, **p)


def _learner_coordinate(ctx, p):
    p = dict(p)
    maps = _maps_from(p.pop("maps", None), ctx.d)
    return _call(CoordinateFeatureClassifier, "coordinate_feature", maps=maps, **p)


def _learner_poly(ctx, p):
    p = dict(p)
    degree = int(p.pop("degree", 2))
    return _call(PolynomialMetaPointClassifier, "poly_metapoint",
                 features=MonomialFeatures(ctx.d, degree), degree=degree,
                 horizon=max(ctx.horizon, 1), delta=ctx.delta, **p)


def _learner_piecewise(ctx, p):
    p = dict(p)
    deg = p.pop("piece_degree", None)
    feats = MonomialFeatures(ctx.d, int(deg)) if deg is not None else None
    return _call(PiecewiseRegressor, "piecewise", features=feats, **p)


def _learner_igw(ctx, p):
    p = dict(p)
    piece_params = p.pop("regressor", {}) or {}
    n_pieces = int(p.pop("n_pieces", 2))

    def factory():
        return _call(PiecewiseRegressor, "igw.regressor", n_pieces=n_pieces, **piece_params)

    factory()  # fail early on bad regressor parameters
    return _call(IGWBandit, "igw", n_pieces=n_pieces, regressor_factory=factory, **p)


# kind -> (factory, task)
LEARNERS = {
    "john_linear": (_learner_john, "binary"),
    "affine_lift": (_learner_affine, "binary"),
    "coordinate_feature": (_learner_coordinate, "binary"),
    "poly_metapoint": (_learner_poly, "binary"),
    "perceptron": (lambda ctx, p: _call(Perceptron, "perceptron", **p), "binary"),
    "naive_threshold": (lambda ctx, p: _call(NaiveThresholdClassifier, "naive_threshold", **p), "binary"),
    "k_class": (lambda ctx, p: _call(KClassClassifier, "k_class", **p), "multiclass"),
    "piecewise": (_learner_piecewise, "regression"),
    "igw": (_learner_igw, "bandit"),
}
CUTTING_PLANE = {"john_linear", "affine_lift", "coordinate_feature", "poly_metapoint",
                 "k_class", "piecewise", "igw"}
# learners whose behaviour depends on the horizon; sweeps rerun them per horizon
HORIZON_DEPENDENT = {"poly_metapoint"}

ADVERSARIES = {
    "uniform": adv_mod.UniformAdversary,
    "eps_ball": adv_mod.EpsBallAdversary,
    "directional_line": adv_mod.DirectionalLineAdversary,
    "lower_bound_1d": adv_mod.LowerBound1DAdversary,
    "naive_punisher": adv_mod.NaivePunisher,
    "rademacher": adv_mod.RademacherAdversary,
    "fixed": adv_mod.FixedPointAdversary,
}


def _oracle_linear(ctx, p):
    if "w" in p:
        return _call(adv_mod.LinearOracle, "linear", **p)
    if p:
        raise ConfigError(f"linear: unknown parameters {sorted(p)}")
    return adv_mod.LinearOracle.random(ctx.d, ctx.rng)


def _oracle_affine(ctx, p):
    if p:
        return _call(adv_mod.AffineOracle, "affine", **p)
    return adv_mod.AffineOracle.random(ctx.d, ctx.rng)


def _oracle_kclass(ctx, p):
    p = dict(p)
    if "W" in p:
        return _call(adv_mod.KClassOracle, "k_class", **p)
    K = int(p.pop("n_classes", 2))
    if p:
        raise ConfigError(f"k_class oracle: unknown parameters {sorted(p)}")
    return adv_mod.KClassOracle.random(K, ctx.d, ctx.rng)


def _oracle_piecewise(ctx, p):
    p = dict(p)
    if "W" in p or "pieces" in p:
        return _call(adv_mod.PiecewiseOracle, "piecewise", **p)
    K = int(p.pop("n_pieces", 2))
    if p:
        raise ConfigError(f"piecewise oracle: unknown parameters {sorted(p)}")
    return adv_mod.PiecewiseOracle.random(K, ctx.d, ctx.rng)


def _oracle_actions(ctx, p):
    p = dict(p)
    A = int(p.pop("n_actions", 3))
    K = int(p.pop("n_pieces", 2))
    if p:
        raise ConfigError(f"action_losses oracle: unknown parameters {sorted(p)}")
    return adv_mod.ActionLossOracle.random(A, K, ctx.d, ctx.rng)


def _oracle_feature(ctx, p):
    p = dict(p)
    maps = _maps_from(p.pop("maps", "identity"), ctx.d)
    w = p.pop("w", None)
    if p:
        raise ConfigError(f"feature oracle: unknown parameters {sorted(p)}")
    phi = lambda x: np.array([f(v) for f, v in zip(maps, np.asarray(x, dtype=float))])
    w = adv_mod.random_unit_vector(ctx.d, ctx.rng) if w is None else w
    return adv_mod.FeatureOracle(phi, w)


def _oracle_polynomial(ctx, p):
    p = dict(p)
    feats = MonomialFeatures(ctx.d, int(p.pop("degree", 2)))
    w = p.pop("w", None)
    if p:
        raise ConfigError(f"polynomial oracle: unknown parameters {sorted(p)}")
    w = adv_mod.random_unit_vector(feats.n_output_features, ctx.rng) if w is None else w
    return adv_mod.FeatureOracle(feats, w)


# kind -> (factory, task)
ORACLES = {
    "linear": (_oracle_linear, "binary"),
    "affine": (_oracle_affine, "binary"),
    "threshold": (lambda ctx, p: _call(adv_mod.ThresholdOracle, "threshold", d=ctx.d, **p), "binary"),
    "feature": (_oracle_feature, "binary"),
    "polynomial": (_oracle_polynomial, "binary"),
    "k_class": (_oracle_kclass, "multiclass"),
    "piecewise": (_oracle_piecewise, "regression"),
    "action_losses": (_oracle_actions, "bandit"),
}


@dataclass
class Components:
    learner: object
    adversary: adv_mod.Adversary
    oracle: object
    task: str
    schedule: adv_mod.CorruptionSchedule


def build_components(cfg: ExperimentConfig, trial: int = 0) -> Components:
    """Instantiate learner, adversary, oracle and corruption schedule for one trial."""
    lk, ak = cfg.learner.kind, cfg.adversary.kind
    if lk not in LEARNERS:
        raise ConfigError(f"unknown learner kind {lk!r}; choose from {sorted(LEARNERS)}")
    if ak not in ADVERSARIES:
        raise ConfigError(f"unknown adversary kind {ak!r}; choose from {sorted(ADVERSARIES)}")
    factory, task = LEARNERS[lk]
    ctx = lambda stream: BuildContext(cfg.dim, cfg.horizon, cfg.delta, trial_rng(cfg.seed, trial, stream))
    learner = factory(ctx("learner"), dict(cfg.learner.params))

    adv_cls = ADVERSARIES[ak]
    params = dict(cfg.adversary.params)
    if ak == "directional_line" and "direction" not in params and "direction_seed" not in params:
        params["direction"] = adv_mod.random_unit_vector(cfg.dim, ctx("adversary").rng)
    try:
        adversary = adv_cls(cfg.dim, **params)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"adversary {ak}: {err}") from None

    oracle = None
    if cfg.oracle is not None:
        ok = cfg.oracle.kind
        if ok not in ORACLES:
            raise ConfigError(f"unknown oracle kind {ok!r}; choose from {sorted(ORACLES)}")
        ofac, otask = ORACLES[ok]
        if otask != task:
            raise ConfigError(f"oracle {ok!r} produces {otask} labels but learner {lk!r} needs {task}")
        try:
            oracle = ofac(ctx("oracle"), dict(cfg.oracle.params))
        except ValueError as err:
            raise ConfigError(f"oracle {ok}: {err}") from None
    elif not (adversary.provides_labels and task == "binary"):
        raise ConfigError("an oracle is required unless the adversary chooses binary labels")
    if cfg.corruption.flip_times and task != "binary":
        raise ConfigError("label corruption only applies to binary labels")
    schedule = adv_mod.CorruptionSchedule(frozenset(cfg.corruption.flip_times))
    return Components(learner, adversary, oracle, task, schedule)


def validate_config(cfg: ExperimentConfig) -> None:
    """Resolve every component once so config errors surface before any run."""
    comps = build_components(cfg, 0)
    if cfg.sweep.param:
        for v in cfg.sweep.values:
            build_components(_with_adversary_param(cfg, cfg.sweep.param, v), 0)
    del comps


# ---------------------------------------------------------------------------
# traces

@dataclass
class RoundRecord:
    t: int
    y: object
    y_hat: object
    mistake: bool
    cum_mistakes: int
    log_volume: float
    recompute: bool
    wallclock_us: int
    x: Optional[np.ndarray] = None


class Trace:
    """Column store of per-round records."""

    def __init__(self, initial_log_volume: float = float("nan")):
        self.initial_log_volume = float(initial_log_volume)
        self.t: list[int] = []
        self.y: list = []
        self.y_hat: list = []
        self.mistake: list[bool] = []
        self.cum_mistakes: list[int] = []
        self.log_volume: list[float] = []
        self.recompute: list[bool] = []
        self.wallclock_us: list[int] = []
        self.x: Optional[list] = None
        self.aux: dict[str, list] = {}

    def append(self, t, y, y_hat, mistake, log_volume, recompute, wallclock_us=0, x=None, **aux):
        prev = self.cum_mistakes[-1] if self.cum_mistakes else 0
        self.t.append(int(t))
        self.y.append(y)
        self.y_hat.append(y_hat)
        self.mistake.append(bool(mistake))
        self.cum_mistakes.append(prev + int(bool(mistake)))
        self.log_volume.append(float(log_volume))
        self.recompute.append(bool(recompute))
        self.wallclock_us.append(int(wallclock_us))
        if x is not None:
            if self.x is None:
                self.x = []
            self.x.append(np.asarray(x, dtype=float).copy())
        for k, v in aux.items():
            self.aux.setdefault(k, []).append(v)

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> RoundRecord:
        return RoundRecord(self.t[i], self.y[i], self.y_hat[i], self.mistake[i],
                           self.cum_mistakes[i], self.log_volume[i], self.recompute[i],
                           self.wallclock_us[i], None if self.x is None else self.x[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def total_mistakes(self) -> int:
        return self.cum_mistakes[-1] if self.cum_mistakes else 0

    def mistakes_at(self, horizon: int) -> int:
        """Cumulative mistakes after ``horizon`` rounds (prefix of this trace)."""
        if horizon <= 0:
            return 0
        if horizon > len(self):
            raise ValueError(f"trace has only {len(self)} rounds")
        return self.cum_mistakes[horizon - 1]

    def log_volume_path(self) -> np.ndarray:
        """Initial log-volume followed by the value after each round."""
        return np.array([self.initial_log_volume] + self.log_volume, dtype=float)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for i in range(len(self)):
            w.writerow([self.t[i], int(self.mistake[i]), self.cum_mistakes[i],
                        repr(self.log_volume[i]), int(self.recompute[i]), self.wallclock_us[i]])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def read_csv(cls, path) -> "Trace":
        """Load a trace written by :meth:`to_csv`; ValueError if malformed."""
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or tuple(rows[0]) != CSV_COLUMNS:
            raise ValueError(f"{path}: header must be {','.join(CSV_COLUMNS)}")
        tr = cls()
        for n, row in enumerate(rows[1:], start=2):
            if len(row) != len(CSV_COLUMNS):
                raise ValueError(f"{path}:{n}: expected {len(CSV_COLUMNS)} fields")
            try:
                t, m, cm, lv, rc, us = int(row[0]), int(row[1]), int(row[2]), float(row[3]), int(row[4]), int(row[5])
            except ValueError as err:
                raise ValueError(f"{path}:{n}: {err}") from None
            tr.append(t, None, None, bool(m), lv, bool(rc), us)
            if tr.cum_mistakes[-1] != cm:
                raise ValueError(f"{path}:{n}: cum_mistakes inconsistent with mistake flags")
        return tr


# ---------------------------------------------------------------------------
# decay verification

@dataclass
class DecayResult:
    passed: bool
    violations: list
    n_events: int
    max_event_ratio: float
    applicable: bool = True

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def decay_check(log_volumes, events, c: float = DECAY_FACTOR, slack: float = 1e-3,
                atol: float = 1e-9) -> DecayResult:
    """Check geometric decay of a volume surrogate.

    ``log_volumes[0]`` is the value before round 1 and ``log_volumes[t]``
    the value after round ``t``. ``events`` is a boolean flag per round
    or a collection of 1-based event rounds. At each event round the
    volume must shrink by at least ``c + slack``; at every other round it
    must not grow (up to ``atol`` in log space).
    """
    lv = np.asarray(log_volumes, dtype=float)
    n = lv.shape[0] - 1
    ev = np.zeros(n, dtype=bool)
    events = list(events) if not isinstance(events, np.ndarray) else events
    if len(events) == n and all(isinstance(e, (bool, np.bool_)) for e in events):
        ev[:] = np.asarray(events, dtype=bool)
    else:
        for r in events:
            if not 1 <= int(r) <= n:
                raise ValueError(f"event round {r} outside 1..{n}")
            ev[int(r) - 1] = True
    if np.all(np.isnan(lv)):
        return DecayResult(True, [], int(ev.sum()), float("nan"), applicable=False)
    limit = math.log(c + slack)
    diffs = lv[1:] - lv[:-1]
    violations = []
    ratios = []
    for i in range(n):
        r = i + 1
        if ev[i]:
            ratios.append(math.exp(diffs[i]))
            if not diffs[i] <= limit:
                violations.append({"round": r, "kind": "insufficient_decay",
                                   "ratio": float(math.exp(diffs[i]))})
        elif diffs[i] > atol:
            violations.append({"round": r, "kind": "increase", "ratio": float(math.exp(diffs[i]))})
    return DecayResult(not violations, violations, int(ev.sum()),
                       float(max(ratios)) if ratios else float("nan"))


def trace_decay_check(trace: Trace, c: float = DECAY_FACTOR, slack: float = 1e-3) -> DecayResult:
    return decay_check(trace.log_volume_path(), np.asarray(trace.recompute, dtype=bool), c, slack)


# ---------------------------------------------------------------------------
# disagreement mass

def _lp_extreme(poly: HalfspacePolytope, direction: np.ndarray) -> float:
    res = linprog(-direction, A_ub=poly.normals, b_ub=poly.offsets,
                  bounds=[(None, None)] * poly.dim, method="highs")
    if res.status != 0:
        raise LPFailure("support LP failed", res.status, res.message)
    return -float(res.fun)


def polytope_vertices(poly: HalfspacePolytope) -> np.ndarray:
    """Vertices of a full-dimensional bounded polytope (qhull)."""
    c, r = chebyshev_center(poly.normals, poly.offsets)
    if r <= 0:
        raise QhullError("polytope has empty interior")
    hs = np.column_stack([poly.normals, -poly.offsets])
    return HalfspaceIntersection(hs, c).intersections


def disagreement_mass(poly: HalfspacePolytope, n_samples: int, rng: np.random.Generator,
                      tau: float = DISAGREEMENT_TAU, method: str = "vertices") -> tuple[float, float]:
    """Monte Carlo estimate of the uniform-ball mass of contexts the version space disputes.

    ``x`` is disputed when some member gives ``<w, x> >= tau`` and some
    member gives ``<w, x> <= -tau``. ``method='lp'`` solves the two
    support LPs per sample; ``'vertices'`` evaluates the same supports
    over the polytope's vertices, which is exact for bounded polytopes
    and much faster. Returns ``(estimate, standard error)``.
    """
    X = adv_mod.sample_uniform_ball(poly.dim, rng, size=int(n_samples))
    if method == "vertices":
        try:
            V = polytope_vertices(poly)
        except (QhullError, ValueError):
            method = "lp"
        else:
            S = X @ V.T
            hit = (S.max(axis=1) >= tau) & (S.min(axis=1) <= -tau)
    if method == "lp":
        hit = np.array([_lp_extreme(poly, x) >= tau and -_lp_extreme(poly, -x) <= -tau for x in X])
    elif method != "vertices":
        raise ValueError(f"unknown method {method!r}")
    p = float(np.mean(hit))
    return p, math.sqrt(p * (1.0 - p) / len(X))


# ---------------------------------------------------------------------------
# bound formulas (natural logarithms)

def _dlogd(d: float) -> float:
    return d * math.log(d) if d > 1 else 0.0


def warmup_bound(d: int, T: int, sigma: float, delta: float) -> float:
    return 136 * _dlogd(d) + 34 * math.log(T / (sigma * delta)) + 56


def affine_bound(d: int, T: int, sigma: float, delta: float) -> float:
    return 268 * _dlogd(d) + 34 * math.log(T / (sigma * delta)) + 56


def lifted_sigma(sigma: float, d: int) -> float:
    """Smoothness of the lifted contexts, ``sigma / 4^(d+2)``."""
    return sigma / 4.0 ** (d + 2)


def coordinate_feature_bound(d: int, alpha: float, T: int, sigma: float, delta: float) -> float:
    return 136 * d * math.log(d / alpha) + 34 * math.log(T / (sigma * delta)) + 56


def polynomial_feature_rate(m: int, degree: int, d: int, T: int, lipschitz: float,
                            sigma: float, delta: float, alpha: float = 1.0) -> float:
    """Order of the polynomial-feature mistake bound (its constant is unspecified)."""
    lg = math.log(d * degree * T * lipschitz / (sigma * delta))
    return _dlogd(m) + math.log(1.0 / alpha) + degree ** 2 * m ** 2 * d * lg ** 2


def k_class_bound(K: int, d: int, T: int, sigma: float, delta: float) -> float:
    return 136 * K ** 2 * _dlogd(d) + 91 * K ** 2 * math.log(T * K ** 2 / (sigma * delta))


def piecewise_bound(K: int, d: int, ell: int, T: int, sigma: float, delta: float) -> float:
    return k_class_bound(K, d, T, sigma, delta) + K ** 2 * (ell + 1)


def undiscovered_bound(K: int, ell: int) -> int:
    return K ** 2 * (ell + 1)


def perceptron_rate(T: int, sigma_dir: float, n_err: int, delta: float) -> float:
    """Order of the directional-smoothness perceptron bound (constant unspecified)."""
    return (T / sigma_dir) ** (2.0 / 3.0) * n_err ** (1.0 / 3.0) + math.log(max(math.ceil(math.log(T)), 1) / delta)


def margin_mistake_bound(n_margin: int, n_violations: int, R: float, gamma: float) -> float:
    """``(8 N1 + 4) R^2 / gamma^2 + 2 N2`` for a probe halfspace with margin gamma."""
    return (8 * n_margin + 4) * R ** 2 / gamma ** 2 + 2 * n_violations


def classical_perceptron_bound(X, y, w, gamma: float) -> float:
    """``(R + D)^2 / gamma^2`` with ``D`` the total hinge deficit of the unit probe ``w``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float) / np.linalg.norm(w)
    R = float(np.max(np.linalg.norm(X, axis=1))) if len(X) else 0.0
    D = math.sqrt(float(np.sum(np.maximum(0.0, gamma - y * (X @ w)) ** 2)))
    return (R + D) ** 2 / gamma ** 2


def bandit_regret_bound(A: int, K: int, d: int, T: int, sigma: float, delta: float) -> float:
    inner = K ** 2 * _dlogd(d) + K ** 2 * math.log(A * T * K / (sigma * delta))
    return 80 * A * math.sqrt(T * inner) + 8 * math.sqrt(A * T * math.log(4 / delta))


def naive_lower_bound(sigma: float, eta: float) -> float:
    return math.floor(1.0 / sigma) * (1.0 - eta / (2.0 * sigma))


@dataclass
class BoundReport:
    bound_name: str
    bound_value: float
    observed: float
    satisfied: bool
    direction: str = "upper"          # upper | lower | rate
    parameters: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _report(name, value, observed, params, direction="upper") -> BoundReport:
    ok = observed <= value if direction != "lower" else observed >= value
    return BoundReport(name, float(value), float(observed), bool(ok), direction, params)


def bound_report(summary: "Summary") -> list[BoundReport]:
    """Evaluate every bound that applies to the run's learner and adversary."""
    b = summary.bound_inputs
    kind = summary.learner["kind"]
    d, T, delta = b["d"], b["T"], b["delta"]
    sigma, sigma_dir = b.get("sigma", 0.0), b.get("sigma_dir")
    obs = summary.total_mistakes
    out: list[BoundReport] = []
    if T < 1:
        return out
    base = {"d": d, "T": T, "delta": delta, "sigma": sigma}
    smooth = sigma is not None and sigma > 0
    if kind == "john_linear" and smooth:
        out.append(_report("warmup", warmup_bound(d, T, sigma, delta), obs, base))
    elif kind == "affine_lift" and smooth:
        sp = lifted_sigma(sigma, d)
        out.append(_report("affine_lifted", warmup_bound(d + 1, T, sp, delta), obs,
                           {**base, "lifted_dim": d + 1, "sigma_prime": sp}))
        out.append(_report("affine_corollary", affine_bound(d, T, sigma, delta), obs, base))
    elif kind == "coordinate_feature" and smooth:
        a = b["alpha"]
        out.append(_report("coordinate_features", coordinate_feature_bound(d, a, T, sigma, delta),
                           obs, {**base, "alpha": a}))
    elif kind == "poly_metapoint" and smooth:
        val = polynomial_feature_rate(b["m"], b["degree"], d, T, b["lipschitz"], sigma, delta)
        out.append(_report("polynomial_features_rate", val, obs,
                           {**base, "m": b["m"], "degree": b["degree"], "lipschitz": b["lipschitz"],
                            "constant": "unspecified"}, "rate"))
    elif kind == "k_class" and smooth:
        out.append(_report("k_class", k_class_bound(b["K"], d, T, sigma, delta), obs,
                           {**base, "K": b["K"]}))
    elif kind == "piecewise":
        K, ell = b["K"], b["ell"]
        if smooth:
            out.append(_report("piecewise", piecewise_bound(K, d, ell, T, sigma, delta), obs,
                               {**base, "K": K, "ell": ell}))
        out.append(_report("undiscovered_pieces", undiscovered_bound(K, ell),
                           summary.stats.get("undiscovered_mistakes", 0), {"K": K, "ell": ell}))
    elif kind == "perceptron" and sigma_dir:
        n_err = b["n_err"]
        out.append(_report("perceptron_rate", perceptron_rate(T, sigma_dir, n_err, delta), obs,
                           {"T": T, "sigma_dir": sigma_dir, "n_err": n_err, "delta": delta,
                            "constant": "unspecified"}, "rate"))
    elif kind == "naive_threshold" and summary.adversary.get("kind") == "naive_punisher":
        eta = b["eta"]
        out.append(_report("naive_lower", naive_lower_bound(sigma, eta), obs,
                           {"sigma": sigma, "eta": eta, "note": "bound on the expectation"}, "lower"))
    elif kind == "igw" and smooth:
        A, K = b["A"], b["K"]
        out.append(_report("bandit_regret", bandit_regret_bound(A, K, d, T, sigma, delta),
                           summary.stats.get("regret", 0.0), {**base, "A": A, "K": K}))
    return out


# ---------------------------------------------------------------------------
# running

@dataclass
class Summary:
    name: str
    trial: int
    seeds: dict
    learner: dict
    adversary: dict
    oracle: Optional[dict]
    horizon: int
    total_mistakes: int
    decay: dict
    bound_inputs: dict
    stats: dict
    bounds: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable(dataclasses.asdict(self))

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _log_volume(learner) -> float:
    if isinstance(learner, IGWBandit):
        if not hasattr(learner, "regressors_"):
            return float("nan")
        vals = [_log_volume(r) for r in learner.regressors_]
        return float(sum(vals))
    return float(getattr(learner, "log_volume_", float("nan")))


def _learner_params(learner) -> dict:
    out = {}
    for k, v in learner.get_params(deep=False).items():
        if isinstance(v, (int, float, str, bool)) or v is None:
            out[k] = v
        elif hasattr(v, "get_params"):
            out[k] = {"type": type(v).__name__, **v.get_params()}
        else:
            out[k] = type(v).__name__
    return out


def _with_adversary_param(cfg: ExperimentConfig, name: str, value) -> ExperimentConfig:
    params = dict(cfg.adversary.params)
    params[name] = value
    return cfg.replace(adversary=ComponentSpec(cfg.adversary.kind, params))


def _rewrap(err: Exception, t: int) -> Exception:
    detail = getattr(err, "detail", str(err))
    if isinstance(err, NonRealizable):
        return NonRealizable(detail, round=t)
    if isinstance(err, ErmInfeasible):
        return ErmInfeasible(detail, round=t)
    return InvalidDistribution(f"round {t}: {detail}")


def run_experiment(cfg: ExperimentConfig, trial: int = 0,
                   observer: Optional[Callable] = None) -> tuple[Trace, Summary]:
    """Run one trial of ``cfg``; bitwise reproducible for a fixed seed.

    ``observer(t, learner, x, y, report)`` is called after every update
    (``report`` is the learner's report, or a dict for bandits).
    Learner errors are re-raised with the global round index.
    """
    comps = build_components(cfg, trial)
    learner, adversary, oracle, task = comps.learner, comps.adversary, comps.oracle, comps.task
    ctx_rng = trial_rng(cfg.seed, trial, "contexts")
    label_rng = trial_rng(cfg.seed, trial, "labels")
    bandit_rng = trial_rng(cfg.seed, trial, "bandit")
    T = int(cfg.horizon)
    keep_x = T * cfg.dim <= cfg.output.record_x_max
    timing = bool(cfg.output.timing)
    trace: Optional[Trace] = None
    stats: dict = {}
    regret = 0.0
    min_prob = 1.0
    bad_dist = 0

    for t in range(1, T + 1):
        x = adversary.next_context(t, ctx_rng, learner)
        if trace is None:
            if task == "bandit":
                learner._ensure_state()
                for r in learner.regressors_:
                    r._ensure_state(x)
            else:
                learner._ensure_state(x)
            trace = Trace(_log_volume(learner))
        start = time.perf_counter_ns() if timing else 0
        try:
            if task == "bandit":
                losses = oracle.losses(x)
                a, p = learner.decide(x, bandit_rng)
                if abs(float(np.sum(p)) - 1.0) > 1e-12 or float(np.min(p)) < 0:
                    bad_dist += 1
                min_prob = min(min_prob, float(np.min(p)))
                rep = learner.reward(x, a, float(losses[a]))
                best = int(np.argmin(losses))
                inst = float(losses[a] - losses[best])
                regret += inst
                y, y_hat = best, a
                mistake = inst > 1e-12
                recompute = rep.recomputed
                report = {"action": a, "p": p, "loss": float(losses[a]), "regret": inst, "update": rep}
            else:
                if adversary.provides_labels and oracle is None:
                    y = adversary.label(x, label_rng)
                else:
                    y = oracle(x)
                if task == "binary":
                    y = comps.schedule.corrupt(t, y)
                report = learner.update(x, y)
                y_hat, mistake, recompute = report.prediction, report.mistake, report.recomputed
        except (NonRealizable, ErmInfeasible, InvalidDistribution) as err:
            raise _rewrap(err, t) from err
        us = (time.perf_counter_ns() - start) // 1000 if timing else 0
        aux = {"regret": inst} if task == "bandit" else {}
        trace.append(t, y, y_hat, mistake, _log_volume(learner), recompute, us,
                     x if keep_x else None, **aux)
        if observer is not None:
            observer(t, learner, x, y, report)

    if trace is None:
        trace = Trace()
    lk = cfg.learner.kind
    decay = trace_decay_check(trace) if lk in CUTTING_PLANE else DecayResult(True, [], 0, float("nan"), False)
    stats["n_recomputes"] = int(sum(trace.recompute))
    stats["final_log_volume"] = trace.log_volume[-1] if len(trace) else trace.initial_log_volume
    if task == "binary":
        stats["n_err"] = comps.schedule.n_err
    if isinstance(learner, KClassClassifier) and hasattr(learner, "binary_updates_"):
        stats["binary_updates"] = int(sum(learner.binary_updates_.values()))
        stats["binary_updates_by_pair"] = {f"{i},{j}": n for (i, j), n in learner.binary_updates_.items()}
    if isinstance(learner, PiecewiseRegressor) and hasattr(learner, "pieces_"):
        stats["undiscovered_mistakes"] = learner.n_undiscovered_mistakes_
        stats["max_erm_input"] = max(learner.erm_input_sizes_, default=0)
        stats["erm_calls"] = len(learner.erm_input_sizes_)
        stats["discovery_rounds"] = list(learner.discovery_rounds_)
        stats["n_known"] = learner.n_known_
        stats["binary_updates"] = int(sum(learner.classifier_.binary_updates_.values()))
    if task == "bandit":
        stats["regret"] = regret
        stats["invalid_distribution_rounds"] = bad_dist
        stats["min_probability"] = min_prob if T else None
    if isinstance(learner, PolynomialMetaPointClassifier) and hasattr(learner, "p_"):
        stats["bucket_capacity"] = learner.p_
        stats["meta_points"] = len(learner.meta_points_)
    if isinstance(adversary, adv_mod.LowerBound1DAdversary):
        stats["margin_hits"] = adversary.n_margin_hits

    bound_inputs = {"d": cfg.dim, "T": T, "delta": cfg.delta, "sigma": adversary.sigma,
                    "sigma_dir": adversary.sigma_dir, "n_err": comps.schedule.n_err}
    lp = cfg.learner.params
    if lk == "affine_lift":
        bound_inputs["sigma_prime"] = lifted_sigma(adversary.sigma, cfg.dim)
    if lk == "coordinate_feature":
        bound_inputs["alpha"] = float(lp.get("alpha", 1.0))
    if lk == "poly_metapoint":
        deg = int(lp.get("degree", 2))
        bound_inputs.update(m=MonomialFeatures(cfg.dim, deg).n_output_features, degree=deg,
                            lipschitz=float(lp.get("lipschitz", 1.0)))
    if lk == "k_class":
        bound_inputs["K"] = int(lp.get("n_classes", 2))
    if lk == "piecewise":
        bound_inputs["K"] = int(lp.get("n_pieces", 2))
        bound_inputs["ell"] = (learner.ell_ if hasattr(learner, "ell_")
                               else int(lp.get("ell") or cfg.dim))
    if lk == "naive_threshold":
        bound_inputs["eta"] = float(lp.get("eta", 1e-3))
    if lk == "igw":
        bound_inputs["A"] = int(lp.get("n_actions", 3))
        bound_inputs["K"] = int(lp.get("n_pieces", 2))

    summary = Summary(
        name=cfg.name,
        trial=trial,
        seeds={"master": cfg.seed, "trial": trial,
               "spawn_keys": {k: [trial, v] for k, v in STREAMS.items()}},
        learner={"kind": lk, "params": _learner_params(learner)},
        adversary=adversary.params(),
        oracle=oracle.params() if oracle is not None and hasattr(oracle, "params") else None,
        horizon=T,
        total_mistakes=trace.total_mistakes,
        decay=decay.to_dict(),
        bound_inputs=bound_inputs,
        stats=stats,
        config=cfg.to_dict(),
    )
    summary.bounds = [r.to_dict() for r in bound_report(summary)]
    return trace, summary


def run_trials(cfg: ExperimentConfig, n_jobs: int = 1) -> list[tuple[Trace, Summary]]:
    """All ``cfg.trials`` trials, results ordered by trial index."""
    if n_jobs == 1 or cfg.trials == 1:
        return [run_experiment(cfg, i) for i in range(cfg.trials)]
    return Parallel(n_jobs=n_jobs)(delayed(run_experiment)(cfg, i) for i in range(cfg.trials))


# ---------------------------------------------------------------------------
# sweeps

def fit_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of ``ys`` against ``xs``."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(np.unique(xs)) < 2:
        return float("nan")
    dx = xs - xs.mean()
    return float(np.dot(dx, ys - ys.mean()) / np.dot(dx, dx))


@dataclass
class SweepResult:
    rows: list            # one dict per (value, horizon, trial)
    means: list           # one dict per (value, horizon)
    slope_vs_log_T: float
    slope_vs_log_inv_sigma: float

    def to_dict(self) -> dict:
        return _jsonable(dataclasses.asdict(self))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["param_value", "sigma", "horizon", "trial", "mistakes"]
        w.writerow(cols)
        for r in self.rows:
            w.writerow([repr(r["param_value"]) if r["param_value"] is not None else "",
                        repr(r["sigma"]), r["horizon"], r["trial"], r["mistakes"]])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


def _sweep_job(cfg: ExperimentConfig, trial: int, horizons: list[int], value):
    out = []
    if cfg.learner.kind in HORIZON_DEPENDENT:
        for h in horizons:
            tr, sm = run_experiment(cfg.replace(horizon=h), trial)
            out.append((value, sm.bound_inputs["sigma"], h, trial, tr.total_mistakes))
    else:
        # the learner ignores T, so shorter horizons are exact prefixes of the longest run
        tr, sm = run_experiment(cfg.replace(horizon=max(horizons)), trial)
        for h in horizons:
            out.append((value, sm.bound_inputs["sigma"], h, trial, tr.mistakes_at(h)))
    return out


def sweep(cfg: ExperimentConfig, horizons: Optional[Sequence[int]] = None,
          param: Optional[str] = None, values: Optional[Sequence] = None,
          n_jobs: int = 1) -> SweepResult:
    """Mistakes over a grid of horizons and (optionally) one adversary parameter.

    Slopes are least-squares fits on trial means: against ``log T`` at
    the first parameter value, and against ``log(1/sigma)`` at the
    largest horizon.
    """
    horizons = sorted(int(h) for h in (horizons if horizons is not None else
                                       (cfg.sweep.horizons or [cfg.horizon])))
    param = param if param is not None else cfg.sweep.param
    values = list(values if values is not None else (cfg.sweep.values if param else []))
    grid = [(v, _with_adversary_param(cfg, param, v)) for v in values] if param else [(None, cfg)]
    jobs = [(c, i, v) for v, c in grid for i in range(cfg.trials)]
    if n_jobs == 1:
        results = [_sweep_job(c, i, horizons, v) for c, i, v in jobs]
    else:
        results = Parallel(n_jobs=n_jobs)(delayed(_sweep_job)(c, i, horizons, v) for c, i, v in jobs)
    rows = [{"param_value": v, "sigma": s, "horizon": h, "trial": i, "mistakes": m}
            for chunk in results for (v, s, h, i, m) in chunk]
    means = []
    for v, _ in grid:
        for h in horizons:
            sel = [r for r in rows if r["param_value"] == v and r["horizon"] == h]
            means.append({"param_value": v, "sigma": sel[0]["sigma"], "horizon": h,
                          "mean_mistakes": float(np.mean([r["mistakes"] for r in sel])),
                          "n_trials": len(sel)})
    first = [m for m in means if m["param_value"] == grid[0][0] and m["horizon"] > 0]
    slope_T = fit_slope([math.log(m["horizon"]) for m in first], [m["mean_mistakes"] for m in first])
    top = [m for m in means if m["horizon"] == horizons[-1] and m["sigma"] > 0]
    slope_s = fit_slope([math.log(1.0 / m["sigma"]) for m in top], [m["mean_mistakes"] for m in top])
    return SweepResult(rows, means, slope_T, slope_s)


def write_run_outputs(out_dir, results: list[tuple[Trace, Summary]]) -> list[str]:
    """Write ``trace_<trial>.csv`` and ``summary_<trial>.json`` per trial."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    written = []
    for trace, summary in results:
        p_csv = os.path.join(out_dir, f"trace_{summary.trial}.csv")
        p_json = os.path.join(out_dir, f"summary_{summary.trial}.json")
        trace.to_csv(p_csv)
        summary.to_json(p_json)
        written += [p_csv, p_json]
    return written
