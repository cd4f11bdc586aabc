import math

import numpy as np
import pytest

from smoothcut.config import config_from_dict
from smoothcut.convex_geometry import HalfspacePolytope
from smoothcut.harness import (
    CSV_COLUMNS,
    Trace,
    decay_check,
    disagreement_mass,
    fit_slope,
    k_class_bound,
    naive_lower_bound,
    perceptron_rate,
    piecewise_bound,
    run_experiment,
    sweep,
    trial_rng,
    undiscovered_bound,
    warmup_bound,
    affine_bound,
    lifted_sigma,
    margin_mistake_bound,
    bandit_regret_bound,
)


def _cfg(**kw):
    base = dict(dim=2, horizon=300, learner={"kind": "john_linear"},
                adversary={"kind": "eps_ball", "params": {"eps": 0.3}}, oracle={"kind": "linear"})
    base.update(kw)
    return config_from_dict(base)


# -- decay check ------------------------------------------------------------

def test_decay_check_passes_on_shrinking_path():
    lv = np.log([1.0, 0.8, 0.8, 0.7])
    r = decay_check(lv, [1, 3])
    assert r.passed and r.n_events == 2
    assert r.max_event_ratio == pytest.approx(0.875)
    assert decay_check(lv, [True, False, True]).passed


def test_decay_check_reports_the_round():
    r = decay_check(np.log([1.0, 0.8, 0.85]), [1])
    assert not r.passed
    assert r.violations == [{"round": 2, "kind": "increase", "ratio": pytest.approx(0.85 / 0.8)}]
    r = decay_check(np.log([1.0, 0.95]), [1])
    assert r.violations[0]["kind"] == "insufficient_decay" and r.violations[0]["round"] == 1


def test_decay_check_rejects_bad_rounds_and_skips_nan():
    with pytest.raises(ValueError):
        decay_check([0.0, -0.5], [2])
    assert not decay_check([float("nan")] * 3, [1]).applicable


# -- bound arithmetic -------------------------------------------------------

def test_warmup_bound_value():
    expected = 136 * 2 * math.log(2) + 34 * math.log(1000 / 0.05) + 56
    assert warmup_bound(2, 1000, 1.0, 0.05) == pytest.approx(expected)
    assert warmup_bound(2, 1000, 1.0, 0.05) == pytest.approx(581.26, abs=0.01)
    # d log d vanishes in one dimension
    assert warmup_bound(1, 1000, 1.0, 0.05) == pytest.approx(34 * math.log(2e4) + 56)


def test_d3_warmup_bound_near_1100():
    assert warmup_bound(3, 10_000, 1e-3, 0.05) == pytest.approx(1154.1, abs=0.1)


def test_affine_bounds():
    assert lifted_sigma(1e-3, 3) == pytest.approx(1e-3 / 1024)
    assert affine_bound(3, 10_000, 1e-3, 0.05) == pytest.approx(268 * 3 * math.log(3) + 34 * math.log(2e8) + 56)


def test_k_class_and_piecewise_bounds():
    kc = 136 * 9 * 2 * math.log(2) + 91 * 9 * math.log(1000 * 9 / (0.1 * 0.05))
    assert k_class_bound(3, 2, 1000, 0.1, 0.05) == pytest.approx(kc)
    assert k_class_bound(3, 2, 1000, 0.1, 0.05) == pytest.approx(13493.0, abs=1.0)
    assert undiscovered_bound(2, 2) == 12
    assert piecewise_bound(2, 2, 2, 1000, 0.1, 0.05) == pytest.approx(k_class_bound(2, 2, 1000, 0.1, 0.05) + 12)


def test_other_bounds():
    assert naive_lower_bound(0.01, 0.001) == pytest.approx(95.0)
    assert perceptron_rate(1000, 0.1, 1, 0.05) == pytest.approx(1e4 ** (2 / 3) + math.log(7 / 0.05))
    assert margin_mistake_bound(2, 3, 1.0, 0.5) == pytest.approx(20 * 4 + 6)
    assert bandit_regret_bound(3, 2, 2, 100, 1.0, 0.05) > 0


# -- disagreement mass ------------------------------------------------------

def test_disagreement_full_box_is_everything():
    p, se = disagreement_mass(HalfspacePolytope.box(3), 2000, np.random.default_rng(0))
    assert p == 1.0 and se == 0.0


def test_disagreement_thin_wedge_matches_angle():
    # w1 in [0.9, 1], |w2| <= 0.01: disputed iff |x2| > 90 |x1|
    poly = HalfspacePolytope([[1, 0], [-1, 0], [0, 1], [0, -1]], [1.0, -0.9, 0.01, 0.01])
    exact = 2 * math.atan(1 / 90) / math.pi
    p, se = disagreement_mass(poly, 200_000, np.random.default_rng(1))
    assert abs(p - exact) <= 4 * math.sqrt(exact * (1 - exact) / 200_000)


def test_disagreement_methods_agree():
    poly = HalfspacePolytope([[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1]], [1.0, -0.5, 0.3, 0.1, 1.1])
    a = disagreement_mass(poly, 400, np.random.default_rng(3), method="vertices")
    b = disagreement_mass(poly, 400, np.random.default_rng(3), method="lp")
    assert a == b
    with pytest.raises(ValueError):
        disagreement_mass(poly, 10, np.random.default_rng(0), method="guess")


# -- runs -------------------------------------------------------------------

def test_trial_rng_spawn_keys():
    a = trial_rng(7, 2, "labels").random(4)
    b = np.random.default_rng(np.random.SeedSequence(7, spawn_key=(2, 2))).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(trial_rng(7, 2, "contexts").random(4), a)


def test_runs_are_bitwise_reproducible():
    cfg = _cfg()
    t1, s1 = run_experiment(cfg, 1)
    t2, s2 = run_experiment(cfg, 1)
    assert t1.to_csv() == t2.to_csv()
    assert s1.to_json() == s2.to_json()
    assert t1.to_csv() != run_experiment(cfg, 2)[0].to_csv()


def test_trace_accounting_and_csv_roundtrip(tmp_path):
    trace, summary = run_experiment(_cfg())
    assert trace.to_csv().splitlines()[0] == ",".join(CSV_COLUMNS)
    assert summary.total_mistakes == sum(trace.mistake) == trace.cum_mistakes[-1]
    assert trace.mistakes_at(100) == sum(trace.mistake[:100])
    assert summary.decay["passed"]
    assert summary.stats["n_recomputes"] == summary.decay["n_events"]
    path = tmp_path / "trace.csv"
    trace.to_csv(path)
    back = Trace.read_csv(path)
    assert back.to_csv() == trace.to_csv()
    names = [b["bound_name"] for b in summary.bounds]
    assert names == ["warmup"] and summary.bounds[0]["satisfied"]


def test_zero_horizon_run():
    trace, summary = run_experiment(_cfg(horizon=0))
    assert len(trace) == 0 and summary.total_mistakes == 0
    assert summary.bounds == []
    assert trace.to_csv() == ",".join(CSV_COLUMNS) + "\n"


def test_corrupted_round_is_reported():
    from smoothcut.learners import NonRealizable

    cfg = _cfg(adversary={"kind": "fixed", "params": {"point": [0.5, 0.25]}},
               corruption={"flip_times": [2]}, horizon=10)
    with pytest.raises(NonRealizable) as err:
        run_experiment(cfg)
    assert err.value.round == 2


def test_fit_slope():
    assert fit_slope([1, 2, 3], [5, 5, 5]) == 0.0
    assert fit_slope([1, 2, 3], [1, 3, 5]) == pytest.approx(2.0)
    assert math.isnan(fit_slope([1, 1], [0, 3]))


def test_sweep_prefix_horizons_and_csv():
    cfg = _cfg(trials=2)
    res = sweep(cfg, horizons=[100, 300])
    assert len(res.rows) == 4
    full = {r["trial"]: run_experiment(cfg, r["trial"])[0] for r in res.rows}
    for r in res.rows:
        assert r["mistakes"] == full[r["trial"]].mistakes_at(r["horizon"])
    assert res.to_csv().splitlines()[0] == "param_value,sigma,horizon,trial,mistakes"
    again = sweep(cfg, horizons=[100, 300], n_jobs=2)
    assert again.to_csv() == res.to_csv()


def test_sweep_over_adversary_parameter():
    cfg = _cfg(horizon=200)
    res = sweep(cfg, horizons=[200], param="eps", values=[0.5, 0.2])
    sig = [m["sigma"] for m in res.means]
    assert sig == pytest.approx([0.25, 0.04])
    assert not math.isnan(res.slope_vs_log_inv_sigma)
