"""Config parsing, snapshots, plots and the command-line front end."""
import json
import os
import pathlib

import numpy as np
import pytest

from smoothcut import snapshots
from smoothcut.adversaries import KClassOracle, PiecewiseOracle, sample_uniform_ball
from smoothcut.cli import main
from smoothcut.config import ConfigError, config_from_dict, dump_config, load_config
from smoothcut.harness import run_experiment
from smoothcut.learners import (
    AffineLiftClassifier,
    IGWBandit,
    JohnLinearClassifier,
    KClassClassifier,
    NaiveThresholdClassifier,
    Perceptron,
    PiecewiseRegressor,
)
from smoothcut.plots import plot_cumulative_mistakes, plot_log_volume

CONFIGS = pathlib.Path(__file__).resolve().parents[1] / "configs"

MINIMAL = {"dim": 2, "horizon": 50, "learner": {"kind": "john_linear"},
           "adversary": {"kind": "uniform"}, "oracle": {"kind": "linear"}}


# -- config -----------------------------------------------------------------

def test_unknown_keys_are_errors():
    with pytest.raises(ConfigError, match="unknown key"):
        config_from_dict({**MINIMAL, "horizn": 3})
    with pytest.raises(ConfigError, match="output"):
        config_from_dict({**MINIMAL, "output": {"dir": "x", "colour": 1}})


def test_missing_and_mistyped_values():
    with pytest.raises(ConfigError, match="missing"):
        config_from_dict({"dim": 2, "horizon": 5, "learner": {"kind": "john_linear"}})
    with pytest.raises(ConfigError, match="integer"):
        config_from_dict({**MINIMAL, "horizon": 2.5})
    with pytest.raises(ConfigError):
        config_from_dict({**MINIMAL, "delta": 1.5})
    with pytest.raises(ConfigError):
        config_from_dict([1, 2])


def test_config_roundtrip(tmp_path):
    cfg = config_from_dict({**MINIMAL, "sweep": {"horizons": [10, 50]}, "corruption": {"flip_times": [4]}})
    path = tmp_path / "c.yaml"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg
    _, summary = run_experiment(cfg)
    assert config_from_dict(summary.config) == cfg


def test_shipped_configs_parse():
    for p in sorted(CONFIGS.glob("*.yaml")):
        load_config(p)


def test_malformed_yaml(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("dim: [1, 2\n")
    with pytest.raises(ConfigError, match="malformed"):
        load_config(p)
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "none.yaml")


# -- snapshots --------------------------------------------------------------

def _drive(learner, stream):
    return [learner.update(x, y).prediction for x, y in stream]


def _binary_stream(d, n, seed):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(d)
    X = sample_uniform_ball(d, rng, size=n)
    return [(x, 1 if w @ x >= 0 else -1) for x in X]


@pytest.mark.parametrize("make,d", [
    (JohnLinearClassifier, 3),
    (lambda: AffineLiftClassifier(random_state=0), 2),
    (Perceptron, 2),
    (NaiveThresholdClassifier, 1),
])
def test_binary_learners_resume_identically(make, d):
    stream = _binary_stream(d, 80, 1)
    if d == 1:
        stream = [(x, 1 if x[0] >= 0.2 else -1) for x, _ in stream]
    a = make()
    _drive(a, stream[:40])
    b = snapshots.loads(snapshots.dumps(a))
    assert type(b) is type(a)
    assert _drive(a, stream[40:]) == _drive(b, stream[40:])
    assert snapshots.dumps(a) == snapshots.dumps(b)


def test_unfitted_learner_roundtrip():
    a = JohnLinearClassifier(gap=1e-5)
    b = snapshots.loads(snapshots.dumps(a))
    assert b.get_params() == a.get_params()


def test_kclass_and_piecewise_resume(tmp_path):
    rng = np.random.default_rng(2)
    ko = KClassOracle.random(3, 2, rng)
    po = PiecewiseOracle.random(2, 2, rng)
    X = sample_uniform_ball(2, rng, size=120)
    k, p = KClassClassifier(3), PiecewiseRegressor(2)
    for x in X[:60]:
        k.update(x, ko(x))
        p.update(x, po(x))
    snapshots.save(k, tmp_path / "k.json")
    snapshots.save(p, tmp_path / "p.json")
    k2, p2 = snapshots.load(tmp_path / "k.json"), snapshots.load(tmp_path / "p.json")
    assert k2.binary_updates_ == k.binary_updates_
    for x in X[60:]:
        assert k.update(x, ko(x)).prediction == k2.update(x, ko(x)).prediction
        assert p.update(x, po(x)).prediction == p2.update(x, po(x)).prediction


def test_bandit_roundtrip_with_generator():
    bandit = IGWBandit(n_actions=3, gamma=1.0, gamma_schedule="sqrt_t")
    rng = np.random.default_rng(4)
    for x in sample_uniform_ball(2, rng, size=20):
        a, _ = bandit.decide(x, rng)
        bandit.reward(x, a, float(x[0] * (a + 1)))
    state = {"bandit": bandit, "rng": rng}
    copy = snapshots.restore(json.loads(json.dumps(snapshots.snapshot(PiecewiseRegressor(2)))))
    assert isinstance(copy, PiecewiseRegressor)
    b2 = snapshots.loads(snapshots.dumps(bandit))
    rng2 = snapshots.loads(snapshots.dumps(state["rng"]))
    for x in sample_uniform_ball(2, np.random.default_rng(5), size=10):
        assert bandit.decide(x, rng)[0] == b2.decide(x, rng2)[0]


def test_callables_and_foreign_state_are_refused():
    learner = PiecewiseRegressor(2, features=lambda x: x)
    with pytest.raises(snapshots.SnapshotError):
        snapshots.dumps(learner)
    with pytest.raises(snapshots.SnapshotError):
        snapshots.restore({"format_version": 99, "state": None})
    with pytest.raises(snapshots.SnapshotError):
        snapshots.restore({"format_version": 1, "state": {"__object__": "os.system", "attrs": {}}})


def test_special_values_survive():
    obj = {"nan": float("nan"), "tuple": (1, 2), "keys": {(0, 1): 3}, "arr": np.arange(4.0).reshape(2, 2)}
    back = snapshots.restore(snapshots.snapshot(obj))
    assert np.isnan(back["nan"]) and back["tuple"] == (1, 2) and back["keys"] == {(0, 1): 3}
    assert np.array_equal(back["arr"], obj["arr"]) and back["arr"].dtype == np.float64


# -- plots ------------------------------------------------------------------

def test_svg_output_is_deterministic(tmp_path):
    trace, _ = run_experiment(config_from_dict(MINIMAL))
    for fn in (plot_cumulative_mistakes, plot_log_volume):
        fn(trace, tmp_path / "a.svg")
        fn(trace, tmp_path / "b.svg")
        a, b = (tmp_path / "a.svg").read_bytes(), (tmp_path / "b.svg").read_bytes()
        assert a == b and a.lstrip().startswith(b"<?xml")


# -- command line -----------------------------------------------------------

def _write(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(dump_config(config_from_dict(data)))
    return str(p)


def test_cli_run_writes_outputs(tmp_path, capsys):
    cfg = _write(tmp_path, MINIMAL)
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out), "--trials", "2"]) == 0
    assert sorted(os.listdir(out)) == ["summary_0.json", "summary_1.json", "trace_0.csv", "trace_1.csv"]
    summary = json.loads((out / "summary_0.json").read_text())
    assert summary["total_mistakes"] >= 0 and summary["bounds"][0]["bound_name"] == "warmup"
    assert "trial 1:" in capsys.readouterr().out


def test_cli_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("SMOOTHCUT_OUT", str(tmp_path / "env"))
    assert main(["run", "--config", _write(tmp_path, MINIMAL)]) == 0
    assert (tmp_path / "env" / "trace_0.csv").exists()


def test_cli_config_errors(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.yaml")]) == 1
    bad = tmp_path / "bad.yaml"
    bad.write_text("dim: 2\nhorizon: 5\nlearner: {kind: nope}\nadversary: {kind: uniform}\n")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "config error" in capsys.readouterr().err


def test_cli_contradiction_exits_two(tmp_path, capsys):
    code = main(["run", "--config", str(CONFIGS / "contradictory.yaml"), "--out", str(tmp_path)])
    assert code == 2
    assert "NonRealizable at round 2" in capsys.readouterr().err


def test_cli_sweep_and_plot(tmp_path, capsys):
    cfg = _write(tmp_path, {**MINIMAL, "adversary": {"kind": "eps_ball", "params": {"eps": 0.5}},
                            "sweep": {"horizons": [20, 50], "param": "eps", "values": [0.5, 0.25]}})
    out = tmp_path / "sw"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "sweep.csv").exists() and (out / "sweep.json").exists()
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["plot", str(out / "sweep.csv"), str(out / "trace_0.csv"), "--out", str(out)]) == 0
    printed = capsys.readouterr().out.split()
    assert [os.path.basename(p) for p in printed] == ["sweep_sigma.svg", "trace_0_mistakes.svg",
                                                      "trace_0_volume.svg"]


def test_cli_plot_rejects_malformed(tmp_path):
    bad = tmp_path / "junk.csv"
    bad.write_text("a,b\n1,2\n")
    assert main(["plot", str(bad), "--out", str(tmp_path)]) == 1
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["plot", str(empty), "--out", str(tmp_path)]) == 1
    assert main(["plot", str(tmp_path / "absent.csv"), "--out", str(tmp_path)]) == 1


def test_cli_plot_empty_trace(tmp_path):
    cfg = _write(tmp_path, {**MINIMAL, "horizon": 0})
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert main(["plot", str(tmp_path / "trace_0.csv"), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "trace_0_mistakes.svg").stat().st_size > 0


def test_cli_verify_quick(capsys):
    assert main(["verify", "--seed", "1"]) == 0
    table = capsys.readouterr().out
    assert "FAIL" not in table and "erm vs exhaustive" in table
