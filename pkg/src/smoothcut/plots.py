"""Deterministic SVG figures for traces and sweeps."""
from __future__ import annotations

import csv
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .harness import DECAY_FACTOR, Trace  # noqa: E402

_RC = {"svg.hashsalt": "smoothcut", "svg.fonttype": "none", "figure.dpi": 100}


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def plot_cumulative_mistakes(trace: Trace, path) -> None:
    """Cumulative mistakes against the round index on a log x-axis."""
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        if len(trace):
            ax.plot(trace.t, trace.cum_mistakes, color="tab:blue", lw=1.2)
            ax.set_xscale("log")
        ax.set_xlabel("round t")
        ax.set_ylabel("cumulative mistakes")
        ax.grid(True, alpha=0.3)
        _save(fig, path)


def plot_log_volume(trace: Trace, path, c: float = DECAY_FACTOR) -> None:
    """Log-volume after each recompute, with the ``(8/9)^m`` reference line."""
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        lv = np.array(trace.log_volume, dtype=float)
        events = np.flatnonzero(np.asarray(trace.recompute, dtype=bool))
        if len(trace) and math.isfinite(trace.initial_log_volume):
            m = np.arange(len(events) + 1)
            vals = np.concatenate([[trace.initial_log_volume], lv[events]])
            ax.plot(m, vals, "o-", color="tab:blue", ms=3, lw=1, label="John ellipsoid")
            ax.plot(m, trace.initial_log_volume + m * math.log(c), "--", color="tab:red",
                    lw=1, label="(8/9)^m reference")
            ax.legend()
        ax.set_xlabel("recompute index m")
        ax.set_ylabel("log volume")
        ax.grid(True, alpha=0.3)
        _save(fig, path)


def read_sweep_csv(path) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        header = reader.fieldnames
    need = {"param_value", "sigma", "horizon", "trial", "mistakes"}
    if not header:
        raise ValueError(f"{path}: empty file")
    if not need <= set(header):
        raise ValueError(f"{path}: columns must include {sorted(need)}")
    try:
        return [{"sigma": float(r["sigma"]), "horizon": int(r["horizon"]),
                 "mistakes": float(r["mistakes"])} for r in rows]
    except (TypeError, ValueError) as err:
        raise ValueError(f"{path}: {err}") from None


def plot_mistakes_vs_sigma(rows: list[dict], path) -> None:
    """Mean mistakes at the largest horizon against ``log(1/sigma)``."""
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        rows = [r for r in rows if r["sigma"] > 0]
        if rows:
            top = max(r["horizon"] for r in rows)
            sigmas = sorted({r["sigma"] for r in rows if r["horizon"] == top}, reverse=True)
            means = [np.mean([r["mistakes"] for r in rows if r["horizon"] == top and r["sigma"] == s])
                     for s in sigmas]
            ax.plot([math.log(1 / s) for s in sigmas], means, "o-", color="tab:blue")
            ax.set_title(f"T = {top}")
        ax.set_xlabel("log(1/sigma)")
        ax.set_ylabel("mean mistakes")
        ax.grid(True, alpha=0.3)
        _save(fig, path)
