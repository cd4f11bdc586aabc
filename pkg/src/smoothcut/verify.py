"""Batch invariant checks behind ``smoothcut verify``.

Each check returns a :class:`CheckResult`; sizes are parameters so the
same code serves a quick CLI pass and the full acceptance batch.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .convex_geometry import (
    DEFAULT_GAP,
    HalfspacePolytope,
    InfeasibleOrDegenerate,
    max_inscribed_ellipsoid,
    sandwich_check,
)
from .erm_oracle import ErmInfeasible, erm_partition, exhaustive_min_clusters

DECAY_LIMIT = 8.0 / 9.0 + 1e-3


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict)


def random_polytope(d: int, rng: np.random.Generator, n_cuts: int | None = None) -> HalfspacePolytope:
    """The box ``[-1, 1]^d`` cut by random halfspaces that keep a random interior point.

    Half of the cuts pass through the origin (as version-space cuts do),
    the rest are affine with a random positive slack at the kept point.
    """
    if n_cuts is None:
        n_cuts = int(rng.integers(1, 3 * d + 1))
    keep = rng.uniform(-0.5, 0.5, size=d)
    poly = HalfspacePolytope.box(d)
    for k in range(n_cuts):
        a = rng.standard_normal(d)
        a /= np.linalg.norm(a)
        if k % 2 == 0:
            if a @ keep > 0:
                a = -a
            b = 0.0
            if a @ keep > -1e-3:
                b = float(a @ keep) + 0.05
        else:
            b = float(a @ keep) + rng.uniform(0.05, 1.0)
        poly = poly.cut(a, b, k)
    return poly


def check_analytic(dims=range(2, 7)) -> CheckResult:
    """Boxes give balls, anisotropic boxes give matching diagonals."""
    t0 = time.perf_counter()
    worst_c, worst_B = 0.0, 0.0
    for d in dims:
        E = max_inscribed_ellipsoid(HalfspacePolytope.box(d))
        worst_c = max(worst_c, float(np.linalg.norm(E.center)))
        worst_B = max(worst_B, float(np.linalg.norm(E.shape - np.eye(d))))
        widths = np.linspace(1.0, 0.3, d)
        E = max_inscribed_ellipsoid(HalfspacePolytope.box(d, widths))
        worst_c = max(worst_c, float(np.linalg.norm(E.center)))
        worst_B = max(worst_B, float(np.linalg.norm(E.shape - np.diag(widths))))
    ok = worst_c <= 1e-6 and worst_B <= 1e-5
    return CheckResult("analytic boxes", ok,
                       f"max |c| = {worst_c:.2e}, max shape error = {worst_B:.2e}",
                       time.perf_counter() - t0, {"center": worst_c, "shape": worst_B})


def check_center_cut_decay(n_pairs: int, rng: np.random.Generator, dims=(2, 3, 4, 5),
                  gap: float = DEFAULT_GAP) -> CheckResult:
    """Cut random polytopes through their John center; volume must drop by 8/9."""
    t0 = time.perf_counter()
    worst = 0.0
    fails = 0
    for k in range(n_pairs):
        d = dims[k % len(dims)]
        poly = random_polytope(d, rng)
        E = max_inscribed_ellipsoid(poly, gap=gap)
        u = rng.standard_normal(d)
        u /= np.linalg.norm(u)
        cut = poly.cut(u, float(u @ E.center), 10_000)
        try:
            E2 = max_inscribed_ellipsoid(cut, gap=gap)
        except InfeasibleOrDegenerate:
            fails += 1
            continue
        ratio = math.exp(E2.log_volume - E.log_volume)
        worst = max(worst, ratio)
        if ratio > DECAY_LIMIT:
            fails += 1
    return CheckResult("center-cut decay", fails == 0,
                       f"{n_pairs} pairs, worst ratio {worst:.4f}, failures {fails}",
                       time.perf_counter() - t0, {"worst_ratio": worst, "failures": fails})


def check_sandwich(n_polytopes: int, n_samples: int, rng: np.random.Generator,
                   dims=(2, 3, 4, 5, 6)) -> CheckResult:
    """John ellipsoid inside the polytope, polytope inside its d-fold dilation."""
    t0 = time.perf_counter()
    inner = outer = 0
    worst = 0.0
    for k in range(n_polytopes):
        d = dims[k % len(dims)]
        poly = random_polytope(d, rng)
        E = max_inscribed_ellipsoid(poly)
        rep = sandwich_check(poly, E, n_samples, rng)
        inner += rep.inner_violations
        outer += rep.outer_violations
        worst = max(worst, rep.max_outer_ratio)
    return CheckResult("sandwich", inner == 0 and outer == 0,
                       f"{n_polytopes} polytopes x {n_samples} samples, inner {inner}, outer {outer}, "
                       f"max |x|_E / d = {worst:.3f}",
                       time.perf_counter() - t0, {"inner": inner, "outer": outer})


def random_erm_instance(rng: np.random.Generator, max_m: int = 8):
    """A small piecewise-linear dataset, sometimes with one corrupted label."""
    d = int(rng.integers(1, 3))
    K = int(rng.integers(1, 4))
    m = int(rng.integers(1, min(max_m, K * (d + 1)) + 1))
    n_true = int(rng.integers(1, K + 1))
    A = rng.integers(-3, 4, size=(n_true, d)).astype(float)
    X = rng.integers(-4, 5, size=(m, d)).astype(float) / 4.0
    which = rng.integers(0, n_true, size=m)
    y = np.einsum("ij,ij->i", X, A[which])
    if rng.random() < 0.25:
        y[int(rng.integers(m))] += 1.0
    return X, y, K


def check_erm(n_instances: int, rng: np.random.Generator) -> CheckResult:
    """Exact ERM agrees with exhaustive partition search on cluster count."""
    t0 = time.perf_counter()
    mismatches = []
    for k in range(n_instances):
        X, y, K = random_erm_instance(rng)
        ref = exhaustive_min_clusters(X, y, K)
        try:
            got = erm_partition(X, y, K).n
        except ErmInfeasible:
            got = None
        if got != ref:
            mismatches.append({"index": k, "expected": ref, "got": got})
    return CheckResult("erm vs exhaustive", not mismatches,
                       f"{n_instances} instances, {len(mismatches)} mismatches",
                       time.perf_counter() - t0, {"mismatches": mismatches})


def run_all(seed: int = 0, quick: bool = True, gap: float = DEFAULT_GAP) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    n_pairs, n_poly, n_samp, n_erm = (200, 20, 2000, 100) if quick else (1000, 100, 10_000, 300)
    return [
        check_analytic(),
        check_center_cut_decay(n_pairs, rng, gap=gap),
        check_sandwich(n_poly, n_samp, rng),
        check_erm(n_erm, rng),
    ]


def format_table(results: list[CheckResult]) -> str:
    w = max(len(r.name) for r in results)
    lines = [f"{'check':<{w}}  result  time    detail"]
    for r in results:
        lines.append(f"{r.name:<{w}}  {'PASS' if r.passed else 'FAIL':<6}  {r.seconds:6.1f}s  {r.detail}")
    return "\n".join(lines)
