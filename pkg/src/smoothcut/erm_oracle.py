"""Exact partition of a small labelled set into at most K linear fits.

Pieces are linear through the origin, ``g(x) = <a, x>``, or linear in a
user-supplied feature map (for polynomial pieces). A class whose members
are pinned down by their values on ``ell`` generic points is handled by
enumerating ``ell``-subsets, solving for the unique member through each,
and then searching for a minimum cover.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

RANK_RTOL = 1e-10


class ErmInfeasible(RuntimeError):
    """No partition into at most K exactly fitted clusters exists."""

    def __init__(self, message: str, round: int | None = None):
        super().__init__(message if round is None else f"round {round}: {message}")
        self.detail = message
        self.round = round


class DegenerateSystem(np.linalg.LinAlgError):
    """An ``ell``-subset of points does not determine a unique function."""


@dataclass
class ErmSolution:
    """``functions[i]`` fits every point whose index is in ``clusters[i]``."""

    functions: list[np.ndarray]
    clusters: list[list[int]]

    @property
    def n(self) -> int:
        return len(self.functions)


def _design(X: np.ndarray, features: Optional[Callable]) -> np.ndarray:
    if features is None:
        return np.asarray(X, dtype=float)
    return np.vstack([np.asarray(features(x), dtype=float).reshape(-1) for x in X])


def fits(coef: np.ndarray, Phi: np.ndarray, y: np.ndarray, fit_tol: float) -> np.ndarray:
    """Boolean mask of rows fitted by ``coef`` within a relative tolerance."""
    return np.abs(Phi @ coef - y) <= fit_tol * np.maximum(1.0, np.abs(y))


def solve_subset(Phi_S: np.ndarray, y_S: np.ndarray) -> np.ndarray:
    """Unique coefficients through a square system; DegenerateSystem if singular."""
    sv = np.linalg.svd(Phi_S, compute_uv=False)
    if sv.size == 0 or sv[-1] <= RANK_RTOL * max(sv[0], 1.0):
        raise DegenerateSystem("rank-deficient subset")
    return np.linalg.solve(Phi_S, y_S)


def _same_function(a: np.ndarray, b: np.ndarray, fit_tol: float) -> bool:
    return float(np.linalg.norm(a - b)) <= fit_tol * max(1.0, float(np.linalg.norm(a)))


def candidate_functions(Phi: np.ndarray, y: np.ndarray, ell: int,
                        fit_tol: float) -> tuple[list[np.ndarray], list[int]]:
    """Distinct functions through every general-position ``ell``-subset, with cover masks."""
    m = Phi.shape[0]
    funcs: list[np.ndarray] = []
    masks: list[int] = []
    for S in itertools.combinations(range(m), ell):
        idx = list(S)
        try:
            g = solve_subset(Phi[idx], y[idx])
        except DegenerateSystem:
            continue
        cov = fits(g, Phi, y, fit_tol)
        mask = int(sum(1 << i for i in np.flatnonzero(cov)))
        if any(mk == mask or _same_function(g, h, fit_tol) for h, mk in zip(funcs, masks)):
            continue
        funcs.append(g)
        masks.append(mask)
    return funcs, masks


def _fallback_fit(Phi: np.ndarray, y: np.ndarray, idx: list[int], fit_tol: float):
    g = np.linalg.lstsq(Phi[idx], y[idx], rcond=None)[0]
    if np.all(fits(g, Phi[idx], y[idx], fit_tol)):
        return g
    return None


def erm_partition(X, y, K: int, ell: Optional[int] = None, fit_tol: float = 1e-8,
                  features: Optional[Callable] = None) -> ErmSolution:
    """Partition ``(X, y)`` into the fewest (at most ``K``) exactly fitted clusters.

    Among minimum covers the first one in canonical candidate order is
    returned, so the result is deterministic. Raises ErmInfeasible when no
    cover with at most ``K`` clusters exists.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).reshape(-1)
    m = y.shape[0]
    Phi = _design(X, features) if m else np.zeros((0, 1))
    dim = Phi.shape[1] if m else (X.shape[1] if X.ndim == 2 else 1)
    ell = dim if ell is None else int(ell)
    if ell != dim:
        raise ValueError(f"ell={ell} but pieces have {dim} coefficients")
    if m > K * (ell + 1):
        raise ValueError(f"ERM input of size {m} exceeds K(ell+1) = {K * (ell + 1)}")
    if m == 0:
        return ErmSolution([], [])

    funcs, masks = candidate_functions(Phi, y, ell, fit_tol) if m >= ell else ([], [])
    everything = (1 << m) - 1
    largest = max([bin(mk).count("1") for mk in masks] + [ell])
    if any(not any(mk >> p & 1 for mk in masks) for p in range(m)):
        largest = m  # fallback clusters for degenerate points can be any size

    def options(p: int, uncovered: int):
        hit = False
        for g, mk in zip(funcs, masks):
            if mk >> p & 1:
                hit = True
                yield g, mk & uncovered
        if not hit:
            g = _fallback_fit(Phi, y, [p], fit_tol)
            if g is not None:
                mk = int(sum(1 << i for i in np.flatnonzero(fits(g, Phi, y, fit_tol))))
                yield g, (mk & uncovered) | (1 << p)

    def search(uncovered: int, left: int):
        if uncovered == 0:
            return []
        if left == 0 or bin(uncovered).count("1") > left * largest:
            return None
        p = (uncovered & -uncovered).bit_length() - 1
        for g, cluster in options(p, uncovered):
            rest = search(uncovered & ~cluster, left - 1)
            if rest is not None:
                return [(g, cluster)] + rest
        return None

    if m < ell:
        g = _fallback_fit(Phi, y, list(range(m)), fit_tol)
        chosen = [(g, everything)] if g is not None else None
    else:
        chosen = None
        for n in range(1, K + 1):
            chosen = search(everything, n)
            if chosen is not None:
                break
    if chosen is None:
        raise ErmInfeasible(f"no partition of {m} points into <= {K} linear pieces")

    functions = [g for g, _ in chosen]
    clusters = [[i for i in range(m) if mk >> i & 1] for _, mk in chosen]
    functions, clusters = _merge_duplicates(functions, clusters, fit_tol)
    sol = ErmSolution(functions, clusters)
    validate_solution(sol, Phi, y, K, fit_tol)
    return sol


def _merge_duplicates(functions, clusters, fit_tol):
    out_f: list[np.ndarray] = []
    out_c: list[list[int]] = []
    for g, c in zip(functions, clusters):
        for k, h in enumerate(out_f):
            if _same_function(h, g, fit_tol):
                out_c[k] = sorted(out_c[k] + c)
                break
        else:
            out_f.append(g)
            out_c.append(list(c))
    return out_f, out_c


def validate_solution(sol: ErmSolution, Phi: np.ndarray, y: np.ndarray, K: int,
                      fit_tol: float) -> None:
    """Independent re-check of cover, exact fit and distinctness."""
    m = y.shape[0]
    if sol.n > K:
        raise AssertionError(f"{sol.n} clusters exceed K={K}")
    seen = sorted(i for c in sol.clusters for i in c)
    if seen != list(range(m)):
        raise AssertionError("clusters do not partition the dataset")
    for g, c in zip(sol.functions, sol.clusters):
        if c and not np.all(fits(g, Phi[c], y[c], fit_tol)):
            raise AssertionError("a cluster is not fitted exactly")
    for a, b in itertools.combinations(sol.functions, 2):
        if _same_function(a, b, fit_tol):
            raise AssertionError("duplicate functions in solution")


def exhaustive_min_clusters(X, y, K: int, fit_tol: float = 1e-8,
                            features: Optional[Callable] = None) -> Optional[int]:
    """Minimum number of exactly fitted blocks over all set partitions, or None.

    Reference implementation for tests: every subset is tested once with a
    least-squares fit, then all set partitions with at most ``K`` blocks
    are enumerated.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).reshape(-1)
    m = y.shape[0]
    if m == 0:
        return 0
    Phi = _design(X, features)
    ok = np.zeros(1 << m, dtype=bool)
    for mask in range(1, 1 << m):
        idx = [i for i in range(m) if mask >> i & 1]
        g = np.linalg.lstsq(Phi[idx], y[idx], rcond=None)[0]
        ok[mask] = bool(np.all(fits(g, Phi[idx], y[idx], fit_tol)))

    best = None

    def rec(i: int, blocks: list[int]):
        nonlocal best
        if best is not None and len(blocks) >= best and i < m:
            return
        if i == m:
            if all(ok[b] for b in blocks) and (best is None or len(blocks) < best):
                best = len(blocks)
            return
        for k in range(len(blocks)):
            blocks[k] |= 1 << i
            if ok[blocks[k]]:
                rec(i + 1, blocks)
            blocks[k] &= ~(1 << i)
        if len(blocks) < K:
            blocks.append(1 << i)
            rec(i + 1, blocks)
            blocks.pop()

    rec(0, [])
    return best


def determination_check(g, g_other, points, tol: float = 1e-8) -> bool:
    """True iff the two coefficient vectors give equal values on every point."""
    P = np.asarray(points, dtype=float)
    if P.size == 0:
        return True
    if P.ndim == 1:
        P = P[None, :]
    a = P @ np.asarray(g, dtype=float)
    b = P @ np.asarray(g_other, dtype=float)
    return bool(np.all(np.abs(a - b) <= tol * np.maximum(1.0, np.abs(a))))
