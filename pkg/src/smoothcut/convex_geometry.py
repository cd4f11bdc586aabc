"""Halfspace polytopes and their maximum-volume inscribed ellipsoids.

The solver is a log-barrier Newton method on the convex program

    maximize  log det B
    subject to ||B a_i|| + <a_i, c> <= b_i   for every facet (a_i, b_i)

over a center ``c`` and a symmetric positive definite shape ``B``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

BOX_TAG = -1

DEFAULT_TOL = 1e-8
DEFAULT_GAP = 1e-6
DEFAULT_FLOOR = 1e-10


class InfeasibleOrDegenerate(RuntimeError):
    """No ellipsoid with eigenvalues above the floor fits inside the polytope."""


class LPFailure(RuntimeError):
    """The LP subroutine did not reach an optimal or infeasible verdict."""

    def __init__(self, message: str, status: int | None = None, detail: str = ""):
        super().__init__(message if not detail else f"{message}: {detail}")
        self.status = status
        self.detail = detail


def log_unit_ball_volume(d: int) -> float:
    """log of the Lebesgue volume of the unit ball in R^d."""
    return 0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d + 1.0)


class HalfspacePolytope:
    """Intersection of halfspaces ``<normal, w> <= offset``.

    Instances are immutable: :meth:`cut` returns a new polytope. Each
    constraint carries an integer tag, ``BOX_TAG`` for the bounding-box
    facets and the round index for data cuts.
    """

    __slots__ = ("_normals", "_offsets", "_tags")

    def __init__(self, normals, offsets, tags=None):
        normals = np.array(normals, dtype=float, ndmin=2)
        offsets = np.array(offsets, dtype=float).reshape(-1)
        if normals.shape[0] != offsets.shape[0]:
            raise ValueError("normals and offsets disagree on the number of constraints")
        if normals.shape[1] < 1:
            raise ValueError("dimension must be positive")
        if tags is None:
            tags = np.zeros(offsets.shape[0], dtype=np.int64)
        tags = np.array(tags, dtype=np.int64).reshape(-1)
        if tags.shape[0] != offsets.shape[0]:
            raise ValueError("one tag per constraint is required")
        for arr in (normals, offsets, tags):
            arr.setflags(write=False)
        self._normals = normals
        self._offsets = offsets
        self._tags = tags

    @classmethod
    def box(cls, d: int, half_widths=1.0) -> "HalfspacePolytope":
        """The box ``|w_i| <= half_widths[i]`` tagged as permanent facets."""
        if d < 1:
            raise ValueError("d must be >= 1")
        h = np.broadcast_to(np.asarray(half_widths, dtype=float), (d,))
        if np.any(h <= 0):
            raise ValueError("half widths must be positive")
        eye = np.eye(d)
        return cls(np.vstack([eye, -eye]), np.concatenate([h, h]),
                   np.full(2 * d, BOX_TAG, dtype=np.int64))

    @property
    def dim(self) -> int:
        return self._normals.shape[1]

    @property
    def n_constraints(self) -> int:
        return self._normals.shape[0]

    @property
    def normals(self) -> np.ndarray:
        return self._normals

    @property
    def offsets(self) -> np.ndarray:
        return self._offsets

    @property
    def tags(self) -> np.ndarray:
        return self._tags

    def cut(self, normal, offset: float, tag: int = 0) -> "HalfspacePolytope":
        """Return ``self ∩ {<normal, w> <= offset}``."""
        a = np.asarray(normal, dtype=float).reshape(-1)
        if a.shape[0] != self.dim:
            raise ValueError(f"normal has length {a.shape[0]}, expected {self.dim}")
        if not np.linalg.norm(a) > 0:
            raise ValueError("cut normal must be nonzero")
        return HalfspacePolytope(
            np.vstack([self._normals, a[None, :]]),
            np.append(self._offsets, float(offset)),
            np.append(self._tags, int(tag)),
        )

    def subset(self, keep) -> "HalfspacePolytope":
        keep = np.asarray(keep)
        return HalfspacePolytope(self._normals[keep], self._offsets[keep], self._tags[keep])

    def contains(self, point, slack: float = 0.0) -> bool:
        p = np.asarray(point, dtype=float).reshape(-1)
        return bool(np.all(self._normals @ p <= self._offsets + slack))

    def __eq__(self, other) -> bool:
        if not isinstance(other, HalfspacePolytope):
            return NotImplemented
        return (np.array_equal(self._normals, other._normals)
                and np.array_equal(self._offsets, other._offsets)
                and np.array_equal(self._tags, other._tags))

    __hash__ = None

    def __repr__(self) -> str:
        return f"HalfspacePolytope(dim={self.dim}, n_constraints={self.n_constraints})"


@dataclass(frozen=True)
class Ellipsoid:
    """The set ``{center + shape @ u : ||u|| <= 1}``."""

    center: np.ndarray
    shape: np.ndarray
    log_volume: float
    gap: float = 0.0
    iterations: int = 0

    @classmethod
    def from_shape(cls, center, shape, **kw) -> "Ellipsoid":
        c = np.array(center, dtype=float).reshape(-1)
        B = np.array(shape, dtype=float)
        B = 0.5 * (B + B.T)
        sign, logdet = np.linalg.slogdet(B)
        if sign <= 0:
            raise InfeasibleOrDegenerate("shape matrix is not positive definite")
        c.setflags(write=False)
        B.setflags(write=False)
        return cls(c, B, log_unit_ball_volume(c.shape[0]) + logdet, **kw)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def contains(self, point, scale: float = 1.0, slack: float = 0.0) -> bool:
        z = np.linalg.solve(self.shape, np.asarray(point, dtype=float) - self.center)
        return bool(np.linalg.norm(z) <= scale * (1.0 + slack))


def ellipsoid_volume(E: Ellipsoid) -> float:
    return math.exp(E.log_volume)


def dilate(E: Ellipsoid, factor: float) -> Ellipsoid:
    """Scale ``E`` by ``factor`` about its center."""
    if not factor > 0:
        raise ValueError("dilation factor must be positive")
    B = factor * E.shape
    B.setflags(write=False)
    return Ellipsoid(E.center, B, E.log_volume + E.dim * math.log(factor), E.gap, E.iterations)


# --------------------------------------------------------------------------
# John ellipsoid solver

_BASIS_CACHE: dict[int, np.ndarray] = {}


def _sym_basis(d: int) -> np.ndarray:
    """Basis of symmetric matrices: e_p e_q^T + e_q e_p^T (p < q) and e_p e_p^T."""
    E = _BASIS_CACHE.get(d)
    if E is None:
        pairs = [(p, q) for p in range(d) for q in range(p, d)]
        E = np.zeros((len(pairs), d, d))
        for k, (p, q) in enumerate(pairs):
            E[k, p, q] = 1.0
            E[k, q, p] = 1.0
        _BASIS_CACHE[d] = E
    return E


def _to_coeffs(B: np.ndarray) -> np.ndarray:
    d = B.shape[0]
    return np.array([B[p, q] for p in range(d) for q in range(p, d)])


def chebyshev_center(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    """Center and radius of the largest ball in ``{A w <= b}`` (rows of A unit norm)."""
    m, d = A.shape
    res = linprog(
        np.r_[np.zeros(d), -1.0],
        A_ub=np.hstack([A, np.ones((m, 1))]),
        b_ub=b,
        bounds=[(None, None)] * d + [(0.0, None)],
        method="highs",
    )
    if res.status == 2:
        raise InfeasibleOrDegenerate("polytope is empty")
    if res.status != 0:
        raise LPFailure("Chebyshev center LP failed", res.status, res.message)
    c = res.x[:d]
    return c, float(np.min(b - A @ c))


def _john_normalized(A, b, tol, gap, floor, max_newton):
    m, d = A.shape
    E = _sym_basis(d)
    nb = E.shape[0]
    n = d + nb

    c0, r0 = chebyshev_center(A, b)
    if not r0 > floor:
        raise InfeasibleOrDegenerate(
            f"polytope has no interior (inradius {r0:.3e} <= floor {floor:.1e})")

    # column k of G[i] is E_k a_i
    G = np.einsum("kpq,iq->ipk", E, A)
    Gflat = G.reshape(m * d, nb)

    def unpack(x):
        return x[:d], np.einsum("k,kpq->pq", x[d:], E)

    def pack(c, B):
        return np.r_[c, _to_coeffs(B)]

    def evaluate(x, t):
        c, B = unpack(x)
        try:
            L = np.linalg.cholesky(B)
        except np.linalg.LinAlgError:
            return None
        U = A @ B
        r = np.sqrt(np.einsum("ij,ij->i", U, U))
        s = b - A @ c - r
        if np.any(s <= 0) or np.any(r <= 0):
            return None
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
        return t * -logdet - np.sum(np.log(s)), (c, B, U, r, s)

    def derivatives(state, t):
        c, B, U, r, s = state
        uh = U / r[:, None]
        Gu = np.einsum("ipk,ip->ik", G, uh)
        J = np.hstack([A, Gu])
        inv_s = 1.0 / s
        grad = J.T @ inv_s
        H = (J * (inv_s ** 2)[:, None]).T @ J
        w = inv_s / r
        Hbb = (Gflat * np.repeat(w, d)[:, None]).T @ Gflat - (Gu * w[:, None]).T @ Gu
        Binv = np.linalg.inv(B)
        BE = np.einsum("pq,kqr->kpr", Binv, E)
        grad[d:] -= t * np.einsum("kpp->k", BE)
        Hbb += t * np.einsum("kpq,lqp->kl", BE, BE)
        H[d:, d:] += Hbb
        return grad, 0.5 * (H + H.T)

    x = pack(c0, 0.5 * r0 * np.eye(d))
    t = 1.0
    iters = 0
    mu_step = 20.0
    while True:
        val, state = evaluate(x, t)
        for _ in range(max_newton):
            grad, H = derivatives(state, t)
            try:
                step = -np.linalg.solve(H, grad)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(H, grad, rcond=None)[0]
            dec = -float(grad @ step)
            iters += 1
            if dec <= 1e-10:
                break
            alpha = 1.0
            accepted = False
            while alpha > 1e-12:
                out = evaluate(x + alpha * step, t)
                if out is not None and out[0] <= val - 0.25 * alpha * dec:
                    x = x + alpha * step
                    val, state = out
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                break
        if m / t <= gap:
            break
        t *= mu_step

    c, B = unpack(x)
    B = 0.5 * (B + B.T)
    return c, B, m / t, iters


def max_inscribed_ellipsoid(
    poly: HalfspacePolytope,
    tol: float = DEFAULT_TOL,
    gap: float = DEFAULT_GAP,
    floor: float = DEFAULT_FLOOR,
    warm: Optional[Ellipsoid] = None,
    max_newton: int = 100,
) -> Ellipsoid:
    """Maximum-volume ellipsoid inscribed in ``poly``.

    ``gap`` bounds the suboptimality of ``log det B``. ``warm`` is an
    optional ellipsoid used only to precondition the problem (the solve is
    carried out in the coordinates where ``warm`` is the unit ball), which
    keeps Newton well conditioned for needle-shaped version spaces.

    Raises InfeasibleOrDegenerate when the polytope has no interior or the
    optimal shape has an eigenvalue below ``floor``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    A0 = poly.normals
    b0 = poly.offsets
    d = poly.dim

    if warm is not None:
        c_ref = np.asarray(warm.center, dtype=float)
        L = np.asarray(warm.shape, dtype=float)
        A = A0 @ L
        b = b0 - A0 @ c_ref
    else:
        c_ref = np.zeros(d)
        L = None
        A = np.array(A0, dtype=float)
        b = np.array(b0, dtype=float)

    norms = np.linalg.norm(A, axis=1)
    if np.any(norms <= 0):
        raise ValueError("zero constraint normal")
    A = A / norms[:, None]
    b = b / norms

    cv, Bv, achieved_gap, iters = _john_normalized(A, b, tol, gap, floor, max_newton)

    if L is None:
        c, B = cv, Bv
    else:
        c = c_ref + L @ cv
        M = L @ Bv
        vals, vecs = np.linalg.eigh(M @ M.T)
        vals = np.clip(vals, 0.0, None)
        B = (vecs * np.sqrt(vals)) @ vecs.T
        B = 0.5 * (B + B.T)

    lam_min = float(np.linalg.eigvalsh(B)[0])
    if lam_min < floor:
        raise InfeasibleOrDegenerate(
            f"John ellipsoid collapsed (min eigenvalue {lam_min:.3e} < floor {floor:.1e})")
    margin = feasibility_margin(poly, c, B)
    if margin > tol:
        raise InfeasibleOrDegenerate(f"ellipsoid violates a facet by {margin:.3e}")
    return Ellipsoid.from_shape(c, B, gap=achieved_gap, iterations=iters)


def feasibility_margin(poly: HalfspacePolytope, center, shape) -> float:
    """max_i ||B a_i|| + <a_i, c> - b_i; non-positive iff the ellipsoid fits."""
    A = poly.normals
    U = A @ np.asarray(shape)
    return float(np.max(np.linalg.norm(U, axis=1) + A @ np.asarray(center) - poly.offsets))


# --------------------------------------------------------------------------
# pruning

def prune_redundant(poly: HalfspacePolytope, atol: float = 1e-9) -> HalfspacePolytope:
    """Drop constraints implied by the others; box facets are always kept.

    Each removal is certified by one LP maximizing ``<a, w>`` over the
    remaining constraints. Newest constraints are examined first, so of
    two duplicates the later one is the one removed.
    """
    A, b, tags = poly.normals, poly.offsets, poly.tags
    keep = np.ones(poly.n_constraints, dtype=bool)
    for i in range(poly.n_constraints - 1, -1, -1):
        if tags[i] == BOX_TAG:
            continue
        keep[i] = False
        res = linprog(-A[i], A_ub=A[keep], b_ub=b[keep],
                      bounds=[(None, None)] * poly.dim, method="highs")
        if res.status == 2:
            # remaining set already empty; dropping this row changes nothing
            continue
        if res.status != 0:
            raise LPFailure(f"redundancy LP failed on constraint {i}", res.status, res.message)
        if -res.fun > b[i] + atol * (1.0 + abs(b[i])):
            keep[i] = True
    return poly.subset(keep)


# --------------------------------------------------------------------------
# sampling and the sandwich check

def sample_uniform_ball(d: int, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Uniform draw(s) from the unit ball: Gaussian direction times U^(1/d) radius."""
    n = 1 if size is None else int(size)
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radius = rng.random(n) ** (1.0 / d)
    out = g * radius[:, None]
    return out[0] if size is None else out


def hit_and_run(poly: HalfspacePolytope, n_samples: int, rng: np.random.Generator,
                start=None, n_chains: int = 200, burn_in: Optional[int] = None,
                thin: int = 1) -> np.ndarray:
    """Approximately uniform points in ``poly`` from parallel hit-and-run chains."""
    A, b = poly.normals, poly.offsets
    d = poly.dim
    if start is None:
        start, r = chebyshev_center(A / np.linalg.norm(A, axis=1)[:, None],
                                    b / np.linalg.norm(A, axis=1))
    n_chains = max(1, min(n_chains, n_samples))
    X = np.tile(np.asarray(start, dtype=float), (n_chains, 1))
    if burn_in is None:
        burn_in = 20 * d + 50

    def step(X):
        v = rng.standard_normal(X.shape)
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        Av = v @ A.T
        slack = b[None, :] - X @ A.T
        slack = np.maximum(slack, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = slack / Av
        hi = np.min(np.where(Av > 0, ratio, np.inf), axis=1)
        lo = np.max(np.where(Av < 0, ratio, -np.inf), axis=1)
        lam = lo + (hi - lo) * rng.random(X.shape[0])
        return X + lam[:, None] * v

    for _ in range(burn_in):
        X = step(X)
    out = []
    total = 0
    while total < n_samples:
        for _ in range(thin):
            X = step(X)
        out.append(X.copy())
        total += X.shape[0]
    return np.vstack(out)[:n_samples]


@dataclass
class SandwichReport:
    n_samples: int
    inner_violations: int
    outer_violations: int
    max_inner_margin: float
    max_outer_ratio: float
    extras: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.inner_violations == 0 and self.outer_violations == 0


def sandwich_check(poly: HalfspacePolytope, E: Ellipsoid, n_samples: int,
                   rng: np.random.Generator, tol: float = DEFAULT_TOL,
                   slack: float = 1e-6) -> SandwichReport:
    """Check ``E ⊂ poly`` facet by facet and ``poly ⊂ d·E`` on sampled points.

    A sample counts as outside ``d·E`` when its ellipsoidal norm exceeds
    ``d * (1 + slack)``; ``slack`` absorbs the solver's optimality gap.
    """
    A = poly.normals
    inner = np.linalg.norm(A @ E.shape, axis=1) + A @ E.center - poly.offsets
    pts = hit_and_run(poly, n_samples, rng, start=E.center)
    z = np.linalg.solve(E.shape, (pts - E.center).T)
    ratio = np.linalg.norm(z, axis=0) / E.dim
    return SandwichReport(
        n_samples=int(pts.shape[0]),
        inner_violations=int(np.sum(inner > tol)),
        outer_violations=int(np.sum(ratio > 1.0 + slack)),
        max_inner_margin=float(np.max(inner)),
        max_outer_ratio=float(np.max(ratio)) if ratio.size else 0.0,
    )
