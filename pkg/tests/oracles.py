"""Independent reference implementations used only by the tests.

Nothing here calls the package's solvers: these are the other side of
each implementation/oracle pair.
"""
import itertools
import math

import numpy as np
from scipy.optimize import minimize


def ellipse_boundary(c, L, n=720):
    th = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    U = np.stack([np.cos(th), np.sin(th)])
    return (np.asarray(c)[:, None] + L @ U).T


def brute_force_inellipse(A, b, starts=6, seed=0):
    """Max-area ellipse in ``{A x <= b}`` (2-D) by direct search.

    The search runs over the center, the axis ratio and the orientation;
    for each candidate the largest admissible scale is read off 720
    sampled boundary points, so containment is only checked on samples.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    rng = np.random.default_rng(seed)
    th = np.linspace(0.0, 2.0 * np.pi, 720, endpoint=False)
    U = np.stack([np.cos(th), np.sin(th)])

    def shape(p):
        rot = np.array([[math.cos(p[3]), -math.sin(p[3])], [math.sin(p[3]), math.cos(p[3])]])
        return rot @ np.diag([math.exp(p[2]), math.exp(-p[2])])

    def scale(p):
        c = p[:2]
        slack = b - A @ c
        if np.any(slack <= 0):
            return 0.0
        reach = A @ shape(p) @ U
        with np.errstate(divide="ignore"):
            lim = np.where(reach > 0, slack[:, None] / reach, np.inf)
        return float(np.min(lim))

    def loss(p):
        s = scale(p)
        return 1e6 if s <= 0 else -2.0 * math.log(s)

    best = None
    for _ in range(starts):
        p0 = np.r_[rng.uniform(0.2, 0.4, 2), rng.uniform(-0.5, 0.5), rng.uniform(0, np.pi)]
        res = minimize(loss, p0, method="Nelder-Mead",
                       options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 20000})
        if best is None or res.fun < best.fun:
            best = res
    L = scale(best.x) * shape(best.x)
    return best.x[:2].copy(), L @ L.T


def cvxpy_john(A, b):
    """Max-volume inscribed ellipsoid via a conic solver (log_det program)."""
    import cvxpy as cp

    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    d = A.shape[1]
    B = cp.Variable((d, d), PSD=True)
    c = cp.Variable(d)
    cons = [cp.norm(B @ A[i], 2) + A[i] @ c <= b[i] for i in range(A.shape[0])]
    prob = cp.Problem(cp.Maximize(cp.log_det(B)), cons)
    prob.solve(solver=cp.CLARABEL)
    return np.asarray(c.value), np.asarray(B.value), float(prob.value)


def steiner_inellipse_area(vertices):
    """pi / (3 sqrt 3) times the triangle area."""
    v = np.asarray(vertices, dtype=float)
    e1, e2 = v[1] - v[0], v[2] - v[0]
    area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
    return math.pi / (3.0 * math.sqrt(3.0)) * area


def mean_radius_quadrature(d):
    """E|x| for x uniform on the unit ball, by integrating r * d r^(d-1)."""
    from scipy.integrate import quad

    return quad(lambda r: r * d * r ** (d - 1), 0.0, 1.0)[0]


def naive_partition_count(X, y, K, tol=1e-8):
    """Smallest block count over all set partitions into <= K exactly fitted blocks.

    Written independently of the package: pure itertools enumeration of
    labelings and a rank test per block.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    m = len(y)
    if m == 0:
        return 0

    def fit_ok(idx):
        g, *_ = np.linalg.lstsq(X[idx], y[idx], rcond=None)
        return bool(np.all(np.abs(X[idx] @ g - y[idx]) <= tol * np.maximum(1.0, np.abs(y[idx]))))

    best = None
    for labels in itertools.product(range(K), repeat=m):
        # canonical labelings only: first occurrence order 0, 1, 2, ...
        seen = []
        canon = True
        for v in labels:
            if v not in seen:
                if v != len(seen):
                    canon = False
                    break
                seen.append(v)
        if not canon:
            continue
        n = len(seen)
        if best is not None and n >= best:
            continue
        if all(fit_ok([i for i in range(m) if labels[i] == k]) for k in range(n)):
            best = n
    return best
