"""Independent reference computations used by the tests.

Nothing here calls into the package's factorization, ordering or AD code.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

# -- symbolic fill ----------------------------------------------------------


def dense_fill(pattern: np.ndarray, order) -> int:
    """Fill-in of Cholesky on ``pattern`` (boolean, symmetric) eliminated in ``order``."""
    g = pattern.astype(bool).copy()
    np.fill_diagonal(g, False)
    g = g[np.ix_(order, order)]
    n = g.shape[0]
    fill = 0
    for k in range(n):
        nb = [j for j in range(k + 1, n) if g[k, j]]
        for a, b in itertools.combinations(nb, 2):
            if not g[a, b]:
                g[a, b] = g[b, a] = True
                fill += 1
    return fill


def dense_cholesky_pattern(pattern: np.ndarray) -> np.ndarray:
    """Strict-lower pattern of the Cholesky factor of ``pattern`` in natural order."""
    g = pattern.astype(bool).copy()
    n = g.shape[0]
    for k in range(n):
        nb = [j for j in range(k + 1, n) if g[j, k]]
        for a, b in itertools.combinations(nb, 2):
            g[max(a, b), min(a, b)] = True
    return np.tril(g, -1)


def brute_force_min_fill(pattern: np.ndarray) -> int:
    n = pattern.shape[0]
    return min(dense_fill(pattern, list(p)) for p in itertools.permutations(range(n)))


# -- dense LDL^T without pivoting -------------------------------------------


def dense_ldl(a: np.ndarray):
    n = a.shape[0]
    L = np.eye(n)
    d = np.zeros(n)
    for j in range(n):
        d[j] = a[j, j] - np.sum(L[j, :j] ** 2 * d[:j])
        for i in range(j + 1, n):
            L[i, j] = (a[i, j] - np.sum(L[i, :j] * L[j, :j] * d[:j])) / d[j]
    return L, d


def eig_inertia(a: np.ndarray, zero: float = 1e-10):
    w = np.linalg.eigvalsh(a)
    return int((w > zero).sum()), int((w < -zero).sum()), int((np.abs(w) <= zero).sum())


# -- random matrices ----------------------------------------------------------


def random_sqd(rng, n1: int, n2: int, density: float = 0.3) -> np.ndarray:
    """Dense symmetric ``[[E, B^T], [B, -F]]`` with E, F SPD and diagonally dominant."""

    def spd(k):
        m = rng.standard_normal((k, k)) * (rng.random((k, k)) < density)
        m = (m + m.T) / 2
        m += np.diag(np.abs(m).sum(axis=1) + rng.uniform(0.5, 2.0, k))
        return m

    B = rng.standard_normal((n2, n1)) * (rng.random((n2, n1)) < density)
    K = np.zeros((n1 + n2, n1 + n2))
    K[:n1, :n1] = spd(n1)
    K[n1:, n1:] = -spd(n2)
    K[n1:, :n1] = B
    K[:n1, n1:] = B.T
    return K


def random_symmetric(rng, n: int, density: float = 0.5, singular: bool = False) -> np.ndarray:
    m = rng.standard_normal((n, n)) * (rng.random((n, n)) < density)
    m = (m + m.T) / 2
    m[np.diag_indices(n)] = rng.uniform(0.5, 2.0, n) * rng.choice([-1.0, 1.0], n)
    if singular and n > 1:
        # rank-deficient: a symmetric product with a thin factor
        k = int(rng.integers(1, n))
        U = rng.standard_normal((n, k))
        m = U @ np.diag(rng.choice([-1.0, 1.0], k)) @ U.T
    return m


# -- LP vertex enumeration ------------------------------------------------------


def lp_vertex_optimum(c: np.ndarray, A: np.ndarray, b: np.ndarray, feas_tol: float = 1e-9):
    """Minimize ``c^T x`` over ``A x >= b`` by visiting every basic solution.

    Assumes the feasible set is a bounded, nonempty polytope.
    """
    m, n = A.shape
    best, xbest = math.inf, None
    subsets = np.array(list(itertools.combinations(range(m), n)), dtype=np.int64)
    for chunk in np.array_split(subsets, max(1, len(subsets) // 4096)):
        As = A[chunk]  # (k, n, n)
        bs = b[chunk]
        det = np.linalg.det(As)
        ok = np.abs(det) > 1e-12
        if not np.any(ok):
            continue
        xs = np.linalg.solve(As[ok], bs[ok][..., None])[..., 0]
        feas = np.all(xs @ A.T >= b - feas_tol * (1 + np.abs(b)), axis=1)
        if np.any(feas):
            vals = xs[feas] @ c
            k = int(np.argmin(vals))
            if vals[k] < best:
                best, xbest = float(vals[k]), xs[feas][k]
    return best, xbest


def random_bounded_lp(rng, n: int, m_extra: int, box: float = 5.0):
    """Feasible LP with a box around a random interior point plus random cuts."""
    x0 = rng.uniform(-1, 1, n)
    G = rng.standard_normal((m_extra, n))
    g = G @ x0 - rng.uniform(0.1, 2.0, m_extra)
    A = np.vstack([G, np.eye(n), -np.eye(n)])
    b = np.concatenate([g, -box * np.ones(n), -box * np.ones(n)])
    c = rng.standard_normal(n)
    return c, A, b


# -- derivatives ----------------------------------------------------------------


def central_diff(fun, x, h: float = 1e-6):
    """Central differences of a scalar or vector function; columns are partials."""
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        cols.append((np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


_NAIVE = {
    "neg": lambda a: -a,
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "square": lambda a: a * a,
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
    "pow": lambda a, b: a ** b,
}


def tree_eval(expr, xs, ps=()):
    """Recursive scalar evaluation of an expression tree."""
    if expr.op == "const":
        return expr.value
    if expr.op == "var":
        return float(xs[expr.value])
    if expr.op == "param":
        return float(ps[expr.value])
    return _NAIVE[expr.op](*(tree_eval(a, xs, ps) for a in expr.args))
