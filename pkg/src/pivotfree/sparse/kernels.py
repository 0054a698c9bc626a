"""Inner loops of the sparse layer.

All functions take and return plain numpy arrays so the same body runs under
numba or as ordinary Python (see :mod:`pivotfree._jit`).  Symmetric inputs are
CSC lower triangles unless stated otherwise.
"""

import numpy as np

from .._jit import kernel


@kernel
def csc_matvec(nrows, indptr, indices, data, x):
    y = np.zeros(nrows)
    for j in range(x.shape[0]):
        xj = x[j]
        for p in range(indptr[j], indptr[j + 1]):
            y[indices[p]] += data[p] * xj
    return y


@kernel
def sym_lower_matvec(n, indptr, indices, data, x):
    y = np.zeros(n)
    for j in range(n):
        xj = x[j]
        for p in range(indptr[j], indptr[j + 1]):
            i = indices[p]
            y[i] += data[p] * xj
            if i != j:
                y[j] += data[p] * x[i]
    return y


@kernel
def symperm_upper(n, indptr, indices, pinv):
    """Pattern of the upper triangle of P^T A P, in CSC.

    Returns ``(cp, ci, dest)`` where entry ``p`` of the lower-stored input
    lands in slot ``dest[p]`` of the output.  Row order inside a column is
    arbitrary.
    """
    count = np.zeros(n, dtype=np.int64)
    for j in range(n):
        j2 = pinv[j]
        for p in range(indptr[j], indptr[j + 1]):
            i2 = pinv[indices[p]]
            count[max(i2, j2)] += 1
    cp = np.zeros(n + 1, dtype=np.int64)
    for k in range(n):
        cp[k + 1] = cp[k] + count[k]
    nxt = cp[:n].copy()
    nnz = indptr[n]
    ci = np.empty(nnz, dtype=np.int64)
    dest = np.empty(nnz, dtype=np.int64)
    for j in range(n):
        j2 = pinv[j]
        for p in range(indptr[j], indptr[j + 1]):
            i2 = pinv[indices[p]]
            col = max(i2, j2)
            q = nxt[col]
            nxt[col] += 1
            ci[q] = min(i2, j2)
            dest[p] = q
    return cp, ci, dest


@kernel
def etree_counts(n, cp, ci):
    """Elimination tree and column counts of L for an upper-triangular CSC pattern."""
    parent = np.full(n, -1, dtype=np.int64)
    flag = np.empty(n, dtype=np.int64)
    lnz = np.zeros(n, dtype=np.int64)
    for k in range(n):
        flag[k] = k
        for p in range(cp[k], cp[k + 1]):
            i = ci[p]
            if i < k:
                while flag[i] != k:
                    if parent[i] == -1:
                        parent[i] = k
                    lnz[i] += 1
                    flag[i] = k
                    i = parent[i]
    return parent, lnz


@kernel
def l_pattern(n, cp, ci, parent, lp):
    """Row indices of L (strict lower part), sorted within each column."""
    li = np.empty(lp[n], dtype=np.int64)
    fill = lp[:n].copy()
    flag = np.empty(n, dtype=np.int64)
    for k in range(n):
        flag[k] = k
        for p in range(cp[k], cp[k + 1]):
            i = ci[p]
            if i < k:
                while flag[i] != k:
                    li[fill[i]] = k
                    fill[i] += 1
                    flag[i] = k
                    i = parent[i]
    return li


@kernel
def ldl_numeric(n, cp, ci, cx, parent, lp, li, tol, perturb, signs, allow):
    """Up-looking LDL^T with static pivots.

    ``signs`` is indexed in pivot order.  Returns ``(lx, d, zero, status)``:
    ``zero[k]`` marks pivots whose computed magnitude was ``<= tol`` (replaced
    by ``signs[k] * perturb`` when ``allow``), and ``status`` is -1 on success
    or the failing pivot when ``allow`` is false.
    """
    lx = np.zeros(lp[n])
    d = np.zeros(n)
    zero = np.zeros(n, dtype=np.bool_)
    y = np.zeros(n)
    flag = np.empty(n, dtype=np.int64)
    lnz = np.zeros(n, dtype=np.int64)
    pattern = np.empty(n, dtype=np.int64)
    for k in range(n):
        y[k] = 0.0
        top = n
        flag[k] = k
        for p in range(cp[k], cp[k + 1]):
            i = ci[p]
            y[i] += cx[p]
            ln = 0
            while flag[i] != k:
                pattern[ln] = i
                ln += 1
                flag[i] = k
                i = parent[i]
            while ln > 0:
                top -= 1
                ln -= 1
                pattern[top] = pattern[ln]
        dk = y[k]
        y[k] = 0.0
        while top < n:
            i = pattern[top]
            yi = y[i]
            y[i] = 0.0
            p2 = lp[i] + lnz[i]
            for p in range(lp[i], p2):
                y[li[p]] -= lx[p] * yi
            lki = yi / d[i]
            dk -= lki * yi
            lx[p2] = lki
            lnz[i] += 1
            top += 1
        if not (abs(dk) > tol):
            zero[k] = True
            if not allow:
                d[k] = dk
                return lx, d, zero, k
            dk = signs[k] * perturb
        d[k] = dk
    return lx, d, zero, -1


@kernel
def ldl_solve_perm(n, lp, li, lx, d, perm, b):
    """Solve P L D L^T P^T x = b."""
    x = np.empty(n)
    for k in range(n):
        x[k] = b[perm[k]]
    for j in range(n):
        xj = x[j]
        for p in range(lp[j], lp[j + 1]):
            x[li[p]] -= lx[p] * xj
    for j in range(n):
        x[j] /= d[j]
    for j in range(n - 1, -1, -1):
        s = x[j]
        for p in range(lp[j], lp[j + 1]):
            s -= lx[p] * x[li[p]]
        x[j] = s
    out = np.empty(n)
    for k in range(n):
        out[perm[k]] = x[k]
    return out
