"""Static-pivot sparse LDL^T: symbolic analysis, numeric factorization, solves."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .matrix import INDEX, Permutation, SparseMatrix, StructuralError
from .ordering import amd_order


class FactorizationError(ArithmeticError):
    pass


class ZeroPivot(FactorizationError):
    """A pivot fell below the zero tolerance with perturbation disabled."""

    def __init__(self, column: int, value: float, tol: float):
        self.column = column
        self.value = value
        self.tol = tol
        super().__init__(f"zero pivot at column {column} (|d| = {abs(value):.3e} <= tol = {tol:.3e})")


class SingularDiagonal(FactorizationError):
    """The diagonal factor has an exact zero, so no solve is possible."""


class Inertia(NamedTuple):
    n_pos: int
    n_neg: int
    n_zero: int


@dataclass(frozen=True, eq=False)
class SymbolicFactorization:
    """Ordering and L structure for P^T A P; reusable for any values on the same pattern."""

    n: int
    permutation: Permutation
    parent: np.ndarray
    col_counts: np.ndarray
    lp: np.ndarray
    li: np.ndarray
    # pattern of upper(P^T A P) and the slot each input entry maps to
    cp: np.ndarray = field(repr=False)
    ci: np.ndarray = field(repr=False)
    dest: np.ndarray = field(repr=False)
    a_indptr: np.ndarray = field(repr=False)
    a_indices: np.ndarray = field(repr=False)

    @property
    def nnz_l(self) -> int:
        return int(self.lp[-1])

    def matches(self, a: SparseMatrix) -> bool:
        return (
            a.ncols == self.n
            and np.array_equal(a.indptr, self.a_indptr)
            and np.array_equal(a.indices, self.a_indices)
        )


@dataclass(frozen=True, eq=False)
class FactorOptions:
    """``pivot_tol=None`` means ``1e-12 * max|A_ii|`` (falling back to the largest
    entry, then 1, when the diagonal is empty or zero)."""

    pivot_tol: float | None = None
    perturbation: float = 1e-8
    allow_perturbation: bool = True


@dataclass(frozen=True, eq=False)
class NumericFactorization:
    lx: np.ndarray
    d: np.ndarray
    inertia: Inertia
    n_perturbed: int
    perturbation: float
    pivot_tol: float
    zero_pivots: np.ndarray = field(repr=False)

    def is_spd(self) -> bool:
        return self.inertia.n_pos == self.d.size and self.n_perturbed == 0


def _check_lower(a: SparseMatrix):
    if a.nrows != a.ncols:
        raise StructuralError(f"symmetric factorization needs a square matrix, got {a.shape}")
    if not a.is_lower():
        raise StructuralError("expected lower-triangular storage of a symmetric matrix")


def symbolic_analyze(pattern: SparseMatrix, perm: Permutation | None = None) -> SymbolicFactorization:
    """Elimination tree and L pattern of P^T A P.  ``perm=None`` runs AMD."""
    _check_lower(pattern)
    n = pattern.ncols
    if perm is None:
        perm = amd_order(pattern)
    if perm.n != n:
        raise StructuralError(f"permutation of size {perm.n} does not match matrix of size {n}")
    cp, ci, dest = kernels.symperm_upper(n, pattern.indptr, pattern.indices, perm.inv)
    parent, counts = kernels.etree_counts(n, cp, ci)
    lp = np.zeros(n + 1, dtype=INDEX)
    np.cumsum(counts, out=lp[1:])
    li = kernels.l_pattern(n, cp, ci, parent, lp)
    return SymbolicFactorization(
        n=n, permutation=perm, parent=parent, col_counts=counts, lp=lp, li=li,
        cp=cp, ci=ci, dest=dest, a_indptr=pattern.indptr, a_indices=pattern.indices,
    )


def default_pivot_tol(a: SparseMatrix) -> float:
    scale = float(np.max(np.abs(a.diagonal()), initial=0.0))
    if scale == 0.0:
        scale = float(np.max(np.abs(a.data), initial=0.0)) or 1.0
    return 1e-12 * scale


def ldlt_factorize(
    a: SparseMatrix,
    symbolic: SymbolicFactorization,
    opts: FactorOptions | None = None,
    signs=None,
) -> NumericFactorization:
    """Numeric LDL^T on the cached pattern.

    ``signs`` (original indexing, entries +-1) fixes the sign of a perturbed
    pivot; the default is +1 everywhere.  Pivots at or below the tolerance are
    counted as zero in the inertia whether or not they are perturbed.
    """
    opts = opts or FactorOptions()
    if not symbolic.matches(a):
        raise StructuralError("matrix pattern differs from the symbolic analysis")
    n = symbolic.n
    tol = default_pivot_tol(a) if opts.pivot_tol is None else float(opts.pivot_tol)
    if signs is None:
        psigns = np.ones(n)
    else:
        signs = np.asarray(signs, dtype=np.float64)
        if signs.shape != (n,):
            raise StructuralError("sign map length does not match the matrix")
        psigns = np.where(signs[symbolic.permutation.perm] < 0, -1.0, 1.0)
    cx = np.empty(a.nnz)
    cx[symbolic.dest] = a.data
    lx, d, zero, status = kernels.ldl_numeric(
        n, symbolic.cp, symbolic.ci, cx, symbolic.parent, symbolic.lp, symbolic.li,
        tol, float(opts.perturbation), psigns, bool(opts.allow_perturbation),
    )
    if status >= 0:
        raise ZeroPivot(int(symbolic.permutation.perm[status]), float(d[status]), tol)
    nzero = int(zero.sum())
    live = d[~zero]
    inertia = Inertia(int((live > 0).sum()), int((live < 0).sum()), nzero)
    return NumericFactorization(
        lx=lx, d=d, inertia=inertia, n_perturbed=nzero,
        perturbation=float(opts.perturbation) if nzero else 0.0,
        pivot_tol=tol, zero_pivots=zero,
    )


def factorize(a: SparseMatrix, opts: FactorOptions | None = None, perm: Permutation | None = None, signs=None):
    """Convenience wrapper: analyze then factorize."""
    sym = symbolic_analyze(a, perm)
    return sym, ldlt_factorize(a, sym, opts, signs)


def solve(fact: NumericFactorization, symbolic: SymbolicFactorization, rhs) -> np.ndarray:
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    if rhs.shape != (symbolic.n,):
        raise StructuralError(f"rhs has shape {rhs.shape}, expected ({symbolic.n},)")
    if np.any(fact.d == 0.0):
        k = int(np.flatnonzero(fact.d == 0.0)[0])
        raise SingularDiagonal(f"D has an exact zero at pivot {k}")
    return kernels.ldl_solve_perm(
        symbolic.n, symbolic.lp, symbolic.li, fact.lx, fact.d, symbolic.permutation.perm, rhs
    )


class Refinement(NamedTuple):
    x: np.ndarray
    residual: float
    sweeps: int


def iterative_refinement(
    a: SparseMatrix,
    fact: NumericFactorization,
    symbolic: SymbolicFactorization,
    rhs,
    x0=None,
    max_sweeps: int = 3,
    target: float | None = None,
    history: list | None = None,
) -> Refinement:
    """Correct ``x0`` with the existing factors until ``||rhs - A x||_inf <= target``.

    ``target=None`` uses ``1e-12 * (1 + ||rhs||_inf)``.  The residual is
    reported, never asserted.  ``history`` (if given) receives the residual
    before every sweep and after the last one.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    if target is None:
        target = 1e-12 * (1.0 + float(np.max(np.abs(rhs), initial=0.0)))
    x = solve(fact, symbolic, rhs) if x0 is None else np.array(x0, dtype=np.float64)
    r = rhs - a.sym_matvec(x)
    res = float(np.max(np.abs(r), initial=0.0))
    sweeps = 0
    if history is not None:
        history.append(res)
    while sweeps < max_sweeps and res > target:
        x = x + solve(fact, symbolic, r)
        r = rhs - a.sym_matvec(x)
        res = float(np.max(np.abs(r), initial=0.0))
        sweeps += 1
        if history is not None:
            history.append(res)
    return Refinement(x, res, sweeps)


def factor_matrices(fact: NumericFactorization, symbolic: SymbolicFactorization):
    """Dense ``(L, D, P)`` with ``P^T A P = L D L^T`` (``P[:, k] = e_perm[k]``); for tests."""
    n = symbolic.n
    L = np.eye(n)
    cols = np.repeat(np.arange(n), np.diff(symbolic.lp))
    L[symbolic.li, cols] = fact.lx
    P = np.zeros((n, n))
    P[symbolic.permutation.perm, np.arange(n)] = 1.0
    return L, np.diag(fact.d), P
