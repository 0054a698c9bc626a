"""Compressed sparse column storage and permutations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .kernels import csc_matvec, sym_lower_matvec

INDEX = np.int64


class StructuralError(ValueError):
    """Malformed sparse structure or inconsistent dimensions."""


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """CSC matrix.  Symmetric matrices keep only the lower triangle."""

    nrows: int
    ncols: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        indptr = np.ascontiguousarray(self.indptr, dtype=INDEX)
        indices = np.ascontiguousarray(self.indices, dtype=INDEX)
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "data", data)
        if indptr.shape != (self.ncols + 1,):
            raise StructuralError("column pointer array must have length ncols + 1")
        if indptr[0] != 0 or np.any(np.diff(indptr) < 0):
            raise StructuralError("column pointers must start at 0 and be nondecreasing")
        nnz = int(indptr[-1])
        if indices.shape != (nnz,) or data.shape != (nnz,):
            raise StructuralError("row-index and value arrays must have length nnz")
        if nnz:
            if indices.min() < 0 or indices.max() >= self.nrows:
                raise StructuralError("row index out of range")
            # strictly increasing within each column
            step = np.diff(indices)
            colstart = np.zeros(nnz, dtype=bool)
            colstart[indptr[:-1][indptr[:-1] < nnz]] = True
            if np.any((step <= 0) & ~colstart[1:]):
                raise StructuralError("row indices must be strictly increasing within a column")

    # -- construction -----------------------------------------------------

    @classmethod
    def from_coo(cls, rows, cols, vals, shape) -> "SparseMatrix":
        """Compress triplets; duplicates are summed and explicit zeros kept."""
        plan = CooPlan(rows, cols, shape)
        return plan.build(vals)

    @classmethod
    def from_dense(cls, a, lower: bool = False, keep_zeros: bool = False) -> "SparseMatrix":
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2:
            raise StructuralError("expected a 2-d array")
        mask = np.ones_like(a, dtype=bool) if keep_zeros else a != 0
        if lower:
            if a.shape[0] != a.shape[1]:
                raise StructuralError("symmetric storage needs a square matrix")
            mask &= np.tril(np.ones_like(mask))
        c, r = np.nonzero(mask.T)
        return cls.from_coo(r, c, a[r, c], a.shape)

    @classmethod
    def from_scipy(cls, m) -> "SparseMatrix":
        m = sp.csc_matrix(m)
        m.sort_indices()
        m.sum_duplicates()
        return cls(m.shape[0], m.shape[1], m.indptr, m.indices, m.data)

    @classmethod
    def empty(cls, nrows: int, ncols: int) -> "SparseMatrix":
        return cls(nrows, ncols, np.zeros(ncols + 1, INDEX), np.zeros(0, INDEX), np.zeros(0))

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        return cls(n, n, np.arange(n + 1), np.arange(n), np.ones(n))

    # -- queries ----------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    def col_indices(self) -> np.ndarray:
        """Column index of every stored entry."""
        return np.repeat(np.arange(self.ncols, dtype=INDEX), np.diff(self.indptr))

    def is_lower(self) -> bool:
        return self.nrows == self.ncols and bool(np.all(self.indices >= self.col_indices()))

    def diagonal(self) -> np.ndarray:
        n = min(self.nrows, self.ncols)
        d = np.zeros(n)
        cols = self.col_indices()
        on = self.indices == cols
        np.add.at(d, cols[on], self.data[on])
        return d

    def with_data(self, data) -> "SparseMatrix":
        return SparseMatrix(self.nrows, self.ncols, self.indptr, self.indices, data)

    def same_pattern(self, other: "SparseMatrix") -> bool:
        return (
            self.shape == other.shape
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    # -- arithmetic -------------------------------------------------------

    def matvec(self, x) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.shape != (self.ncols,):
            raise StructuralError(f"vector length {x.shape} does not match {self.ncols} columns")
        return csc_matvec(self.nrows, self.indptr, self.indices, self.data, x)

    def rmatvec(self, y) -> np.ndarray:
        """Return ``self.T @ y``."""
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.nrows,):
            raise StructuralError("vector length does not match row count")
        prod = self.data * y[self.indices]
        return np.bincount(self.col_indices(), weights=prod, minlength=self.ncols)

    def sym_matvec(self, x) -> np.ndarray:
        """Product with the full symmetric matrix represented by the lower triangle."""
        x = np.ascontiguousarray(x, dtype=np.float64)
        if self.nrows != self.ncols or x.shape != (self.ncols,):
            raise StructuralError("sym_matvec needs a square matrix and matching vector")
        return sym_lower_matvec(self.ncols, self.indptr, self.indices, self.data, x)

    def to_scipy(self) -> sp.csc_matrix:
        return sp.csc_matrix((self.data, self.indices, self.indptr), shape=self.shape)

    def to_dense(self, symmetric: bool = False) -> np.ndarray:
        a = np.zeros(self.shape)
        np.add.at(a, (self.indices, self.col_indices()), self.data)
        if symmetric:
            a = a + np.tril(a, -1).T
        return a

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix.from_coo(self.col_indices(), self.indices, self.data, (self.ncols, self.nrows))

    def norm_inf(self, symmetric: bool = False) -> float:
        if self.nnz == 0:
            return 0.0
        a = np.abs(self.data)
        rowsum = np.bincount(self.indices, weights=a, minlength=self.nrows)
        if symmetric:
            cols = self.col_indices()
            off = self.indices != cols
            rowsum += np.bincount(cols[off], weights=a[off], minlength=self.nrows)
        return float(rowsum.max())

    def __repr__(self):
        return f"SparseMatrix({self.nrows}x{self.ncols}, nnz={self.nnz})"


class CooPlan:
    """Fixed triplet pattern compressed once to CSC.

    ``build(vals)`` maps triplet values onto the compressed slots by summation,
    so repeated assembly with the same pattern costs one ``bincount``.
    """

    def __init__(self, rows, cols, shape):
        rows = np.asarray(rows, dtype=INDEX).ravel()
        cols = np.asarray(cols, dtype=INDEX).ravel()
        nrows, ncols = int(shape[0]), int(shape[1])
        if rows.shape != cols.shape:
            raise StructuralError("row and column arrays differ in length")
        if rows.size and (rows.min() < 0 or rows.max() >= nrows or cols.min() < 0 or cols.max() >= ncols):
            raise StructuralError("triplet index out of range")
        key = cols * max(nrows, 1) + rows
        uniq, pos = np.unique(key, return_inverse=True)
        self.shape = (nrows, ncols)
        self.pos = pos.astype(INDEX)
        self.ntrip = rows.size
        self.indices = (uniq % max(nrows, 1)).astype(INDEX)
        ucols = uniq // max(nrows, 1)
        self.indptr = np.zeros(ncols + 1, dtype=INDEX)
        np.cumsum(np.bincount(ucols, minlength=ncols), out=self.indptr[1:])

    @property
    def nnz(self) -> int:
        return self.indices.size

    def values(self, vals) -> np.ndarray:
        vals = np.asarray(vals, dtype=np.float64).ravel()
        if vals.shape != (self.ntrip,):
            raise StructuralError("value array does not match the triplet pattern")
        return np.bincount(self.pos, weights=vals, minlength=self.nnz)

    def build(self, vals) -> SparseMatrix:
        return SparseMatrix(self.shape[0], self.shape[1], self.indptr, self.indices, self.values(vals))


@dataclass(frozen=True, eq=False)
class Permutation:
    """``perm[k]`` is the original index placed at position ``k``; ``inv`` undoes it."""

    perm: np.ndarray
    inv: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(self.perm, dtype=INDEX)
        q = np.ascontiguousarray(self.inv, dtype=INDEX)
        object.__setattr__(self, "perm", p)
        object.__setattr__(self, "inv", q)
        n = p.size
        if q.size != n:
            raise StructuralError("forward and inverse maps differ in length")
        if n and not np.array_equal(np.sort(p), np.arange(n)):
            raise StructuralError("permutation is not a bijection")
        if n and not np.array_equal(q[p], np.arange(n)):
            raise StructuralError("inverse map does not invert the forward map")

    @classmethod
    def from_order(cls, order) -> "Permutation":
        p = np.asarray(order, dtype=INDEX)
        q = np.empty_like(p)
        q[p] = np.arange(p.size, dtype=INDEX)
        return cls(p, q)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n), np.arange(n))

    @property
    def n(self) -> int:
        return self.perm.size

    def __len__(self):
        return self.perm.size

    def __repr__(self):
        return f"Permutation({self.perm.tolist()})"
