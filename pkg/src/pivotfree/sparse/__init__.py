from .ldl import (
    FactorizationError,
    FactorOptions,
    Inertia,
    NumericFactorization,
    Refinement,
    SingularDiagonal,
    SymbolicFactorization,
    ZeroPivot,
    default_pivot_tol,
    factor_matrices,
    factorize,
    iterative_refinement,
    ldlt_factorize,
    solve,
    symbolic_analyze,
)
from .matrix import CooPlan, Permutation, SparseMatrix, StructuralError
from .mmio import read_matrix_market, write_matrix_market
from .ordering import amd_order, natural_order

__all__ = [
    "CooPlan",
    "FactorOptions",
    "FactorizationError",
    "Inertia",
    "NumericFactorization",
    "Permutation",
    "Refinement",
    "SingularDiagonal",
    "SparseMatrix",
    "StructuralError",
    "SymbolicFactorization",
    "ZeroPivot",
    "amd_order",
    "default_pivot_tol",
    "factor_matrices",
    "factorize",
    "iterative_refinement",
    "ldlt_factorize",
    "natural_order",
    "read_matrix_market",
    "solve",
    "symbolic_analyze",
    "write_matrix_market",
]
