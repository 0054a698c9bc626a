"""Scalable built-in model families used by the benchmark harness."""

from __future__ import annotations

import numpy as np

from . import expr as E
from .model import Model, ModelBuilder

FAMILIES = ("rosenbrock_chain", "convex_qp_grid", "circle_packing")


def rosenbrock_chain(N: int) -> Model:
    """Chained Rosenbrock with the bound ``x_i >= -10`` written as ``x_i + 10 >= 0``."""
    x0, x1 = E.vars_(2)
    term = 100.0 * E.square(E.square(x0) - x1) + E.square(x0 - 1.0)
    i = np.arange(1, N)
    start = np.full(N, 0.5)
    b = ModelBuilder(N, x0=start, name=f"rosenbrock_chain_{N}")
    b.objective(term, np.column_stack([i - 1, i]))
    b.constraint(E.var(0) + 10.0, np.arange(N)[:, None])
    return b.build()


def convex_qp_grid(size: int) -> Model:
    """``min sum (x_i - i/size)^2`` subject to ``x_{i+1} - x_i >= -1/size``."""
    n = size
    target = np.arange(n) / size
    b = ModelBuilder(n, x0=np.zeros(n), name=f"convex_qp_grid_{size}")
    b.objective(E.square(E.var(0) - E.param(0)), np.arange(n)[:, None], target[:, None])
    i = np.arange(n - 1)
    b.constraint(E.var(1) - E.var(0) + E.param(0), np.column_stack([i, i + 1]), np.full((n - 1, 1), 1.0 / size))
    return b.build()


def circle_packing(size: int) -> Model:
    """Repulsion of ``size`` points kept inside the unit disk.

    Minimizes ``sum_{i<j} 1/|p_i - p_j|^2`` with ``1 - |p_i|^2 >= 0``; point
    ``i`` owns variables ``2i`` and ``2i+1``.
    """
    n = 2 * size
    ang = 2.0 * np.pi * np.arange(size) / size
    start = np.column_stack([0.5 * np.cos(ang), 0.5 * np.sin(ang)]).ravel()
    xi, yi, xj, yj = E.vars_(4)
    energy = 1.0 / (E.square(xi - xj) + E.square(yi - yj))
    ii, jj = np.triu_indices(size, k=1)
    b = ModelBuilder(n, x0=start, name=f"circle_packing_{size}")
    b.objective(energy, np.column_stack([2 * ii, 2 * ii + 1, 2 * jj, 2 * jj + 1]))
    p = np.arange(size)
    b.constraint(1.0 - E.square(xi) - E.square(yi), np.column_stack([2 * p, 2 * p + 1]))
    return b.build()


_BUILDERS = {
    "rosenbrock_chain": rosenbrock_chain,
    "convex_qp_grid": convex_qp_grid,
    "circle_packing": circle_packing,
}


def builtin_instance(family: str, size: int) -> Model:
    if family not in _BUILDERS:
        raise ValueError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
    if int(size) < 2:
        raise ValueError("size must be at least 2")
    return _BUILDERS[family](int(size))
