"""Mehrotra predictor-corrector interior-point method for ``min c^T x  s.t.  A x >= b``.

Regularization is fixed (no inertia loop): the KKT matrix always carries
``+dp I`` in the (1,1) block and ``-dd I`` in the (3,3) block.
"""

from __future__ import annotations

import enum
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .kkt import (
    DerivativeBundle,
    EmptyProblem,
    Formulation,
    IterateState,
    assemble,
    factorize,
    solve_system,
)
from .sparse import FactorizationError, SparseMatrix, write_matrix_market
from .steps import fraction_to_boundary


class LpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    ITERATION_LIMIT = "IterationLimit"
    TIME_LIMIT = "TimeLimit"
    NUMERICAL_FAILURE = "NumericalFailure"


class NumericalFailure(FactorizationError):
    pass


@dataclass(eq=False)
class LinearProgram:
    c: np.ndarray
    A: SparseMatrix
    b: np.ndarray
    name: str = "lp"
    var_names: list[str] | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=np.float64).ravel()
        self.b = np.asarray(self.b, dtype=np.float64).ravel()
        if not isinstance(self.A, SparseMatrix):
            self.A = SparseMatrix.from_dense(np.atleast_2d(np.asarray(self.A, dtype=np.float64)))
        if self.A.shape != (self.m, self.n):
            raise ValueError(f"A is {self.A.shape}, expected ({self.m}, {self.n}) from b and c")
        if self.var_names is not None and len(self.var_names) != self.n:
            raise ValueError("var_names must have one entry per variable")

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def m(self) -> int:
        return self.b.size

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.A.data))

    @property
    def empty_rows(self) -> np.ndarray:
        """Rows of ``A`` without a nonzero coefficient (allowed, but worth a warning)."""
        counts = np.bincount(self.A.indices[self.A.data != 0], minlength=self.m)
        return np.flatnonzero(counts == 0)

    def same_as(self, other: "LinearProgram") -> bool:
        return (
            self.n == other.n
            and self.m == other.m
            and np.array_equal(self.c, other.c)
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.A.to_dense(), other.A.to_dense())
        )


@dataclass
class LpOptions:
    tol: float = 1e-8
    max_iter: int = 500
    max_wall_time: float = 900.0
    formulation: Formulation | str = Formulation.DUAL
    # the (3,3) block is written as -dd I, so both constants are positive here
    delta_p: float = 1e-8
    delta_d: float = 1e-8
    dump_kkt: str | Path | None = None


@dataclass
class LpSolveReport:
    status: LpStatus
    iterations: int
    primal_objective: float
    dual_objective: float
    primal_infeasibility: float
    dual_infeasibility: float
    complementarity: float
    wall_time: float
    formulation: str = ""
    retries: int = 0
    x: np.ndarray = field(default=None, repr=False)
    s: np.ndarray = field(default=None, repr=False)
    lam: np.ndarray = field(default=None, repr=False)
    gap_history: list = field(default_factory=list, repr=False)

    @property
    def solved(self) -> bool:
        return self.status is LpStatus.OPTIMAL

    def to_dict(self, include_solution: bool = False) -> dict:
        d = asdict(self)
        d["status"] = self.status.value
        for k in ("x", "s", "lam", "gap_history"):
            d.pop(k)
        if include_solution:
            d.update(x=self.x.tolist(), s=self.s.tolist(), lam=self.lam.tolist())
        return d

    def to_json(self, include_solution: bool = False) -> str:
        return json.dumps(self.to_dict(include_solution), indent=2)


def initial_point(lp: LinearProgram) -> IterateState:
    """``x = 0``, ``s = max(1, |b|)``, ``lam = e``."""
    if lp.m == 0:
        raise EmptyProblem("LP has no constraints")
    s = np.maximum(1.0, np.abs(lp.b))
    lam = np.ones(lp.m)
    return IterateState(np.zeros(lp.n), s, lam, float(s @ lam / lp.m))


@dataclass
class _Measures:
    pinf: float
    dinf: float
    gap: float
    pobj: float
    dobj: float

    def converged(self, tol) -> bool:
        rel = abs(self.pobj - self.dobj) / (1.0 + abs(self.pobj))
        return max(self.pinf, self.dinf, self.gap) <= tol and rel <= tol


def _measures(lp: LinearProgram, x, s, lam) -> _Measures:
    rp = lp.A.matvec(x) - lp.b - s
    rd = lp.c - lp.A.rmatvec(lam)
    return _Measures(
        float(np.max(np.abs(rp), initial=0.0)),
        float(np.max(np.abs(rd), initial=0.0)),
        float(s @ lam / lp.m),
        float(lp.c @ x),
        float(lp.b @ lam),
    )


def solve_lp(lp: LinearProgram, opts: LpOptions | None = None,
             log: Callable[[str], None] | None = None, **overrides) -> LpSolveReport:
    opts = opts or LpOptions()
    for k, v in overrides.items():
        if not hasattr(opts, k):
            raise TypeError(f"unknown LP option {k!r}")
        setattr(opts, k, v)
    if not opts.tol > 0:
        raise ValueError("tol must be positive")
    form = Formulation.parse(opts.formulation)
    t0 = time.perf_counter()
    st = initial_point(lp)
    x, s, lam = st.x, st.s, st.lam
    m = lp.m
    hess = SparseMatrix.empty(lp.n, lp.n)
    grad = lp.c
    ws = None
    retries = 0
    gaps = []
    dump = Path(opts.dump_kkt) if opts.dump_kkt else None
    if dump:
        dump.mkdir(parents=True, exist_ok=True)

    status = LpStatus.ITERATION_LIMIT
    it = 0
    meas = _measures(lp, x, s, lam)
    gaps.append(meas.gap)
    while True:
        if meas.converged(opts.tol):
            status = LpStatus.OPTIMAL
            break
        if it >= opts.max_iter:
            status = LpStatus.ITERATION_LIMIT
            break
        if time.perf_counter() - t0 > opts.max_wall_time:
            status = LpStatus.TIME_LIMIT
            break
        bundle = DerivativeBundle(grad, lp.A.matvec(x) - lp.b, lp.A, hess)
        mu = float(s @ lam / m)
        dp, dd = opts.delta_p, opts.delta_d
        step = None
        for attempt in range(2):
            try:
                state = IterateState(x, s, lam, mu, dp, dd)
                ws = assemble(form, bundle, state, workspace=ws)
                factorize(ws)
                step = _mehrotra(ws, bundle, state)
                if step is not None:
                    break
            except FactorizationError:
                step = None
            retries += attempt == 0
            dp, dd = 2 * dp, 2 * dd
        if step is None:
            status = LpStatus.NUMERICAL_FAILURE
            break
        if dump:
            write_matrix_market(dump / f"kkt_{it:03d}.mtx", ws.matrix, comment=f"{form.value} iteration {it}")
        d, ap, ad, sigma = step
        x = x + ap * d.dx
        s = s + ap * d.ds
        lam = lam + ad * d.dlam
        it += 1
        meas = _measures(lp, x, s, lam)
        gaps.append(meas.gap)
        if log:
            log(f"{it:4d} {meas.pobj:+.8e} {meas.pinf:.2e} {meas.dinf:.2e} {meas.gap:.2e} "
                f"sigma {sigma:.1e} ap {ap:.3f} ad {ad:.3f}")

    return LpSolveReport(
        status, it, meas.pobj, meas.dobj, meas.pinf, meas.dinf, meas.gap,
        time.perf_counter() - t0, form.value, retries, x, s, lam, gaps,
    )


def _mehrotra(ws, bundle, state):
    """Predictor and corrector solves on one factorization; ``None`` on a non-finite step."""
    s, lam, m = state.s, state.lam, state.m
    b1 = -(bundle.grad - bundle.jac.rmatvec(lam))
    b3 = -(bundle.g - s)
    aff = solve_system(ws, b1, -lam, b3)
    if not aff.is_finite():
        return None
    ap = fraction_to_boundary(s, aff.ds, 1.0)
    ad = fraction_to_boundary(lam, aff.dlam, 1.0)
    gap = s @ lam / m
    gap_aff = (s + ap * aff.ds) @ (lam + ad * aff.dlam) / m
    sigma = float(np.clip((gap_aff / gap) ** 3, 1e-8, 1.0 - 1e-8))
    b2 = -lam + sigma * gap / s - aff.ds * aff.dlam / s
    d = solve_system(ws, b1, b2, b3)
    if not d.is_finite():
        return None
    return d, fraction_to_boundary(s, d.ds, 0.995), fraction_to_boundary(lam, d.dlam, 0.995), sigma
