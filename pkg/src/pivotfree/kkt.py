"""Assembly and solution of the four interior-point KKT formulations.

Unknown ordering of the full system is ``(d_x, d_s, -d_lam)``::

    [ H + dp I      0      J^T  ] [  d_x  ]     [ grad f - J^T lam  ]
    [    0      S^-1 Lam   -I   ] [  d_s  ] = - [ lam - mu S^-1 e   ]
    [    J         -I    -dd I  ] [ -d_lam]     [ g - s             ]

so the third block row reads ``J d_x - d_s + dd d_lam = -(g - s)`` and
``d_lam`` is the plain Newton step for the multipliers.

The reduced forms eliminate, in turn, ``d_s`` (augmented), then ``d_lam``
(primal condensed) or ``d_x`` (dual condensed).  Every formulation is solved
through :func:`solve_system`, which refines against the full 3x3 residual, so
all four return the same direction up to rounding.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .sparse import (
    CooPlan,
    FactorizationError,
    FactorOptions,
    Inertia,
    NumericFactorization,
    SparseMatrix,
    SymbolicFactorization,
    default_pivot_tol,
    ldlt_factorize,
    solve,
    symbolic_analyze,
)


class Formulation(str, enum.Enum):
    FULL = "full3x3"
    AUGMENTED = "augmented2x2"
    PRIMAL = "primal-condensed"
    DUAL = "dual-condensed"

    @classmethod
    def parse(cls, value) -> "Formulation":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {
            "full": cls.FULL, "full3x3": cls.FULL, "3x3": cls.FULL,
            "augmented": cls.AUGMENTED, "augmented2x2": cls.AUGMENTED, "2x2": cls.AUGMENTED,
            "primal": cls.PRIMAL, "primal-condensed": cls.PRIMAL, "primalcondensed": cls.PRIMAL,
            "dual": cls.DUAL, "dual-condensed": cls.DUAL, "dualcondensed": cls.DUAL, "normal": cls.DUAL,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown KKT formulation {value!r}") from None


class KktError(ValueError):
    pass


class EmptyProblem(KktError):
    pass


class NonDiagonalHessian(KktError):
    pass


class DenseRowWarning(UserWarning):
    """A condensed matrix will be (nearly) dense because of one Jacobian row or column."""


DENSE_FRACTION = 0.5
DENSE_MIN_DIM = 10


def _warn_dense(counts: np.ndarray, total: int, what: str):
    if total >= DENSE_MIN_DIM and counts.size and counts.max() > DENSE_FRACTION * total:
        k = int(np.argmax(counts))
        warnings.warn(f"Jacobian {what} {k} touches {int(counts[k])} of {total}; the condensed matrix fills in",
                      DenseRowWarning, stacklevel=4)


class NotPositiveDefinite(FactorizationError):
    """Primal condensed matrix factorized but is not SPD."""


@dataclass
class IterateState:
    x: np.ndarray
    s: np.ndarray
    lam: np.ndarray
    mu: float
    delta_p: float = 0.0
    delta_d: float = 0.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.s = np.asarray(self.s, dtype=np.float64)
        self.lam = np.asarray(self.lam, dtype=np.float64)
        if self.s.shape != self.lam.shape:
            raise ValueError("slack and multiplier vectors differ in length")
        if np.any(~(self.s > 0)) or np.any(~(self.lam > 0)):
            raise ValueError("slacks and multipliers must be strictly positive")
        if not self.mu > 0:
            raise ValueError("barrier parameter must be positive")
        if self.delta_p < 0 or self.delta_d < 0:
            raise ValueError("regularization must be nonnegative")

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def m(self) -> int:
        return self.s.size


@dataclass
class DerivativeBundle:
    """Derivatives at the current point.  ``hess`` is the lower triangle of
    the Lagrangian Hessian of ``f(x) - lam^T (g(x) - s)``."""

    grad: np.ndarray
    g: np.ndarray
    jac: SparseMatrix
    hess: SparseMatrix | None = None

    def __post_init__(self):
        self.grad = np.asarray(self.grad, dtype=np.float64)
        self.g = np.asarray(self.g, dtype=np.float64)
        n, m = self.grad.size, self.g.size
        if self.hess is None:
            self.hess = SparseMatrix.empty(n, n)
        if self.jac.shape != (m, n):
            raise ValueError(f"Jacobian shape {self.jac.shape} does not match (m, n) = ({m}, {n})")
        if self.hess.shape != (n, n) or not self.hess.is_lower():
            raise ValueError("Hessian must be stored as an n x n lower triangle")

    @property
    def n(self) -> int:
        return self.grad.size

    @property
    def m(self) -> int:
        return self.g.size


@dataclass
class Direction:
    dx: np.ndarray
    ds: np.ndarray
    dlam: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.dx, self.ds, self.dlam])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.stacked())))


def _pairs_by_group(groups: np.ndarray, other: np.ndarray, order: np.ndarray):
    """All (a, b) entry pairs sharing a group value, with other[a] >= other[b]."""
    groups = groups[order]
    if groups.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    bounds = np.flatnonzero(np.diff(groups)) + 1
    starts = np.concatenate([[0], bounds])
    stops = np.concatenate([bounds, [groups.size]])
    pa, pb, pg = [], [], []
    for lo, hi in zip(starts.tolist(), stops.tolist()):
        idx = order[lo:hi]
        k = idx.size
        a, b = np.tril_indices(k)
        ea, eb = idx[a], idx[b]
        swap = other[ea] < other[eb]
        ea, eb = np.where(swap, eb, ea), np.where(swap, ea, eb)
        pa.append(ea)
        pb.append(eb)
        pg.append(np.full(ea.size, groups[lo], dtype=np.int64))
    return np.concatenate(pa), np.concatenate(pb), np.concatenate(pg)


class _Plan:
    """Triplet layout of one formulation for fixed H and J patterns."""

    def __init__(self, formulation: Formulation, hess: SparseMatrix, jac: SparseMatrix):
        n, m = jac.ncols, jac.nrows
        self.formulation = formulation
        self.key = (hess.indptr.copy(), hess.indices.copy(), jac.indptr.copy(), jac.indices.copy())
        hr, hc = hess.indices, hess.col_indices()
        jr, jc = jac.indices, jac.col_indices()
        ar = np.arange(n, dtype=np.int64)
        am = np.arange(m, dtype=np.int64)
        if formulation is Formulation.FULL:
            rows = [hr, ar, n + am, n + m + jr, n + m + am, n + m + am]
            cols = [hc, ar, n + am, jc, n + am, n + m + am]
            dim = n + 2 * m
        elif formulation is Formulation.AUGMENTED:
            rows = [hr, ar, n + jr, n + am]
            cols = [hc, ar, jc, n + am]
            dim = n + m
        elif formulation is Formulation.PRIMAL:
            _warn_dense(np.bincount(jr, minlength=m), n, "row")
            order = np.lexsort((jc, jr))
            self.pa, self.pb, self.pg = _pairs_by_group(jr, jc, order)
            rows = [hr, ar, jc[self.pa]]
            cols = [hc, ar, jc[self.pb]]
            dim = n
        else:
            _warn_dense(np.diff(jac.indptr), m, "column")
            order = np.lexsort((jr, jc))
            self.pa, self.pb, self.pg = _pairs_by_group(jc, jr, order)
            rows = [am, jr[self.pa]]
            cols = [am, jr[self.pb]]
            dim = m
        self.dim = dim
        self.coo = CooPlan(np.concatenate(rows), np.concatenate(cols), (dim, dim))
        self.symbolic: SymbolicFactorization | None = None

    def matches(self, hess: SparseMatrix, jac: SparseMatrix) -> bool:
        hp, hi, jp, ji = self.key
        return (
            np.array_equal(hp, hess.indptr) and np.array_equal(hi, hess.indices)
            and np.array_equal(jp, jac.indptr) and np.array_equal(ji, jac.indices)
        )


@dataclass(eq=False)
class KktWorkspace:
    formulation: Formulation
    n: int
    m: int
    matrix: SparseMatrix | None = None
    symbolic: SymbolicFactorization | None = None
    numeric: NumericFactorization | None = None
    sigma: np.ndarray | None = None
    sigma_inv: np.ndarray | None = None
    hinv: np.ndarray | None = None
    signs: np.ndarray | None = None
    bundle: DerivativeBundle | None = None
    state: IterateState | None = None
    spd: bool | None = None
    last_residual: float = np.nan
    last_sweeps: int = 0
    n_analyses: int = 0
    _plan: _Plan | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return {
            Formulation.FULL: self.n + 2 * self.m,
            Formulation.AUGMENTED: self.n + self.m,
            Formulation.PRIMAL: self.n,
            Formulation.DUAL: self.m,
        }[self.formulation]

    def inertia_target(self) -> Inertia:
        if self.formulation is Formulation.FULL:
            return Inertia(self.n + self.m, self.m, 0)
        if self.formulation is Formulation.AUGMENTED:
            return Inertia(self.n, self.m, 0)
        return Inertia(self.dim, 0, 0)

    def reassemble(self, delta_p: float, delta_d: float) -> "KktWorkspace":
        state = replace(self.state, delta_p=float(delta_p), delta_d=float(delta_d))
        return assemble(self.formulation, self.bundle, state, workspace=self)


def assemble(formulation, bundle: DerivativeBundle, state: IterateState,
             workspace: KktWorkspace | None = None) -> KktWorkspace:
    """Build the KKT matrix of ``formulation`` at ``state``.

    Passing the previous ``workspace`` reuses its triplet plan and symbolic
    analysis while the H and J patterns stay the same.
    """
    formulation = Formulation.parse(formulation)
    n, m = bundle.n, bundle.m
    if n == 0:
        raise EmptyProblem("problem has no variables")
    if state.n != n or state.m != m:
        raise ValueError("iterate dimensions do not match the derivative bundle")
    hess, jac = bundle.hess, bundle.jac
    hdiag = hess.diagonal()
    hinv = None
    if formulation is Formulation.DUAL:
        off = hess.indices != hess.col_indices()
        if np.any(hess.data[off] != 0.0):
            raise NonDiagonalHessian("dual condensation needs a diagonal (1,1) block")
        hd = hdiag + state.delta_p
        if np.any(hd == 0.0):
            raise KktError("(1,1) block is singular; dual condensation needs delta_p > 0 or a definite diagonal")
        hinv = 1.0 / hd

    ws = workspace if workspace is not None and workspace.formulation is formulation else KktWorkspace(formulation, n, m)
    if ws.n != n or ws.m != m:
        ws = KktWorkspace(formulation, n, m)
    plan = ws._plan
    if plan is None or not plan.matches(hess, jac):
        plan = _Plan(formulation, hess, jac)
        ws._plan = plan
        ws.symbolic = None

    ds_diag = state.lam / state.s
    sigma = state.delta_d + state.s / state.lam
    sigma_inv = 1.0 / sigma
    dp, dd = state.delta_p, state.delta_d
    if formulation is Formulation.FULL:
        vals = [hess.data, np.full(n, dp), ds_diag, jac.data, -np.ones(m), np.full(m, -dd)]
        signs = np.concatenate([np.ones(n + m), -np.ones(m)])
    elif formulation is Formulation.AUGMENTED:
        vals = [hess.data, np.full(n, dp), jac.data, -sigma]
        signs = np.concatenate([np.ones(n), -np.ones(m)])
    elif formulation is Formulation.PRIMAL:
        jv = jac.data
        vals = [hess.data, np.full(n, dp), sigma_inv[plan.pg] * jv[plan.pa] * jv[plan.pb]]
        signs = np.ones(n)
    else:
        jv = jac.data
        vals = [sigma, hinv[plan.pg] * jv[plan.pa] * jv[plan.pb]]
        signs = np.ones(m)
    ws.matrix = plan.coo.build(np.concatenate(vals))
    if plan.symbolic is None:
        plan.symbolic = symbolic_analyze(ws.matrix)
        ws.n_analyses += 1
    ws.symbolic = plan.symbolic
    ws.numeric = None
    ws.spd = None
    ws.sigma, ws.sigma_inv, ws.hinv, ws.signs = sigma, sigma_inv, hinv, signs
    ws.bundle, ws.state = bundle, state
    return ws


def default_factor_options(formulation: Formulation, state: IterateState | None = None,
                           matrix: SparseMatrix | None = None) -> FactorOptions:
    formulation = Formulation.parse(formulation)
    if formulation is Formulation.PRIMAL:
        # the primal condensed system must be SPD as is; a perturbed pivot would hide that
        return FactorOptions(allow_perturbation=False)
    tol = default_pivot_tol(matrix) if matrix is not None else None
    if state is not None and tol is not None:
        # with dp, dd > 0 every exact pivot is at least min(dp, dd) in magnitude, so
        # only pivots well below that are rounding noise
        floor = {
            Formulation.FULL: min(state.delta_p, state.delta_d),
            Formulation.AUGMENTED: min(state.delta_p, state.delta_d + float(np.min(state.s / state.lam, initial=np.inf))),
            Formulation.DUAL: state.delta_d + float(np.min(state.s / state.lam, initial=np.inf)),
        }[formulation]
        if floor > 0:
            tol = min(tol, 0.5 * floor)
    return FactorOptions(pivot_tol=tol)


def factorize(ws: KktWorkspace, opts: FactorOptions | None = None) -> Inertia:
    if ws.matrix is None:
        raise KktError("workspace has not been assembled")
    opts = opts or default_factor_options(ws.formulation, ws.state, ws.matrix)
    ws.numeric = None
    ws.spd = False
    ws.numeric = ldlt_factorize(ws.matrix, ws.symbolic, opts, ws.signs)
    ws.spd = ws.numeric.is_spd()
    return ws.numeric.inertia


def _full_rhs(bundle: DerivativeBundle, state: IterateState):
    b1 = -(bundle.grad - bundle.jac.rmatvec(state.lam))
    b2 = -(state.lam - state.mu / state.s)
    b3 = -(bundle.g - state.s)
    return b1, b2, b3


def residual_vector(formulation, bundle: DerivativeBundle, state: IterateState) -> np.ndarray:
    """Right-hand side of ``formulation`` (the negated KKT residual, reduced by
    the same block eliminations that produce the matrix)."""
    formulation = Formulation.parse(formulation)
    b1, b2, b3 = _full_rhs(bundle, state)
    if formulation is Formulation.FULL:
        return np.concatenate([b1, b2, b3])
    # eliminate d_s from rows 2-3
    b3r = b3 + (state.s / state.lam) * b2
    if formulation is Formulation.AUGMENTED:
        return np.concatenate([b1, b3r])
    sigma = state.delta_d + state.s / state.lam
    if formulation is Formulation.PRIMAL:
        return b1 + bundle.jac.rmatvec(b3r / sigma)
    hinv = 1.0 / (bundle.hess.diagonal() + state.delta_p)
    return b3r - bundle.jac.matvec(hinv * b1)


def full_matvec(bundle: DerivativeBundle, state: IterateState, dx, ds, dlam):
    """Blocks of the full matrix applied to ``(dx, ds, -dlam)``."""
    r1 = bundle.hess.sym_matvec(dx) + state.delta_p * dx - bundle.jac.rmatvec(dlam)
    r2 = (state.lam / state.s) * ds + dlam
    r3 = bundle.jac.matvec(dx) - ds + state.delta_d * dlam
    return r1, r2, r3


def _reduced_solve(ws: KktWorkspace, b1, b2, b3):
    bundle, state = ws.bundle, ws.state
    n, m = ws.n, ws.m
    f = ws.formulation
    if f is Formulation.FULL:
        u = solve(ws.numeric, ws.symbolic, np.concatenate([b1, b2, b3]))
        return u[:n], u[n:n + m], -u[n + m:]
    ds_inv = state.s / state.lam
    b3r = b3 + ds_inv * b2
    if f is Formulation.AUGMENTED:
        u = solve(ws.numeric, ws.symbolic, np.concatenate([b1, b3r]))
        dx, dlam = u[:n], -u[n:]
    elif f is Formulation.PRIMAL:
        jac = bundle.jac
        dx = solve(ws.numeric, ws.symbolic, b1 + jac.rmatvec(ws.sigma_inv * b3r))
        dlam = -ws.sigma_inv * (jac.matvec(dx) - b3r)
    else:
        jac = bundle.jac
        dlam = solve(ws.numeric, ws.symbolic, b3r - jac.matvec(ws.hinv * b1))
        dx = ws.hinv * (b1 + jac.rmatvec(dlam))
    ds = ds_inv * (b2 - dlam)
    return dx, ds, dlam


def solve_system(ws: KktWorkspace, b1, b2, b3, max_sweeps: int = 3, rtol: float = 1e-12,
                 krylov: bool = True) -> Direction:
    """Solve the full system with an arbitrary right-hand side through the
    factored formulation, refining on the full residual.

    Richardson sweeps come first.  If they stall above the target (as after a
    perturbed pivot), GMRES on the full system, preconditioned by the reduced
    solve, takes over from the best iterate.
    """
    if ws.numeric is None:
        raise KktError("workspace has not been factorized")
    if ws.formulation is Formulation.PRIMAL and not ws.spd:
        raise NotPositiveDefinite(f"primal condensed matrix has inertia {ws.numeric.inertia}")
    bundle, state = ws.bundle, ws.state
    scale = 1.0 + max(np.max(np.abs(b), initial=0.0) for b in (b1, b2, b3))
    target = rtol * scale

    def residual(dx, ds, dlam):
        r1, r2, r3 = full_matvec(bundle, state, dx, ds, dlam)
        r = (b1 - r1, b2 - r2, b3 - r3)
        return r, max(np.max(np.abs(v), initial=0.0) for v in r)

    dx, ds, dlam = _reduced_solve(ws, b1, b2, b3)
    r, res = residual(dx, ds, dlam)
    best = (res, dx, ds, dlam)
    sweeps = 0
    while np.isfinite(res) and res > target and sweeps < max_sweeps:
        cx, cs, cl = _reduced_solve(ws, *r)
        dx, ds, dlam = dx + cx, ds + cs, dlam + cl
        sweeps += 1
        r, new = residual(dx, ds, dlam)
        if not new < res:
            res = new
            break
        res = new
        best = (res, dx, ds, dlam)
    res, dx, ds, dlam = best
    if krylov and (not np.isfinite(res) or res > 1e3 * target):
        dx, ds, dlam, res, extra = _gmres_refine(ws, (b1, b2, b3), (dx, ds, dlam), target)
        sweeps += extra
    ws.last_residual = float(res)
    ws.last_sweeps = sweeps
    return Direction(dx, ds, dlam)


def _gmres_refine(ws: KktWorkspace, rhs, x0, target):
    from scipy.sparse.linalg import LinearOperator, gmres

    bundle, state = ws.bundle, ws.state
    n, m = ws.n, ws.m
    N = n + 2 * m
    split = lambda u: (u[:n], u[n:n + m], u[n + m:])
    A = LinearOperator((N, N), matvec=lambda u: np.concatenate(full_matvec(bundle, state, *split(u))))
    M = LinearOperator((N, N), matvec=lambda u: np.concatenate(_reduced_solve(ws, *split(u))))
    b = np.concatenate(rhs)
    start = np.concatenate(x0)
    if not np.all(np.isfinite(start)):
        start = np.zeros(N)
    count = [0]

    def cb(_):
        count[0] += 1

    bnorm = np.linalg.norm(b)
    with np.errstate(all="ignore"):
        u, _ = gmres(A, b, x0=start, M=M, rtol=min(1e-14, target / max(bnorm, 1e-300)), atol=0.0,
                     restart=min(N, 30), maxiter=5, callback=cb, callback_type="pr_norm")
    res = float(np.max(np.abs(b - A.matvec(u)), initial=0.0))
    return (*split(u), res, count[0])


def solve_direction(ws: KktWorkspace, bundle: DerivativeBundle | None = None,
                    state: IterateState | None = None, **kw) -> Direction:
    """Newton direction at the workspace's iterate (``bundle``/``state`` must
    be the ones it was assembled with, if given)."""
    if (bundle is not None and bundle is not ws.bundle) or (state is not None and state is not ws.state):
        raise KktError("workspace was assembled for a different bundle or state")
    return solve_system(ws, *_full_rhs(ws.bundle, ws.state), **kw)


def dense_full_matrix(bundle: DerivativeBundle, state: IterateState) -> np.ndarray:
    n, m = bundle.n, bundle.m
    J = bundle.jac.to_dense()
    K = np.zeros((n + 2 * m, n + 2 * m))
    K[:n, :n] = bundle.hess.to_dense(symmetric=True) + state.delta_p * np.eye(n)
    K[:n, n + m:] = J.T
    K[n:n + m, n:n + m] = np.diag(state.lam / state.s)
    K[n:n + m, n + m:] = -np.eye(m)
    K[n + m:, :n] = J
    K[n + m:, n:n + m] = -np.eye(m)
    K[n + m:, n + m:] = -state.delta_d * np.eye(m)
    return K


def dense_oracle_direction(bundle: DerivativeBundle, state: IterateState) -> Direction:
    """Dense LU (partial pivoting) solve of the full system; a test oracle."""
    n, m = bundle.n, bundle.m
    if n + 2 * m > 200:
        raise ValueError("dense oracle is limited to n + 2m <= 200")
    K = dense_full_matrix(bundle, state)
    rhs = np.concatenate(_full_rhs(bundle, state))
    lu, piv = scipy.linalg.lu_factor(K, check_finite=True)
    if np.any(np.diag(lu) == 0.0):
        raise np.linalg.LinAlgError("singular KKT matrix")
    u = scipy.linalg.lu_solve((lu, piv), rhs)
    return Direction(u[:n], u[n:n + m], -u[n + m:])
