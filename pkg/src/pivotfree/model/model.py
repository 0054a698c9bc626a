"""Iterator-template models with sparse derivatives.

A model is ``min sum_t sum_p f_t(x; p)  s.t.  g_t(x; p) >= 0`` where every
template ``t`` is one expression instantiated over an array of records.
Derivative structure is computed per template once and replicated over its
instances with shifted indices; overlapping contributions are summed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..sparse import CooPlan, SparseMatrix
from .expr import Expr
from .tape import Tape


class TemplateKind(str, enum.Enum):
    OBJECTIVE = "objective"
    CONSTRAINT = "constraint"


@dataclass(eq=False)
class Template:
    expr: Expr
    vars: np.ndarray  # (ninst, k) global variable index of each slot
    params: np.ndarray  # (ninst, p)
    kind: TemplateKind
    tape: Tape = field(init=False, repr=False)

    def __post_init__(self):
        self.tape = Tape(self.expr)
        self.vars = np.asarray(self.vars, dtype=np.int64)
        self.params = np.asarray(self.params, dtype=np.float64)
        ninst = self.vars.shape[0]
        if self.params.ndim == 1:
            self.params = self.params.reshape(ninst, -1)
        if self.vars.ndim != 2 or self.vars.shape[1] < self.tape.n_var_slots:
            raise ValueError(
                f"template uses {self.tape.n_var_slots} variable slots but records supply {self.vars.shape[1:]}"
            )
        if self.params.shape[0] != ninst or self.params.shape[1] < self.tape.n_param_slots:
            raise ValueError(
                f"template uses {self.tape.n_param_slots} parameter slots but records supply {self.params.shape}"
            )

    @property
    def n_instances(self) -> int:
        return self.vars.shape[0]


def _as_records(n_inst, vars, params):
    if params is None:
        params = np.zeros((n_inst if n_inst is not None else 0, 0))
    params = np.asarray(params, dtype=np.float64)
    if params.ndim == 1:
        params = params.reshape(-1, 1)
    if callable(vars):
        vars = np.array([np.atleast_1d(vars(p)) for p in params], dtype=np.int64)
        if vars.size == 0:
            vars = vars.reshape(params.shape[0], 0)
    vars = np.asarray(vars, dtype=np.int64)
    if vars.ndim == 1:
        vars = vars.reshape(-1, 1)
    if params.shape[0] == 0 and vars.shape[0] > 0:
        params = np.zeros((vars.shape[0], 0))
    return vars, params


class ModelBuilder:
    """Collects templates, then :meth:`build` freezes them into a :class:`Model`.

    ``vars`` is an integer array (one row of global variable indices per
    instance) or a callable mapping a parameter record to that row.
    """

    def __init__(self, n: int, x0=None, name: str = "model"):
        self.n = int(n)
        self.x0 = np.zeros(self.n) if x0 is None else np.asarray(x0, dtype=np.float64)
        self.name = name
        self._obj: list[Template] = []
        self._con: list[Template] = []

    def objective(self, expr: Expr, vars, params=None) -> "ModelBuilder":
        v, p = _as_records(None, vars, params)
        self._obj.append(Template(expr, v, p, TemplateKind.OBJECTIVE))
        return self

    def constraint(self, expr: Expr, vars, params=None) -> "ModelBuilder":
        v, p = _as_records(None, vars, params)
        self._con.append(Template(expr, v, p, TemplateKind.CONSTRAINT))
        return self

    def build(self) -> "Model":
        return Model(self.n, self._obj, self._con, self.x0, self.name)


class Model:
    def __init__(self, n: int, objectives, constraints, x0=None, name: str = "model"):
        self.n = int(n)
        self.name = name
        self.objectives = list(objectives)
        self.constraints = list(constraints)
        self.x0 = np.zeros(self.n) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
        if self.x0.shape != (self.n,):
            raise ValueError("initial point has the wrong length")
        for t in self.objectives + self.constraints:
            if t.n_instances and (t.vars.min() < 0 or t.vars.max() >= self.n):
                raise ValueError("template instance refers to a variable out of range")
        offsets = np.cumsum([0] + [t.n_instances for t in self.constraints])
        self.row_offsets = offsets[:-1]
        self.m = int(offsets[-1])
        self._build_sparsity()

    # -- structure ------------------------------------------------------

    def _build_sparsity(self):
        jr, jc = [], []
        for t, off in zip(self.constraints, self.row_offsets):
            slots = t.tape.grad_slots
            rows = off + np.arange(t.n_instances)
            jr.append(np.repeat(rows, slots.size))
            jc.append(t.vars[:, slots].ravel())
        cat = lambda parts: np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
        self._jac_plan = CooPlan(cat(jr), cat(jc), (self.m, self.n))

        hr, hc, self._hess_weight = [], [], []
        for t in self.objectives + self.constraints:
            pairs = t.tape.hess_pairs
            ia = t.vars[:, pairs[:, 0]]
            ib = t.vars[:, pairs[:, 1]]
            hr.append(np.maximum(ia, ib).ravel())
            hc.append(np.minimum(ia, ib).ravel())
            # an off-diagonal slot pair landing on one variable hits its diagonal twice
            offdiag = (pairs[:, 0] != pairs[:, 1])[None, :]
            self._hess_weight.append(np.where(offdiag & (ia == ib), 2.0, 1.0))
        self._hess_plan = CooPlan(cat(hr), cat(hc), (self.n, self.n))

    @property
    def nnz_jac(self) -> int:
        return self._jac_plan.nnz

    @property
    def nnz_hess(self) -> int:
        return self._hess_plan.nnz

    def instance_counts(self) -> dict:
        return {
            "objective": [t.n_instances for t in self.objectives],
            "constraint": [t.n_instances for t in self.constraints],
        }

    # -- evaluation -----------------------------------------------------

    def _check_x(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise ValueError(f"x has shape {x.shape}, expected ({self.n},)")
        return x

    @staticmethod
    def _forward(t: Template, x, label):
        ids = np.arange(t.n_instances)
        return t.tape.forward(x[t.vars], t.params, where=label, ids=ids)

    def objective(self, x) -> float:
        x = self._check_x(x)
        total = 0.0
        for k, t in enumerate(self.objectives):
            if t.n_instances:
                total += float(np.sum(self._forward(t, x, f"objective template {k}")[-1]))
        return total

    def constraint_values(self, x) -> np.ndarray:
        x = self._check_x(x)
        out = np.empty(self.m)
        for k, (t, off) in enumerate(zip(self.constraints, self.row_offsets)):
            if t.n_instances:
                out[off:off + t.n_instances] = self._forward(t, x, f"constraint template {k}")[-1]
        return out

    def gradient(self, x) -> np.ndarray:
        x = self._check_x(x)
        g = np.zeros(self.n)
        for k, t in enumerate(self.objectives):
            if not t.n_instances:
                continue
            vals = self._forward(t, x, f"objective template {k}")
            G = t.tape.reverse(vals, t.n_instances)
            np.add.at(g, t.vars[:, : G.shape[1]], G)
        return g

    def jacobian(self, x) -> SparseMatrix:
        x = self._check_x(x)
        parts = []
        for k, t in enumerate(self.constraints):
            slots = t.tape.grad_slots
            if not t.n_instances or not slots.size:
                continue
            vals = self._forward(t, x, f"constraint template {k}")
            parts.append(t.tape.reverse(vals, t.n_instances)[:, slots].ravel())
        return self._jac_plan.build(np.concatenate(parts) if parts else np.zeros(0))

    def hessian_lagrangian(self, x, lam=None, sigma: float = 1.0) -> SparseMatrix:
        """Lower triangle of ``sigma * hess f - sum_i lam_i * hess g_i``."""
        x = self._check_x(x)
        lam = np.zeros(self.m) if lam is None else np.asarray(lam, dtype=np.float64)
        if lam.shape != (self.m,):
            raise ValueError("multiplier vector has the wrong length")
        parts = []
        templates = [(t, None, f"objective template {k}") for k, t in enumerate(self.objectives)]
        templates += [
            (t, off, f"constraint template {k}")
            for k, (t, off) in enumerate(zip(self.constraints, self.row_offsets))
        ]
        for (t, off, label), weight in zip(templates, self._hess_weight):
            npairs = t.tape.hess_pairs.shape[0]
            if not t.n_instances or not npairs:
                parts.append(np.zeros(t.n_instances * npairs))
                continue
            if off is None:
                scale = np.full(t.n_instances, float(sigma))
            else:
                scale = -lam[off:off + t.n_instances]
            vals = self._forward(t, x, label)
            H = t.tape.hessian(vals)
            parts.append((H * weight * scale[:, None]).ravel())
        return self._hess_plan.build(np.concatenate(parts) if parts else np.zeros(0))

    def __repr__(self):
        return f"Model({self.name!r}, n={self.n}, m={self.m})"


def eval_objective(model: Model, x) -> float:
    return model.objective(x)


def eval_constraints(model: Model, x) -> np.ndarray:
    return model.constraint_values(x)


def gradient(model: Model, x) -> np.ndarray:
    return model.gradient(x)


def jacobian(model: Model, x) -> SparseMatrix:
    return model.jacobian(x)


def hessian_lagrangian(model: Model, x, lam=None, sigma: float = 1.0) -> SparseMatrix:
    return model.hessian_lagrangian(x, lam, sigma)
