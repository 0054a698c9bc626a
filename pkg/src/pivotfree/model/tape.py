"""Compiled templates: vectorized forward, reverse, and forward-over-reverse sweeps.

A :class:`Tape` is the topologically ordered node list of one expression.
Every sweep processes all instances of a template at once: node values are
arrays of length ``n_instances``.
"""

from __future__ import annotations

import numpy as np

from .expr import BINARY, UNARY, Expr


class DomainError(ArithmeticError):
    """An operation left its domain (log/sqrt of a negative number, division by zero, ...)."""

    def __init__(self, op: str, instance: int, where: str = ""):
        self.op = op
        self.instance = instance
        self.where = where
        loc = f"{where} instance {instance}" if where else f"instance {instance}"
        super().__init__(f"{op} out of domain at {loc}")


class Tape:
    def __init__(self, expr: Expr):
        order: list[Expr] = []
        index: dict[int, int] = {}
        stack = [(expr, False)]
        while stack:
            node, expanded = stack.pop()
            if id(node) in index:
                continue
            if expanded or not node.args:
                index[id(node)] = len(order)
                order.append(node)
                continue
            stack.append((node, True))
            for child in reversed(node.args):
                if id(child) not in index:
                    stack.append((child, False))
        self.ops = [nd.op for nd in order]
        self.args = [tuple(index[id(c)] for c in nd.args) for nd in order]
        self.values = [nd.value for nd in order]
        self.size = len(order)
        for op in self.ops:
            if op not in UNARY and op not in BINARY and op not in ("const", "var", "param"):
                raise ValueError(f"unknown operator {op!r}")
        var_slots = sorted({v for op, v in zip(self.ops, self.values) if op == "var"})
        par_slots = sorted({v for op, v in zip(self.ops, self.values) if op == "param"})
        self.n_var_slots = var_slots[-1] + 1 if var_slots else 0
        self.n_param_slots = par_slots[-1] + 1 if par_slots else 0
        if var_slots != list(range(self.n_var_slots)) or par_slots != list(range(self.n_param_slots)):
            raise ValueError("slot ids must be dense 0..k-1 within a template")
        self._analyze()

    # -- structure ------------------------------------------------------

    def _const_exponent(self, i):
        e = self.args[i][1]
        return self.values[e] if self.ops[e] == "const" else None

    def _analyze(self):
        dep: list[frozenset] = []
        pairs: set[tuple[int, int]] = set()

        def cross(a, b):
            for i in a:
                for j in b:
                    pairs.add((max(i, j), min(i, j)))

        for i, op in enumerate(self.ops):
            a = self.args[i]
            if op == "var":
                dep.append(frozenset([self.values[i]]))
                continue
            if op in ("const", "param"):
                dep.append(frozenset())
                continue
            d = frozenset().union(*(dep[c] for c in a))
            dep.append(d)
            if op in ("sin", "cos", "exp", "log", "sqrt", "square"):
                cross(d, d)
            elif op == "mul":
                cross(dep[a[0]], dep[a[1]])
            elif op == "div":
                cross(dep[a[1]], dep[a[1]])
                cross(dep[a[0]], dep[a[1]])
            elif op == "pow":
                e = self._const_exponent(i)
                if e is None:
                    cross(d, d)
                elif e not in (0.0, 1.0):
                    cross(dep[a[0]], dep[a[0]])
        self.grad_slots = np.array(sorted(dep[-1]), dtype=np.int64)
        self.hess_pairs = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
        self.var_nodes = [i for i, op in enumerate(self.ops) if op == "var"]

    # -- sweeps ---------------------------------------------------------

    def forward(self, X: np.ndarray, P: np.ndarray, where: str = "", ids=None) -> list:
        """Node values for all instances.  ``X`` is (ninst, n_var_slots), ``P`` (ninst, n_param_slots)."""
        ninst = X.shape[0]
        vals: list = [None] * self.size

        def fail(op, mask):
            k = int(np.flatnonzero(mask)[0])
            raise DomainError(op, int(ids[k]) if ids is not None else k, where)

        with np.errstate(all="ignore"):
            for i, op in enumerate(self.ops):
                a = self.args[i]
                if op == "const":
                    v = np.full(ninst, self.values[i])
                elif op == "var":
                    v = X[:, self.values[i]]
                elif op == "param":
                    v = P[:, self.values[i]]
                elif op == "neg":
                    v = -vals[a[0]]
                elif op == "sin":
                    v = np.sin(vals[a[0]])
                elif op == "cos":
                    v = np.cos(vals[a[0]])
                elif op == "exp":
                    v = np.exp(vals[a[0]])
                elif op == "log":
                    u = vals[a[0]]
                    if np.any(bad := ~(u > 0)):
                        fail(op, bad)
                    v = np.log(u)
                elif op == "sqrt":
                    u = vals[a[0]]
                    if np.any(bad := ~(u >= 0)):
                        fail(op, bad)
                    v = np.sqrt(u)
                elif op == "square":
                    v = vals[a[0]] * vals[a[0]]
                elif op == "add":
                    v = vals[a[0]] + vals[a[1]]
                elif op == "sub":
                    v = vals[a[0]] - vals[a[1]]
                elif op == "mul":
                    v = vals[a[0]] * vals[a[1]]
                elif op == "div":
                    den = vals[a[1]]
                    if np.any(bad := den == 0):
                        fail(op, bad)
                    v = vals[a[0]] / den
                else:  # pow
                    u, w = vals[a[0]], vals[a[1]]
                    e = self._const_exponent(i)
                    if e is None or e != np.round(e):
                        if np.any(bad := ~(u > 0)):
                            fail(op, bad)
                    elif e < 0 and np.any(bad := u == 0):
                        fail(op, bad)
                    v = np.power(u, w)
                vals[i] = v
        return vals

    def reverse(self, vals: list, ninst: int) -> np.ndarray:
        """Gradient with respect to each variable slot, shape (ninst, n_var_slots)."""
        adj = [None] * self.size
        adj[-1] = np.ones(ninst)
        with np.errstate(all="ignore"):
            for i in range(self.size - 1, -1, -1):
                ai = adj[i]
                a = self.args[i]
                if ai is None or not a:
                    continue
                for c, g in zip(a, self._partials(i, vals)):
                    if g is None:
                        continue
                    adj[c] = ai * g if adj[c] is None else adj[c] + ai * g
        out = np.zeros((ninst, self.n_var_slots))
        for i in self.var_nodes:
            if adj[i] is not None:
                out[:, self.values[i]] += adj[i]
        return out

    def _partials(self, i, vals):
        op, a = self.ops[i], self.args[i]
        u = vals[a[0]]
        if op == "neg":
            return (-1.0,)
        if op == "sin":
            return (np.cos(u),)
        if op == "cos":
            return (-np.sin(u),)
        if op == "exp":
            return (vals[i],)
        if op == "log":
            return (1.0 / u,)
        if op == "sqrt":
            return (0.5 / vals[i],)
        if op == "square":
            return (2.0 * u,)
        w = vals[a[1]]
        if op == "add":
            return (1.0, 1.0)
        if op == "sub":
            return (1.0, -1.0)
        if op == "mul":
            return (w, u)
        if op == "div":
            return (1.0 / w, -vals[i] / w)
        # pow
        e = self._const_exponent(i)
        du = w * np.power(u, w - 1.0)
        if e is not None:
            return (du, None)
        return (du, vals[i] * np.log(u))

    def hessian(self, vals: list) -> np.ndarray:
        """Second derivatives for ``hess_pairs`` by forward-over-reverse.

        One forward tangent sweep per seed slot, each followed by a reverse
        sweep on (adjoint, adjoint tangent).  Returns (ninst, npairs).
        """
        ninst = vals[0].shape[0]
        pairs = self.hess_pairs
        H = np.zeros((ninst, len(pairs)))
        if not len(pairs):
            return H
        seeds = np.unique(pairs[:, 1])
        col_of = {}
        for q, (r, c) in enumerate(pairs.tolist()):
            col_of.setdefault(c, []).append((q, r))
        with np.errstate(all="ignore"):
            for j in seeds.tolist():
                t = self._tangents(vals, j, ninst)
                hcol = self._second_reverse(vals, t, ninst)
                for q, r in col_of[j]:
                    H[:, q] = hcol[:, r]
        return H

    def _tangents(self, vals, seed, ninst):
        t = [None] * self.size  # None means identically zero
        for i, op in enumerate(self.ops):
            a = self.args[i]
            if op == "var":
                t[i] = np.ones(ninst) if self.values[i] == seed else None
                continue
            if not a:
                continue
            acc = None
            for c, g in zip(a, self._partials(i, vals)):
                if g is None or t[c] is None:
                    continue
                term = g * t[c]
                acc = term if acc is None else acc + term
            t[i] = acc
        return t

    def _second_reverse(self, vals, t, ninst):
        adj = [None] * self.size
        dadj = [None] * self.size
        adj[-1] = np.ones(ninst)
        zero = np.zeros(ninst)

        def tan(c):
            return zero if t[c] is None else t[c]

        for i in range(self.size - 1, -1, -1):
            a = self.args[i]
            ai = adj[i]
            if ai is None or not a:
                continue
            di = dadj[i] if dadj[i] is not None else zero
            parts = self._partials(i, vals)
            dparts = self._partial_tangents(i, vals, t, tan)
            for c, g, dg in zip(a, parts, dparts):
                if g is None:
                    continue
                add_a = ai * g
                add_d = di * g + (ai * dg if dg is not None else 0.0)
                adj[c] = add_a if adj[c] is None else adj[c] + add_a
                dadj[c] = add_d if dadj[c] is None else dadj[c] + add_d
        out = np.zeros((ninst, self.n_var_slots))
        for i in self.var_nodes:
            if dadj[i] is not None:
                out[:, self.values[i]] += dadj[i]
        return out

    def _partial_tangents(self, i, vals, t, tan):
        """Directional derivatives of the local partials along the tangent."""
        op, a = self.ops[i], self.args[i]
        if op in ("neg", "add", "sub"):
            return (None,) * len(a)
        u = vals[a[0]]
        tu = tan(a[0])
        if op == "sin":
            return (-np.sin(u) * tu,)
        if op == "cos":
            return (-np.cos(u) * tu,)
        if op == "exp":
            return (vals[i] * tu,)
        if op == "log":
            return (-tu / (u * u),)
        if op == "sqrt":
            v = vals[i]
            return (-0.25 * tu / (v * v * v),)
        if op == "square":
            return (2.0 * tu,)
        w = vals[a[1]]
        tw = tan(a[1])
        if op == "mul":
            return (tw, tu)
        if op == "div":
            return (-tw / (w * w), -tu / (w * w) + 2.0 * u * tw / (w * w * w))
        e = self._const_exponent(i)
        if e is not None:
            coef = e * (e - 1.0)
            if coef == 0.0:
                return (None, None)
            return (coef * np.power(u, e - 2.0) * tu, None)
        v = vals[i]
        lu = np.log(u)
        pu = np.power(u, w - 1.0)
        du_u = w * (w - 1.0) * np.power(u, w - 2.0)
        du_w = pu + w * pu * lu
        tv = w * pu * tu + v * lu * tw
        return (du_u * tu + du_w * tw, tv * lu + v * tu / u)
