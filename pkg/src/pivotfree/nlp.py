"""Log-barrier interior-point method for ``min f(x)  s.t.  g(x) >= 0``.

Each iteration solves the Newton system of the barrier subproblem
``min f - mu sum log s  s.t.  g(x) - s = 0`` through a KKT formulation
(primal condensed by default), regularized by inertia correction so that the
factored matrix has the inertia of a descent-producing system.  Steps are
cut back by the fraction-to-boundary rule and an Armijo search on
``f - mu sum log s + nu |g - s|_1``.
"""

from __future__ import annotations

import enum
import json
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .kkt import (
    DerivativeBundle,
    Formulation,
    IterateState,
    KktError,
    KktWorkspace,
    assemble,
    factorize,
    solve_direction,
)
from .model import DomainError, Model
from .sparse import FactorizationError
from .steps import fraction_to_boundary

__all__ = [
    "NlpOptions",
    "NlpSolveReport",
    "NlpStatus",
    "RegularizationExhausted",
    "RegularizationSchedule",
    "barrier_update",
    "fraction_to_boundary",
    "inertia_correct",
    "solve_nlp",
]


class NlpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    ITERATION_LIMIT = "IterationLimit"
    TIME_LIMIT = "TimeLimit"
    NUMERICAL_FAILURE = "NumericalFailure"
    RESTORATION_NEEDED = "RestorationNeeded"


class RegularizationExhausted(FactorizationError):
    """No regularization up to ``delta_max`` produced the required inertia."""


@dataclass
class RegularizationSchedule:
    delta_min: float = 1e-20
    delta_0: float = 1e-4
    delta_max: float = 1e40
    increase_first: float = 100.0
    increase: float = 8.0
    decrease: float = 1.0 / 3.0
    dual_coef: float = 1e-8
    dual_exp: float = 0.25
    delta_p: float = 0.0
    delta_p_last: float = 0.0
    n_corrections: int = 0
    n_trials: int = 0

    def __post_init__(self):
        if not (self.increase_first > 1 and self.increase > 1 and 0 < self.decrease < 1):
            raise ValueError("increase factors must exceed 1 and the decrease factor lie in (0, 1)")
        if not 0 < self.delta_min <= self.delta_0 <= self.delta_max:
            raise ValueError("need 0 < delta_min <= delta_0 <= delta_max")

    def delta_d(self, mu: float) -> float:
        return self.dual_coef * mu ** self.dual_exp


def _accepts(ws: KktWorkspace, inertia) -> bool:
    if ws.formulation is Formulation.PRIMAL:
        return bool(ws.spd) and ws.numeric.n_perturbed == 0
    if ws.formulation is Formulation.DUAL:
        hd = ws.bundle.hess.diagonal() + ws.state.delta_p
        if np.any(hd <= 0):
            return False
    return inertia == ws.inertia_target() and ws.numeric.n_perturbed == 0


def _try(ws: KktWorkspace, dp: float, dd: float) -> bool:
    try:
        ws.reassemble(dp, dd)
        inertia = factorize(ws)
    except (FactorizationError, KktError):
        ws.numeric = None
        return False
    return _accepts(ws, inertia)


def inertia_correct(ws: KktWorkspace, sched: RegularizationSchedule, n: int | None = None,
                    m: int | None = None) -> tuple[float, float]:
    """Pick ``(delta_p, delta_d)`` and leave ``ws`` factorized with them.

    The unregularized matrix is tried first.  On failure ``delta_p`` restarts
    from ``delta_0`` (no earlier correction) or a fraction of the last
    successful value, and grows until the matrix is accepted: SPD without
    perturbed pivots for the primal condensed system, otherwise the inertia
    ``ws.inertia_target()``.
    """
    if n is not None and n != ws.n or m is not None and m != ws.m:
        raise ValueError("workspace dimensions do not match n, m")
    mu = ws.state.mu
    sched.n_trials += 1
    if _try(ws, 0.0, 0.0):
        sched.delta_p = 0.0
        return 0.0, 0.0
    sched.n_corrections += 1
    dd = sched.delta_d(mu)
    if sched.delta_p_last == 0.0:
        dp, grow = sched.delta_0, sched.increase_first
    else:
        dp, grow = max(sched.delta_min, sched.delta_p_last * sched.decrease), sched.increase
    while dp <= sched.delta_max:
        sched.n_trials += 1
        if _try(ws, dp, dd):
            sched.delta_p = sched.delta_p_last = dp
            return dp, dd
        dp *= grow
    sched.delta_p = dp
    raise RegularizationExhausted(f"no acceptable factorization with delta_p <= {sched.delta_max:g}")


def barrier_update(mu: float, tol: float) -> float:
    if not mu > 0:
        raise ValueError("mu must be positive")
    return max(tol / 10.0, min(0.2 * mu, mu ** 1.5))


@dataclass
class NlpOptions:
    tol: float = 1e-8
    max_iter: int = 500
    max_wall_time: float = 900.0
    mu0: float = 0.1
    formulation: Formulation | str = Formulation.PRIMAL
    scale_residuals: bool = True
    kappa_eps: float = 10.0
    kappa_sigma: float = 1e10
    armijo: float = 1e-4
    backtrack: float = 0.5
    min_step: float = 1e-12
    schedule: RegularizationSchedule = field(default_factory=RegularizationSchedule)


@dataclass
class NlpSolveReport:
    status: NlpStatus
    iterations: int
    objective: float
    stationarity: float
    complementarity: float
    feasibility: float
    mu: float
    inertia_corrections: int
    wall_time: float
    formulation: str = ""
    descent_violations: int = 0
    max_constraint_violation: float = 0.0
    x: np.ndarray = field(default=None, repr=False)
    s: np.ndarray = field(default=None, repr=False)
    lam: np.ndarray = field(default=None, repr=False)
    log: list = field(default_factory=list, repr=False)

    @property
    def solved(self) -> bool:
        return self.status is NlpStatus.OPTIMAL

    def to_dict(self, include_solution: bool = False) -> dict:
        d = asdict(self)
        d["status"] = self.status.value
        for k in ("x", "s", "lam", "log"):
            d.pop(k)
        if include_solution:
            d.update(x=self.x.tolist(), s=self.s.tolist(), lam=self.lam.tolist())
        return d

    def to_json(self, include_solution: bool = False) -> str:
        return json.dumps(self.to_dict(include_solution), indent=2)


LOG_HEADER = f"{'iter':>5} {'objective':>15} {'mu':>9} {'stat':>9} {'compl':>9} {'feas':>9} {'delta_p':>9} {'alpha_p':>9} {'alpha_d':>9}"


def _fmt(it, f, mu, res, dp, ap, ad) -> str:
    return f"{it:5d} {f:15.8e} {mu:9.2e} {res[0]:9.2e} {res[1]:9.2e} {res[2]:9.2e} {dp:9.2e} {ap:9.2e} {ad:9.2e}"


class _Evaluator:
    def __init__(self, model: Model):
        self.model = model

    def point(self, x):
        return self.model.objective(x), self.model.constraint_values(x)

    def bundle(self, x, lam):
        m = self.model
        return DerivativeBundle(m.gradient(x), m.constraint_values(x), m.jacobian(x),
                                m.hessian_lagrangian(x, lam, 1.0))


def _residuals(bundle: DerivativeBundle, s, lam, mu, scale: bool):
    m = lam.size
    sd = max(100.0, np.sum(np.abs(lam)) / m) / 100.0 if (scale and m) else 1.0
    stat = np.max(np.abs(bundle.grad - bundle.jac.rmatvec(lam)), initial=0.0) / sd
    comp = np.max(np.abs(s * lam - mu), initial=0.0) / sd
    feas = np.max(np.abs(bundle.g - s), initial=0.0)
    return float(stat), float(comp), float(feas)


def solve_nlp(model: Model, opts: NlpOptions | None = None,
              log: Callable[[str], None] | None = None, x0=None, **overrides) -> NlpSolveReport:
    opts = opts or NlpOptions()
    for k, v in overrides.items():
        if not hasattr(opts, k):
            raise TypeError(f"unknown NLP option {k!r}")
        setattr(opts, k, v)
    t0 = time.perf_counter()
    form = Formulation.parse(opts.formulation)
    sched = replace(opts.schedule, delta_p=0.0, delta_p_last=0.0, n_corrections=0, n_trials=0)
    ev = _Evaluator(model)
    lines: list[str] = []

    def emit(line):
        lines.append(line)
        if log:
            log(line)

    x = np.array(model.x0 if x0 is None else x0, dtype=np.float64)
    mu = float(opts.mu0)
    f, g = ev.point(x)
    s = np.maximum(g, 1e-2)
    lam = mu / s
    nu = 1.0
    ws = None
    violations = 0
    status = NlpStatus.ITERATION_LIMIT
    it = 0
    dp = ap = ad = 0.0
    emit(LOG_HEADER)

    while True:
        bundle = ev.bundle(x, lam)
        res0 = _residuals(bundle, s, lam, 0.0, opts.scale_residuals)
        emit(_fmt(it, f, mu, res0, dp, ap, ad))
        if max(res0) <= opts.tol:
            status = NlpStatus.OPTIMAL
            break
        # drive mu down while the current barrier subproblem is solved
        while mu > opts.tol / 10.0 and max(_residuals(bundle, s, lam, mu, opts.scale_residuals)) <= opts.kappa_eps * mu:
            mu = barrier_update(mu, opts.tol)
        if it >= opts.max_iter:
            break
        if time.perf_counter() - t0 > opts.max_wall_time:
            status = NlpStatus.TIME_LIMIT
            break

        state = IterateState(x, s, lam, mu)
        ws = assemble(form, bundle, state, workspace=ws)
        try:
            dp, dd = inertia_correct(ws, sched, model.n, model.m)
        except RegularizationExhausted:
            status = NlpStatus.NUMERICAL_FAILURE
            break
        d = solve_direction(ws)
        if not d.is_finite():
            status = NlpStatus.NUMERICAL_FAILURE
            break

        tau = max(0.99, 1.0 - mu)
        ap = fraction_to_boundary(s, d.ds, tau) if model.m else 1.0
        ad = fraction_to_boundary(lam, d.dlam, tau) if model.m else 1.0

        # merit slope along (dx, ds), with the penalty raised to make it a descent direction
        c = bundle.g - s
        cnorm = float(np.sum(np.abs(c)))
        lin = bundle.jac.matvec(d.dx) - d.ds
        dc = float(np.sum(np.where(c != 0, np.sign(c) * lin, np.abs(lin))))
        slope_b = float(bundle.grad @ d.dx - mu * np.sum(d.ds / s))
        if cnorm > 0:
            q = float(d.dx @ (bundle.hess.sym_matvec(d.dx) + dp * d.dx) + d.ds @ (lam / s * d.ds))
            nu_trial = (slope_b + 0.5 * max(q, 0.0)) / (0.9 * cnorm)
            if nu < nu_trial:
                nu = nu_trial + 1.0
        slope = slope_b + nu * dc
        stationary = max(_residuals(bundle, s, lam, mu, opts.scale_residuals)) <= 1e-14 * (1.0 + abs(f))
        if slope >= 0 and not stationary:
            violations += 1

        phi0 = f - mu * np.sum(np.log(s)) + nu * cnorm
        alpha = ap
        accepted = False
        while alpha >= opts.min_step:
            xt, st = x + alpha * d.dx, s + alpha * d.ds
            try:
                ft, gt = ev.point(xt)
            except DomainError:
                alpha *= opts.backtrack
                continue
            phit = ft - mu * np.sum(np.log(st)) + nu * np.sum(np.abs(gt - st))
            if np.isfinite(phit) and phit <= phi0 + opts.armijo * alpha * min(slope, 0.0):
                accepted = True
                break
            if np.isfinite(phit) and abs(phit - phi0) <= 1e-15 * max(1.0, abs(phi0)) and slope >= 0:
                accepted = True  # direction is at rounding level; accept the tiny change
                break
            alpha *= opts.backtrack
        if not accepted:
            status = NlpStatus.RESTORATION_NEEDED
            break
        ap = alpha
        x, s, f = xt, st, ft
        lam = lam + ad * d.dlam
        # keep each multiplier within a factor kappa_sigma of its centered value
        lam = np.clip(lam, mu / (opts.kappa_sigma * s), opts.kappa_sigma * mu / s)
        it += 1

    g = model.constraint_values(x)
    return NlpSolveReport(
        status, it, float(f), *res0, mu, sched.n_corrections, time.perf_counter() - t0,
        form.value, violations, float(np.max(-g, initial=0.0)), x, s, lam, lines,
    )
