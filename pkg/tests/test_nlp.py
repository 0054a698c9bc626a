import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pivotfree import nlp
from pivotfree.kkt import DerivativeBundle, Formulation, IterateState, assemble
from pivotfree.model import builtin_instance, eval_objective, gradient, jacobian, eval_constraints
from pivotfree.nlp import (
    NlpStatus,
    RegularizationExhausted,
    RegularizationSchedule,
    barrier_update,
    fraction_to_boundary,
    inertia_correct,
    solve_nlp,
)
from pivotfree.sparse import SparseMatrix

import oracles
from problems import bilinear_disk, nonconvex_suite, sum_of_squares_halfplane


def scalar_ws(h, form=Formulation.PRIMAL, mu=0.1):
    # H = h, J = 1, s = lam = 1 so that the condensed value is h + dp + 1/(1 + dd)
    bundle = DerivativeBundle(np.zeros(1), np.ones(1), SparseMatrix.from_dense(np.array([[1.0]])),
                              SparseMatrix.from_dense(np.array([[h]]), lower=True))
    return assemble(form, bundle, IterateState(np.zeros(1), np.ones(1), np.ones(1), mu))


# -- scalar rules -------------------------------------------------------------------------


@pytest.mark.parametrize("mu, tol, expected", [(1.0, 1e-8, 0.2), (1e-8, 1e-8, 1e-9), (0.04, 1e-8, 0.008)])
def test_barrier_update(mu, tol, expected):
    assert barrier_update(mu, tol) == pytest.approx(expected, rel=1e-12)


def test_barrier_update_rejects_nonpositive():
    with pytest.raises(ValueError):
        barrier_update(0.0, 1e-8)


@pytest.mark.parametrize("v, dv, tau, alpha", [
    ([1.0, 2.0], [0.0, 3.0], 0.995, 1.0),
    ([1.0], [-1.0], 0.995, 0.995),
    ([2.0, 1.0], [-4.0, 1.0], 0.5, 0.25),
])
def test_fraction_to_boundary_examples(v, dv, tau, alpha):
    assert fraction_to_boundary(np.array(v), np.array(dv), tau) == pytest.approx(alpha)


@given(
    st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=8),
    st.lists(st.floats(-1e3, 1e3), min_size=8, max_size=8),
    st.floats(0.01, 0.999),
)
def test_fraction_to_boundary_property(v, dv, tau):
    v = np.array(v)
    dv = np.array(dv[: v.size])
    a = fraction_to_boundary(v, dv, tau)
    assert 0 < a <= 1
    assert np.all(v + a * dv >= (1 - tau) * v * (1 - 1e-12))
    if a < 1:  # maximal: some component binds
        assert np.any(np.isclose(v + a * dv, (1 - tau) * v, rtol=1e-9, atol=1e-12))


def test_inertia_correct_first_trial():
    ws = scalar_ws(-1.0)
    dp, dd = inertia_correct(ws, RegularizationSchedule(), 1, 1)
    assert dp == 1e-4
    assert dd == pytest.approx(1e-8 * 0.1 ** 0.25)
    assert ws.spd and ws.numeric.n_perturbed == 0


def test_inertia_correct_convex_needs_nothing():
    sched = RegularizationSchedule()
    assert inertia_correct(scalar_ws(2.0), sched, 1, 1) == (0.0, 0.0)
    assert sched.n_corrections == 0


def test_inertia_correct_large_negative_curvature():
    dp, _ = inertia_correct(scalar_ws(-1e6), RegularizationSchedule(), 1, 1)
    assert dp >= 1e6 - 1
    with pytest.raises(RegularizationExhausted):
        inertia_correct(scalar_ws(-1e6), RegularizationSchedule(delta_max=1e3), 1, 1)


def test_inertia_correct_reuses_last_value():
    sched = RegularizationSchedule()
    first, _ = inertia_correct(scalar_ws(-50.0), sched, 1, 1)
    # next correction starts at last/3 and grows by the subsequent factor
    second, _ = inertia_correct(scalar_ws(-50.0), sched, 1, 1)
    assert first == pytest.approx(1e-4 * 100**3)
    assert second == pytest.approx(first / 3 * 8)
    assert sched.n_corrections == 2


def test_inertia_correct_full_formulation_uses_target():
    ws = scalar_ws(-3.0, Formulation.FULL)
    dp, dd = inertia_correct(ws, RegularizationSchedule())
    assert dp > 0
    assert ws.numeric.inertia == ws.inertia_target()


def test_schedule_validation():
    with pytest.raises(ValueError):
        RegularizationSchedule(increase=0.5)
    with pytest.raises(ValueError):
        RegularizationSchedule(delta_0=1e50)


# -- solver ---------------------------------------------------------------------------------


def test_halfplane_example():
    rep = solve_nlp(sum_of_squares_halfplane())
    assert rep.status is NlpStatus.OPTIMAL
    assert rep.objective == pytest.approx(2.0, abs=1e-6)
    np.testing.assert_allclose(rep.x, [1.0, 1.0], atol=1e-6)


def test_bilinear_disk_example():
    rep = solve_nlp(bilinear_disk())
    assert rep.status is NlpStatus.OPTIMAL
    assert rep.objective == pytest.approx(-0.5, abs=1e-6)
    np.testing.assert_allclose(np.abs(rep.x), 1 / np.sqrt(2), atol=1e-5)
    assert rep.inertia_corrections > 0


def test_rosenbrock_50():
    rep = solve_nlp(builtin_instance("rosenbrock_chain", 50))
    assert rep.status is NlpStatus.OPTIMAL
    assert rep.iterations <= 100
    assert rep.objective <= 1e-8


@pytest.mark.parametrize("form", [Formulation.FULL, Formulation.AUGMENTED, Formulation.PRIMAL])
def test_formulations_reach_same_optimum(form):
    rep = solve_nlp(builtin_instance("circle_packing", 5), formulation=form)
    ref = solve_nlp(builtin_instance("circle_packing", 5))
    assert rep.solved
    assert rep.objective == pytest.approx(ref.objective, rel=1e-6)


def test_convex_qp_grid_optimum():
    rep = solve_nlp(builtin_instance("convex_qp_grid", 10))
    assert rep.solved and rep.objective == pytest.approx(0.0, abs=1e-8)


def test_optimal_residuals_within_tol():
    for model in (sum_of_squares_halfplane(), bilinear_disk()):
        rep = solve_nlp(model, tol=1e-8)
        assert max(rep.stationarity, rep.complementarity, rep.feasibility) <= 1e-8
        assert np.all(rep.s > 0) and np.all(rep.lam > 0)


def test_spd_and_descent_on_nonconvex(monkeypatch, rng):
    accepted = []
    original = nlp.inertia_correct

    def spy(ws, sched, n=None, m=None):
        out = original(ws, sched, n, m)
        accepted.append((bool(np.all(ws.numeric.d > 0)), ws.numeric.n_perturbed, ws.numeric.inertia))
        return out

    monkeypatch.setattr(nlp, "inertia_correct", spy)
    for model in nonconvex_suite(rng, 6):
        rep = solve_nlp(model, max_iter=200)
        assert rep.descent_violations == 0
        assert np.all(rep.s > 0) and np.all(rep.lam > 0)
    assert accepted
    assert all(pos and npert == 0 for pos, npert, _ in accepted)


def test_iteration_limit_and_log():
    lines = []
    rep = solve_nlp(builtin_instance("rosenbrock_chain", 10), max_iter=2, log=lines.append)
    assert rep.status is NlpStatus.ITERATION_LIMIT
    assert rep.iterations == 2
    assert lines[0].split()[:3] == ["iter", "objective", "mu"]
    assert len(lines) == 4
    assert len({len(line) for line in lines[1:]}) == 1  # fixed width
    assert json.loads(rep.to_json())["status"] == "IterationLimit"


def test_time_limit():
    rep = solve_nlp(builtin_instance("rosenbrock_chain", 10), max_wall_time=0.0)
    assert rep.status is NlpStatus.TIME_LIMIT


def test_solver_derivatives_match_fd(rng):
    for model in (bilinear_disk(), builtin_instance("circle_packing", 4), builtin_instance("rosenbrock_chain", 6)):
        x = model.x0 + 0.05 * rng.standard_normal(model.n)
        g = gradient(model, x)
        fd = oracles.central_diff(lambda z: eval_objective(model, z), x)
        assert np.max(np.abs(g - fd)) <= 1e-5 * max(1, np.max(np.abs(fd)))
        J = jacobian(model, x).to_dense()
        fdj = oracles.central_diff(lambda z: eval_constraints(model, z), x)
        assert np.max(np.abs(J - fdj)) <= 1e-5 * max(1, np.max(np.abs(fdj)))


def test_tighter_tolerance_needs_no_fewer_iterations():
    for model in (sum_of_squares_halfplane(), bilinear_disk(), builtin_instance("rosenbrock_chain", 10)):
        loose = solve_nlp(model, tol=1e-4)
        tight = solve_nlp(model, tol=1e-8)
        assert loose.solved and tight.solved
        assert loose.iterations <= tight.iterations
