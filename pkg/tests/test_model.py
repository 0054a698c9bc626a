from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from pivotfree.model import (
    FAMILIES,
    DomainError,
    ModelBuilder,
    builtin_instance,
    eval_constraints,
    eval_objective,
    expr as E,
    gradient,
    hessian_lagrangian,
    jacobian,
)

import oracles

x0, x1 = E.var(0), E.var(1)
pos0 = E.add(E.square(x0), 1.0)  # positive base for log/sqrt/pow

OPERATOR_CASES = {
    "neg": E.neg(E.mul(x0, x1)),
    "sin": E.sin(E.mul(x0, x1)),
    "cos": E.cos(E.add(x0, E.square(x1))),
    "exp": E.exp(E.mul(0.5, E.sub(x0, x1))),
    "log": E.log(E.add(pos0, x1 * x1)),
    "sqrt": E.sqrt(E.add(pos0, E.square(x1))),
    "square": E.square(E.sub(x0, E.mul(2.0, x1))),
    "add": E.add(E.mul(x0, x0), E.mul(3.0, x1)),
    "sub": E.sub(E.mul(x0, x1), E.square(x1)),
    "mul": E.mul(E.sin(x0), E.exp(x1)),
    "div": E.div(x0, E.add(E.square(x1), 1.0)),
    "pow_int": E.pow(E.add(x0, x1), 3),
    "pow_real": E.pow(pos0, 1.5),
    "pow_var": E.pow(pos0, E.sin(x1)),
}


def pair_model(expr, n=5, as_constraint=False):
    i = np.arange(n - 1)
    b = ModelBuilder(n)
    if as_constraint:
        b.constraint(expr, np.column_stack([i, i + 1]))
    else:
        b.objective(expr, np.column_stack([i, i + 1]))
    return b.build()


def rel(a, b):
    return np.max(np.abs(a - b), initial=0.0) / max(1.0, np.max(np.abs(b), initial=0.0))


# -- evaluation examples ---------------------------------------------------------------


def test_rosenbrock_values():
    m = builtin_instance("rosenbrock_chain", 2)
    assert eval_objective(m, np.ones(2)) == 0.0
    assert eval_objective(m, [-1.2, 1.0]) == pytest.approx(24.2, rel=1e-14)
    np.testing.assert_allclose(gradient(m, [-1.2, 1.0]), [-215.6, -88.0], rtol=1e-12)
    np.testing.assert_allclose(gradient(m, [-1.2, 1.0]),
                               oracles.central_diff(lambda z: eval_objective(m, z), [-1.2, 1.0]), rtol=1e-7)
    np.testing.assert_array_equal(gradient(builtin_instance("rosenbrock_chain", 7), np.ones(7)), 0.0)


def test_rosenbrock_objective_matches_tree_walk(rng):
    m = builtin_instance("rosenbrock_chain", 6)
    t = m.objectives[0]
    for _ in range(5):
        x = rng.standard_normal(6)
        naive = sum(oracles.tree_eval(t.expr, x[row]) for row in t.vars)
        assert eval_objective(m, x) == pytest.approx(naive, rel=1e-13)


def test_linear_template():
    m = ModelBuilder(1).objective(E.mul(E.param(0), E.var(0)), [[0]], [[3.0]]).build()
    assert eval_objective(m, [2.0]) == 6.0
    c = np.array([1.0, -2.0, 4.0])
    m = ModelBuilder(3).objective(E.mul(E.param(0), E.var(0)), np.arange(3)[:, None], c[:, None]).build()
    np.testing.assert_array_equal(gradient(m, np.array([5.0, 1.0, -7.0])), c)


def test_constraint_examples():
    m = ModelBuilder(2).constraint(E.sub(E.var(0), 1.0), [[0], [1]]).build()
    np.testing.assert_array_equal(eval_constraints(m, [1.0, 1.0]), [0.0, 0.0])
    m = ModelBuilder(2).constraint(E.add(E.square(x0), x1), lambda p: [0, 1], [[0.0]]).build()
    np.testing.assert_array_equal(eval_constraints(m, [2.0, 3.0]), [7.0])
    empty = ModelBuilder(3).objective(E.square(x0), [[0]]).build()
    assert eval_constraints(empty, np.zeros(3)).shape == (0,)
    assert jacobian(empty, np.zeros(3)).shape == (0, 3)


def test_linear_constraint_jacobian_and_zero_hessian(rng):
    A = rng.standard_normal((4, 3))
    expr = E.add(E.add(E.mul(E.param(0), x0), E.mul(E.param(1), x1)), E.mul(E.param(2), E.var(2)))
    m = ModelBuilder(3).constraint(expr, np.tile(np.arange(3), (4, 1)), A).build()
    np.testing.assert_allclose(jacobian(m, rng.standard_normal(3)).to_dense(), A)
    H = hessian_lagrangian(m, rng.standard_normal(3), rng.standard_normal(4), sigma=0.0)
    assert np.all(H.data == 0.0)


def test_hessian_sign_follows_lagrangian():
    m = ModelBuilder(1).constraint(E.square(x0), [[0]]).build()
    np.testing.assert_allclose(hessian_lagrangian(m, [0.3], [2.0], sigma=0.0).to_dense(), [[-4.0]])


def test_rosenbrock_hessian_matches_fd():
    m = builtin_instance("rosenbrock_chain", 2)
    x = np.array([-1.2, 1.0])
    H = hessian_lagrangian(m, x).to_dense(symmetric=True)
    np.testing.assert_allclose(H, [[1330.0, 480.0], [480.0, 200.0]], rtol=1e-12)
    fd = oracles.central_diff(lambda z: gradient(m, z), x)
    assert rel(H, fd) < 1e-4


# -- operators --------------------------------------------------------------------------


@pytest.mark.parametrize("name", sorted(OPERATOR_CASES))
def test_operator_derivatives(name, rng):
    expr = OPERATOR_CASES[name]
    obj = pair_model(expr)
    con = pair_model(expr, as_constraint=True)
    for _ in range(3):
        x = rng.uniform(-1.5, 1.5, 5)
        naive = sum(oracles.tree_eval(expr, x[[i, i + 1]]) for i in range(4))
        assert eval_objective(obj, x) == pytest.approx(naive, rel=1e-12, abs=1e-12)
        g = gradient(obj, x)
        assert rel(g, oracles.central_diff(lambda z: eval_objective(obj, z), x)) < 1e-5
        Jd = jacobian(con, x).to_dense()
        assert rel(Jd, oracles.central_diff(lambda z: eval_constraints(con, z), x)) < 1e-5
        H = hessian_lagrangian(obj, x).to_dense(symmetric=True)
        assert rel(H, oracles.central_diff(lambda z: gradient(obj, z), x, h=1e-5)) < 1e-4
        lam = rng.uniform(0.5, 2.0, 4)
        Hc = hessian_lagrangian(con, x, lam, sigma=0.0).to_dense(symmetric=True)
        fd = oracles.central_diff(lambda z: -jacobian(con, z).rmatvec(lam), x, h=1e-5)
        assert rel(Hc, fd) < 1e-4


@pytest.mark.parametrize(
    "expr, x, bad",
    [
        (E.log(x0), [1.0, -1.0, 2.0], 1),
        (E.sqrt(x0), [1.0, 4.0, -0.5], 2),
        (E.div(1.0, x0), [1.0, 0.0, 2.0], 1),
        (E.pow(x0, 0.5), [1.0, 2.0, -3.0], 2),
    ],
)
def test_domain_error_reports_instance(expr, x, bad):
    m = ModelBuilder(3).objective(expr, np.arange(3)[:, None]).build()
    with pytest.raises(DomainError) as info:
        eval_objective(m, np.array(x))
    assert info.value.instance == bad
    assert "objective template 0" in str(info.value)


def test_integer_power_of_negative_base_is_allowed():
    m = ModelBuilder(1).objective(E.pow(x0, 3), [[0]]).build()
    assert eval_objective(m, [-2.0]) == -8.0


# -- structure -----------------------------------------------------------------------------


def test_sparsity_replication():
    m = builtin_instance("rosenbrock_chain", 10)
    t = m.objectives[0]
    assert t.tape.hess_pairs.shape[0] == 3
    assert m._hess_plan.ntrip == sum(
        tt.n_instances * tt.tape.hess_pairs.shape[0] for tt in m.objectives + m.constraints
    )
    # 10 diagonal entries plus 9 sub-diagonal ones after summing overlaps
    assert m.nnz_hess == 19
    assert m.nnz_jac == 10


def test_hessian_symmetric_dense_mirror(rng):
    m = builtin_instance("circle_packing", 4)
    x = rng.uniform(-0.6, 0.6, m.n)
    H = hessian_lagrangian(m, x, rng.uniform(0.1, 1, m.m))
    assert H.is_lower()
    D = H.to_dense(symmetric=True)
    np.testing.assert_array_equal(D, D.T)
    full = oracles.central_diff(lambda z: gradient(m, z) - jacobian(m, z).rmatvec(np.ones(m.m)), x, h=1e-5)
    np.testing.assert_allclose(full, full.T, atol=1e-4 * max(1, np.abs(full).max()))


def test_repeated_variable_in_one_instance():
    # both slots bound to the same variable: d2/dx2 (x*x) = 2
    m = ModelBuilder(1).objective(E.mul(x0, x1), [[0, 0]]).build()
    np.testing.assert_allclose(hessian_lagrangian(m, [3.0]).to_dense(), [[2.0]])
    np.testing.assert_allclose(gradient(m, [3.0]), [6.0])


def test_instance_order_and_parallel_merge(rng):
    n = 12
    size = 6
    base = builtin_instance("circle_packing", size)
    t = base.objectives[0]
    x = rng.uniform(-0.5, 0.5, n)
    ref_g = gradient(base, x)
    ref_h = hessian_lagrangian(base, x).to_dense(symmetric=True)

    perm = rng.permutation(t.n_instances)
    shuffled = ModelBuilder(n).objective(t.expr, t.vars[perm]).build()
    np.testing.assert_allclose(gradient(shuffled, x), ref_g, rtol=0, atol=1e-12)
    np.testing.assert_allclose(hessian_lagrangian(shuffled, x).to_dense(symmetric=True), ref_h, atol=1e-12)

    chunks = np.array_split(perm, 4)

    def partial(idx):
        sub = ModelBuilder(n).objective(t.expr, t.vars[idx]).build()
        return gradient(sub, x), hessian_lagrangian(sub, x).to_dense(symmetric=True)

    with ThreadPoolExecutor(4) as pool:
        parts = list(pool.map(partial, chunks))
    np.testing.assert_allclose(sum(p[0] for p in parts), ref_g, atol=1e-12)
    np.testing.assert_allclose(sum(p[1] for p in parts), ref_h, atol=1e-12)


def test_template_validation():
    with pytest.raises(ValueError):
        ModelBuilder(2).objective(E.mul(x0, x1), [[0]]).build()
    with pytest.raises(ValueError):
        ModelBuilder(2).objective(E.square(x0), [[5]]).build()
    with pytest.raises(ValueError):
        ModelBuilder(2).objective(E.var(1), [[0, 1]]).build()


# -- families --------------------------------------------------------------------------------


def test_family_shapes():
    r = builtin_instance("rosenbrock_chain", 50)
    assert (r.n, r.m) == (50, 50)
    assert eval_objective(r, np.ones(50)) == 0.0
    assert np.all(eval_constraints(r, r.x0) > 0)


def test_convex_qp_grid_unconstrained_minimizer_is_feasible():
    size = 4
    m = builtin_instance("convex_qp_grid", size)
    xstar = np.arange(size) / size
    assert eval_objective(m, xstar) == 0.0
    assert np.all(eval_constraints(m, xstar) >= 0)


def test_circle_packing_start_is_interior():
    m = builtin_instance("circle_packing", 3)
    assert np.all(eval_constraints(m, m.x0) > 0)
    assert np.isfinite(eval_objective(m, m.x0))


@pytest.mark.parametrize("bad", [("rosenbrock_chain", 1), ("nope", 5)])
def test_builtin_instance_errors(bad):
    with pytest.raises(ValueError):
        builtin_instance(*bad)


@pytest.mark.parametrize("family", FAMILIES)
def test_family_derivatives_match_fd(family, rng):
    m = builtin_instance(family, 5)
    for _ in range(3):
        x = m.x0 + 0.1 * rng.standard_normal(m.n)
        lam = rng.uniform(0.1, 2.0, m.m)
        assert rel(gradient(m, x), oracles.central_diff(lambda z: eval_objective(m, z), x)) < 1e-5
        assert rel(jacobian(m, x).to_dense(), oracles.central_diff(lambda z: eval_constraints(m, z), x)) < 1e-5
        H = hessian_lagrangian(m, x, lam).to_dense(symmetric=True)
        fd = oracles.central_diff(lambda z: gradient(m, z) - jacobian(m, z).rmatvec(lam), x, h=1e-5)
        assert rel(H, fd) < 1e-4
