import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import central_difference, dense_state
from toposplit.assemble import assemble_operators
from toposplit.grid import inverter_problem, mbb_problem
from toposplit.model import (
    COMPLIANCE,
    MECHANISM,
    Problem,
    discreteness,
    hessian_model,
    objective_and_gradient,
    solve_adjoint,
    solve_state,
    volume_fraction,
)


@pytest.fixture(scope="module")
def mbb_ops():
    mesh, bc = mbb_problem(6, 2, load=1.0)
    return assemble_operators(mesh, bc, 0.06)


@pytest.fixture(scope="module")
def inverter_ops():
    mesh, bc = inverter_problem(8, 8)
    return assemble_operators(mesh, bc, 3e-4)


def test_state_matches_dense_oracle(mbb_ops):
    z = np.random.default_rng(3).uniform(0.1, 1.0, mbb_ops.mesh.n_nodes)
    c, u, E = dense_state(mbb_ops.mesh, mbb_ops.bc, mbb_ops.k_e, z, 3.0)
    state = solve_state(mbb_ops, z, 3.0)
    np.testing.assert_allclose(state.output, c, rtol=1e-10)
    np.testing.assert_allclose(mbb_ops.expand(state.U), u, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(state.E, E, rtol=1e-9, atol=1e-14)


def test_mechanism_state_matches_dense_oracle(inverter_ops):
    ops = inverter_ops
    z = np.random.default_rng(4).uniform(0.1, 1.0, ops.mesh.n_nodes)
    _, u, _ = dense_state(ops.mesh, ops.bc, ops.k_e, z, 3.0)
    state = solve_state(ops, z, 3.0)
    L = ops.bc.output_vector(ops.mesh.n_dofs)
    np.testing.assert_allclose(state.output, -(L @ u), rtol=1e-9)
    assert state.kind == MECHANISM and state.U_adj is not None


def test_adjoint_requires_output(mbb_ops):
    z = np.full(mbb_ops.mesh.n_nodes, 0.5)
    state = solve_state(mbb_ops, z, 3.0)
    with pytest.raises(ValueError):
        solve_adjoint(mbb_ops, z, 3.0, state)


def test_energies_positive_for_compliance(mbb_ops):
    state = solve_state(mbb_ops, np.full(mbb_ops.mesh.n_nodes, 0.5), 3.0)
    assert state.kind == COMPLIANCE
    assert np.all(state.E >= 0)


@pytest.mark.parametrize("which", ["mbb", "inverter"])
def test_gradient_against_finite_differences(which, mbb_ops, inverter_ops):
    ops = mbb_ops if which == "mbb" else inverter_ops
    lam = 2.0 if which == "mbb" else 0.15
    rng = np.random.default_rng(7)
    z = rng.uniform(0.2, 0.9, ops.mesh.n_nodes)
    ev = objective_and_gradient(ops, z, 3.0, lam)
    idx = rng.choice(z.size, 10, replace=False)
    fd = central_difference(lambda x: objective_and_gradient(ops, x, 3.0, lam).Jt, z, 1e-6, idx)
    err = np.linalg.norm(ev.grad_Jt[idx] - fd[idx]) / np.linalg.norm(ev.grad_Jt[idx])
    assert err <= 1e-6


def test_objective_composition(mbb_ops):
    z = np.random.default_rng(5).uniform(0.1, 1.0, mbb_ops.mesh.n_nodes)
    ev = objective_and_gradient(mbb_ops, z, 3.0, 4.0)
    np.testing.assert_allclose(ev.J, ev.output + 4.0 * z @ mbb_ops.v)
    np.testing.assert_allclose(ev.R, 0.5 * z @ (mbb_ops.G @ z))
    np.testing.assert_allclose(ev.Jt, ev.J + ev.R)
    np.testing.assert_allclose(ev.grad_Jt, ev.grad_J + mbb_ops.G @ z)


def test_volume_fraction_and_discreteness(mbb_ops):
    n = mbb_ops.mesh.n_nodes
    assert volume_fraction(mbb_ops, np.ones(n)) == pytest.approx(1.0)
    assert volume_fraction(mbb_ops, np.full(n, 0.5)) == pytest.approx(0.5)
    assert discreteness(mbb_ops, np.ones(n), 1e-3) == pytest.approx(0.0)
    assert discreteness(mbb_ops, np.full(n, 1e-3), 1e-3) == pytest.approx(0.0)
    # rho = 1/2: 4 (1/2 - d)(1/2) = 1 - 2d
    assert discreteness(mbb_ops, np.full(n, 0.5), 1e-3) == pytest.approx(100 * (1 - 2e-3))


def test_hessian_identity():
    h = hessian_model("identity", np.full(3, 0.5), np.zeros(3), 1e-3, alpha=2.0)
    np.testing.assert_array_equal(h.diag, 2.0)
    with pytest.raises(ValueError):
        hessian_model("identity", np.full(3, 0.5), np.zeros(3), 1e-3)


def test_hessian_reciprocal_and_floor():
    z = np.array([0.5, 0.25, 1.0])
    PtE = np.array([1.0, 0.0, -2.0])
    np.testing.assert_allclose(hessian_model("reciprocal", z, PtE, 0.1).diag, [4.0, 0.1, 0.1])
    np.testing.assert_allclose(hessian_model("reciprocal-absolute", z, PtE, 0.1).diag, [4.0, 0.1, 4.0])
    np.testing.assert_allclose(hessian_model("reciprocal", z, PtE, 0.1).matrix().diagonal(), [4.0, 0.1, 0.1])
    with pytest.raises(ValueError):
        hessian_model("newton", z, PtE, 0.1)
    with pytest.raises(ValueError):
        hessian_model("reciprocal", z, PtE, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_reciprocal_hessian_positive(seed):
    rng = np.random.default_rng(seed)
    z = rng.uniform(1e-3, 1, 20)
    for kind in ("reciprocal", "reciprocal-absolute"):
        assert np.all(hessian_model(kind, z, rng.normal(size=20), 1e-3).diag >= 1e-3)


def test_reciprocal_hessian_is_curvature_of_reciprocal_expansion():
    # J_rec(y) = sum c_k / y_k has second derivative 2 c_k / y_k^3; with c = E z^2
    # (first-order match at z: -c/z^2 = -E) this is 2 E / z
    z = np.array([0.3, 0.8])
    E = np.array([1.5, 0.2])
    c = E * z**2
    np.testing.assert_allclose(hessian_model("reciprocal", z, E, 1e-9).diag, 2 * c / z**3)


def test_problem_wrapper(mbb_ops):
    prob = Problem(mbb_ops, lam=3.0)
    assert prob.kind == COMPLIANCE and prob.n == mbb_ops.mesh.n_nodes
    z = np.full(prob.n, 0.5)
    assert prob.evaluate(z).lam == 3.0
    assert prob.evaluate(z, lam=1.0).lam == 1.0
