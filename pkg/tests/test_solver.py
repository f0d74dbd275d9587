import numpy as np
import pytest
import scipy.sparse as sp

from geoshell import shapes
from geoshell.calculus import geodesic
from geoshell.energy import DiscreteShells, FlatQuadratic, hess_w
from geoshell.errors import SolverError
from geoshell.solver import (SolveReport, SolverConfig, collect_reports, newton_minimize,
                             newton_root_find, rigid_constraints)


def quadratic(A, b):
    A = sp.csr_matrix(A)

    def value(x):
        return 0.5 * x @ (A @ x) - b @ x

    def derivatives(x):
        return value(x), A @ x - b, A

    return value, derivatives


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tolerance=0.0)
    with pytest.raises(ValueError):
        SolverConfig(max_iterations=0)
    with pytest.raises(ValueError):
        SolverConfig(backtrack=1.0)
    with pytest.raises(ValueError):
        SolverConfig(rigid_handling="pin")


def test_quadratic_is_solved_in_one_step(rng):
    M = rng.normal(size=(20, 20))
    A = M @ M.T + 20 * np.eye(20)
    b = rng.normal(size=20)
    value, derivatives = quadratic(A, b)
    x, rep = newton_minimize(value, derivatives, np.zeros(20))
    assert rep.converged and rep.iterations == 1
    assert np.allclose(x, np.linalg.solve(A, b), atol=1e-12)
    assert all(e1 <= e0 for e0, e1 in zip(rep.energy_trace, rep.energy_trace[1:]))


def test_start_at_solution_needs_no_iterations(rng):
    A, b = np.diag(np.arange(1.0, 6.0)), rng.normal(size=5)
    value, derivatives = quadratic(A, b)
    x, rep = newton_minimize(value, derivatives, np.linalg.solve(A, b))
    assert rep.iterations == 0 and rep.converged
    assert rep.final_step_norm_squared < 1e-28


def test_nonconvex_start_still_descends():
    # Rosenbrock: indefinite Hessian away from the valley
    def value(z):
        x, y = z
        return (1 - x) ** 2 + 100 * (y - x * x) ** 2

    def derivatives(z):
        x, y = z
        g = np.array([-2 * (1 - x) - 400 * x * (y - x * x), 200 * (y - x * x)])
        H = np.array([[2 - 400 * (y - 3 * x * x), -400 * x], [-400 * x, 200.0]])
        return value(z), g, sp.csr_matrix(H)

    x, rep = newton_minimize(value, derivatives, np.array([-1.2, 1.0]),
                             SolverConfig(tolerance=1e-20))
    assert np.allclose(x, [1.0, 1.0], atol=1e-8)
    assert all(e1 <= e0 for e0, e1 in zip(rep.energy_trace, rep.energy_trace[1:]))


def test_iteration_limit_reports_non_convergence():
    def value(z):
        return float(np.cosh(z[0]))

    def derivatives(z):
        return value(z), np.array([np.sinh(z[0])]), sp.csr_matrix([[np.cosh(z[0])]])

    _, rep = newton_minimize(value, derivatives, np.array([3.0]),
                             SolverConfig(tolerance=1e-30, max_iterations=2))
    assert not rep.converged


def test_inadmissible_trials_backtrack():
    from geoshell.errors import InadmissibleStateError

    def value(z):
        if z[0] <= 0:
            raise InadmissibleStateError("negative")
        return z[0] - np.log(z[0])

    def derivatives(z):
        return value(z), np.array([1 - 1 / z[0]]), sp.csr_matrix([[1 / z[0] ** 2]])

    x, rep = newton_minimize(value, derivatives, np.array([5.0]), SolverConfig(tolerance=1e-24))
    assert x[0] == pytest.approx(1.0, abs=1e-10)


def test_root_find_linear_is_one_step(rng):
    J = rng.normal(size=(6, 6)) + 6 * np.eye(6)
    c = rng.normal(size=6)
    x, rep = newton_root_find(lambda x: (J @ x - c, sp.csr_matrix(J)), np.zeros(6))
    assert rep.iterations == 1
    assert np.allclose(J @ x, c, atol=1e-12)
    x2, rep2 = newton_root_find(lambda x: (J @ x - c, sp.csr_matrix(J)), x)
    assert rep2.iterations == 0


def test_root_find_nonlinear():
    x, rep = newton_root_find(lambda x: (x ** 3 - 8.0, sp.diags(3 * x ** 2)), np.array([1.0, 5.0]),
                              SolverConfig(tolerance=1e-26))
    assert np.allclose(x, 2.0, atol=1e-12)


def test_singular_system_raises():
    with pytest.raises(SolverError):
        newton_root_find(lambda x: (np.array([x[0] - 1, x[0] - 2]), sp.csr_matrix([[1.0, 0], [1.0, 0]])),
                         np.zeros(2))


def test_rigid_constraints_annihilate_nothing_but_fix_rigid_motions():
    x = shapes.bent_bar(0.5).positions
    C = rigid_constraints(x).toarray()
    assert C.shape == (6, x.size)
    c = x.mean(axis=0)
    rigid = [np.tile(e, (len(x), 1)).ravel() for e in np.eye(3)]
    rigid += [np.cross(e, x - c).ravel() for e in np.eye(3)]
    R = np.array(rigid).T
    assert np.linalg.matrix_rank(C @ R) == 6
    # invariant under scaling and translation of the mesh
    C2 = rigid_constraints(3.0 * x + 7.0).toarray()
    assert np.allclose(C, C2)


def test_augmented_system_removes_the_rigid_kernel():
    s = shapes.icosahedron()
    H = hess_w(DiscreteShells(), s, s, "22").toarray()
    sv = np.linalg.svd(H, compute_uv=False)
    assert np.sum(sv < 1e-10 * sv[0]) == 6
    C = rigid_constraints(s.positions).toarray()
    K = np.block([[H, C.T], [C, np.zeros((6, 6))]])
    svk = np.linalg.svd(K, compute_uv=False)
    assert svk[-1] > 1e-8 * svk[0]


def test_constraints_do_not_move_pinned_minimisers(flat_pair):
    a, b = flat_pair
    plain = geodesic(FlatQuadratic(), a, b, 4,
                     SolverConfig(rigid_handling="none"))
    gauged = geodesic(FlatQuadratic(), a, b, 4, SolverConfig())
    for p, q in zip(plain.path, gauged.path):
        assert np.abs(p.positions - q.positions).max() < 1e-12


def test_collect_reports_and_merge(rng):
    A, b = np.eye(3), rng.normal(size=3)
    value, derivatives = quadratic(A, b)
    with collect_reports() as outer:
        newton_minimize(value, derivatives, np.zeros(3))
        with collect_reports() as inner:
            newton_minimize(value, derivatives, np.ones(3))
    assert len(outer) == 2 and len(inner) == 1
    merged = SolveReport.merge(outer)
    assert merged.iterations == 2 and merged.converged
    assert SolveReport.merge([]).final_step_norm_squared == 0.0
    assert set(merged.to_dict()) >= {"iterations", "final_step_norm_squared", "converged"}
