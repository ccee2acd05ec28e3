import numpy as np
import pytest

from app.adjoint import (
    Certificate, alpha_grid, analytic_certificate_example51, analytic_derivatives_example51,
    example51_problem, example51_trajectory, reconstruct_adjoints
)
from app.constants import Flavor
from app.convexfn import Affine, MaxOfAffine
from app.exceptions import DimensionError, FlavorError, UnsupportedError
from app.problem import ContinuousProblem, Grid, GridTrajectory, discretize
from app.solver import solve

from tests.helpers import discrete_optimum


def exact_alpha_rows(dp):
    t = dp.grid.nodes[:dp.rows]
    return (np.exp((1.0 - t) / 3.0) / 3.0).reshape(1, -1)


@pytest.fixture(scope='module')
def solver_certificates():
    certificates = {}
    for N in (50, 200):
        dp = discretize(example51_problem(), N)
        result = solve(dp)
        assert result.converged
        certificates[N] = reconstruct_adjoints(dp, result.trajectory, result.multipliers,
                                               flavor=Flavor.W2)
    return certificates


def dual_errors(cert: Certificate):
    t = cert.grid.nodes
    window = t >= 2 * cert.grid.delta
    dual = np.exp((1.0 - t) / 3.0)
    ustar_error = np.max(np.abs(cert.ustar[window, 0] + dual[window]))
    alpha_error = np.max(np.abs(cert.alphas[window, 0] - dual[window] / 3.0))
    return ustar_error, alpha_error


def test_solver_duals_match_closed_form(solver_certificates):
    ustar_error, alpha_error = dual_errors(solver_certificates[200])
    assert ustar_error <= 0.1
    assert alpha_error <= 0.05


def test_solver_duals_improve_with_refinement(solver_certificates):
    coarse = dual_errors(solver_certificates[50])
    fine = dual_errors(solver_certificates[200])
    assert fine[0] <= coarse[0]
    assert fine[1] <= coarse[1]


def test_reconstruction_from_exact_multipliers(example51_dp):
    dp = example51_dp
    cert = reconstruct_adjoints(dp, discrete_optimum(dp.grid), exact_alpha_rows(dp))
    assert cert.flavor == Flavor.W2
    t = dp.grid.nodes
    assert np.max(np.abs(cert.ustar[:, 0] + np.exp((1.0 - t) / 3.0))) <= 5 * dp.grid.delta
    assert np.all(cert.xstar == 0.0)


def test_full_reconstruction_keeps_terminal_condition_and_identity(example51_dp):
    dp = example51_dp
    cert = reconstruct_adjoints(dp, discrete_optimum(dp.grid), exact_alpha_rows(dp),
                                flavor=Flavor.FULL)
    N, delta = dp.grid.N, dp.grid.delta
    assert np.all(cert.xstar[N] == 0.0)
    x, u, psi = cert.xstar[:, 0], cert.ustar[:, 0], cert.psistar[:, 0]
    for i in range(N - 1):
        lhs = (x[i] - u[i] + u[i + 1] - x[i + 2]) / delta ** 2
        rhs = (x[i + 2] - 2 * x[i + 1] + x[i]) / delta ** 2 + (psi[i + 1] - psi[i]) / delta
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_zero_multipliers_give_zero_certificate(example51_dp):
    dp = example51_dp
    for flavor in (Flavor.W2, Flavor.FULL):
        cert = reconstruct_adjoints(dp, discrete_optimum(dp.grid), np.zeros((1, dp.rows)),
                                    flavor=flavor)
        assert cert.nontriviality == 0.0


def test_reconstruction_rejects_wrong_flavor(example51_dp):
    with pytest.raises(FlavorError):
        reconstruct_adjoints(example51_dp, discrete_optimum(example51_dp.grid),
                             exact_alpha_rows(example51_dp), flavor=Flavor.W1)


def test_reconstruction_checks_multiplier_shape(example51_dp):
    with pytest.raises(DimensionError):
        reconstruct_adjoints(example51_dp, discrete_optimum(example51_dp.grid),
                             np.ones((1, 10)))


def test_reconstruction_needs_smooth_active_constraints():
    kink = MaxOfAffine([Affine.constraint([1.0], [-3.0]), Affine.constraint([-1.0])])
    pc = ContinuousProblem(Affine.state([0.0]), Affine.state([1.0]), [kink],
                           [0.0], [0.0])
    dp = discretize(pc, 10)
    traj = GridTrajectory(dp.grid, np.zeros(11))
    with pytest.raises(UnsupportedError):
        reconstruct_adjoints(dp, traj, np.ones((1, dp.rows)))


def test_alpha_grid_extends_last_row(example51_dp):
    rows = exact_alpha_rows(example51_dp)
    grid = alpha_grid(example51_dp, rows)
    assert grid.shape == (101, 1)
    assert grid[100, 0] == grid[99, 0] == rows[0, -1]


def test_analytic_certificate_values():
    cert = analytic_certificate_example51(4)
    assert cert.ustar[-1, 0] == pytest.approx(-1.0)
    assert cert.alphas[0, 0] == pytest.approx(np.exp(1.0 / 3.0) / 3.0)
    assert cert.alphas[0, 0] == pytest.approx(0.4652, abs=1e-4)
    assert np.all(cert.alphas > 0.0)
    assert np.all(cert.xstar == 0.0)


def test_analytic_certificate_satisfies_adjoint_equation():
    N = 100
    cert = analytic_certificate_example51(N)
    delta = Grid(N).delta
    u = cert.ustar[:, 0]
    residual = (u[2:] - u[:-2]) / (2 * delta) + u[1:-1] / 3.0
    assert np.max(np.abs(residual)) <= 5 * delta


def test_analytic_certificate_has_no_w1_form():
    with pytest.raises(FlavorError):
        analytic_certificate_example51(10, Flavor.W1)
    with pytest.raises(FlavorError):
        analytic_derivatives_example51(10, Flavor.W1)


def test_scaled_certificate_keeps_mu():
    cert = analytic_certificate_example51(10).scaled(2.0)
    assert cert.mu == 1.0
    assert cert.ustar[-1, 0] == pytest.approx(-2.0)
    assert cert.with_flavor(Flavor.FULL).flavor == Flavor.FULL


def test_analytic_arc_matches_discrete_optimum_to_first_order():
    grid = Grid(200)
    gap = np.max(np.abs(example51_trajectory(grid).values - discrete_optimum(grid).values))
    assert gap <= grid.delta
