import numpy as np
import pytest

from numpy.testing import assert_allclose

from app.adjoint import example51_trajectory
from app.constants import Flavor
from app.convexfn import Affine, ConvexQuadratic, MaxOfAffine
from app.exceptions import ConfigurationError, DimensionError, GridIndexError
from app.problem import (
    ContinuousProblem, Grid, GridTrajectory, delta, delta2, discretize, feasibility_residuals,
    grid_derivative, grid_second_derivative, infer_flavor, is_feasible, is_zero_function,
    objective_continuous, objective_discrete, polyhedral_data
)

from tests.helpers import E13, discrete_optimum


def test_grid_needs_four_steps():
    with pytest.raises(ConfigurationError):
        Grid(3)
    grid = Grid(4)
    assert grid.delta == 0.25
    assert grid.size == 5
    assert_allclose(grid.nodes, [0.0, 0.25, 0.5, 0.75, 1.0])


def test_trajectory_node_count_checked():
    with pytest.raises(DimensionError):
        GridTrajectory(Grid(10), np.zeros(10))


def test_trajectory_values_are_read_only():
    traj = GridTrajectory(Grid(4), np.ones(5))
    with pytest.raises(ValueError):
        traj.values[0, 0] = 2.0


def test_difference_index_range():
    traj = GridTrajectory(Grid(10), np.arange(11.0))
    assert_allclose(delta(traj, 9), [10.0])
    assert_allclose(delta2(traj, 8), [0.0])
    with pytest.raises(GridIndexError):
        delta(traj, 10)
    with pytest.raises(GridIndexError):
        delta2(traj, 9)
    with pytest.raises(GridIndexError):
        delta(traj, -1)


def test_forward_difference_of_exponential_brackets_slope():
    grid = Grid(100)
    traj = example51_trajectory(grid)
    slope = float(delta(traj, 0)[0])
    assert 1.0 / 3.0 <= slope <= np.exp(grid.delta / 3.0) / 3.0


def test_differences_match_pointwise_operators():
    traj = example51_trajectory(Grid(20))
    dx, d2x = traj.differences()
    assert dx.shape == (20, 1)
    assert d2x.shape == (19, 1)
    assert_allclose(dx[7], delta(traj, 7))
    assert_allclose(d2x[18], delta2(traj, 18))


def test_worked_example_objective_on_analytic_arc(example51_dp):
    traj = example51_trajectory(example51_dp.grid)
    delta_ = example51_dp.grid.delta
    assert objective_discrete(example51_dp, traj) == pytest.approx(
        np.exp((1.0 - delta_) / 3.0), abs=1e-12)
    assert objective_continuous(example51_dp.source, traj) == pytest.approx(E13, abs=1e-12)


def test_constant_trajectory_violates_worked_example(example51_dp):
    traj = GridTrajectory(example51_dp.grid, np.full(101, 2.0))
    table = feasibility_residuals(example51_dp, traj)
    assert table.max_constraint == pytest.approx(2.0)
    assert table.initial_state == pytest.approx(1.0)
    assert not is_feasible(example51_dp, traj)


def test_discrete_optimum_is_feasible(example51_dp):
    traj = discrete_optimum(example51_dp.grid)
    assert is_feasible(example51_dp, traj, feas_tol=1e-10)
    assert_allclose(example51_dp.phi_values(traj.values), 0.0, atol=1e-12)


def test_phi_agrees_with_phi_values(example51_dp):
    values = np.random.default_rng(2).normal(size=(101, 1))
    table = example51_dp.phi_values(values)
    assert table.shape == (1, 99)
    assert example51_dp.phi(0, values[40], values[41], values[42]) == pytest.approx(table[0, 40])


def test_fixed_values(example51_dp):
    assert_allclose(example51_dp.fixed_values, [[1.0], [1.0 + 0.01 / 3.0]])
    assert not example51_dp.terminal_is_free


def test_discrete_and_continuous_objectives_agree_to_first_order():
    pc = ContinuousProblem(Affine.state([1.0]), Affine.state([0.0]),
                           [Affine.constraint([1.0], [-3.0])], [1.0], [0.0])
    gaps = []
    for N in (50, 100, 200, 400):
        traj = GridTrajectory.sample(Grid(N), lambda t: 1.0 + 0.2 * np.sin(3.0 * t))
        gap = abs(objective_discrete(discretize(pc, N), traj) - objective_continuous(pc, traj))
        gaps.append(gap * N)
    # gap * N stays bounded
    assert max(gaps) < 2.0 * min(gaps) + 1e-9
    assert max(gaps) < 10.0


def test_objective_rejects_other_grid(example51_dp):
    with pytest.raises(DimensionError):
        objective_discrete(example51_dp, example51_trajectory(Grid(50)))


@pytest.mark.parametrize('p1, p2, flavor', [
    ([-3.0], [0.0], Flavor.W2),
    ([0.0], [1.0], Flavor.W1),
    ([1.0], [1.0], Flavor.FULL),
])
def test_infer_flavor(p1, p2, flavor):
    pc = ContinuousProblem(Affine.state([0.0]), Affine.state([1.0]),
                           [Affine.constraint([1.0], p1, p2)], [1.0], [0.0])
    assert infer_flavor(pc) == flavor


def test_continuous_problem_checks_dimensions():
    with pytest.raises(DimensionError):
        ContinuousProblem(Affine.state([0.0]), Affine.state([1.0]),
                          [Affine.constraint([1.0], [-3.0])], [1.0, 2.0], [0.0])
    with pytest.raises(ConfigurationError):
        ContinuousProblem(Affine.state([0.0]), Affine.state([1.0]), [], [1.0], [0.0])


def test_polyhedral_data():
    constraints = [Affine.constraint([1.0], [2.0], [3.0], offset=-4.0),
                   Affine.constraint([-1.0], offset=0.5)]
    P0, P1, Q, d = polyhedral_data(constraints)
    assert_allclose(P0, [[1.0], [-1.0]])
    assert_allclose(P1, [[2.0], [0.0]])
    assert_allclose(Q, [[-3.0], [0.0]])
    assert_allclose(d, [4.0, -0.5])


def test_polyhedral_data_rejects_nonaffine():
    w = MaxOfAffine([Affine.constraint([1.0]), Affine.constraint([-1.0])])
    with pytest.raises(ConfigurationError):
        polyhedral_data([w])


def test_is_zero_function():
    assert is_zero_function(Affine.state([0.0]))
    assert is_zero_function(ConvexQuadratic.state([[0.0]]))
    assert not is_zero_function(Affine.state([0.0], offset=1.0))


def test_grid_derivatives_of_quadratic_are_exact():
    grid = Grid(10)
    y = grid.nodes ** 2
    assert_allclose(grid_derivative(y, grid.delta), 2 * grid.nodes, atol=1e-12)
    assert_allclose(grid_second_derivative(y, grid.delta), 2.0, atol=1e-9)


def test_second_difference_is_nested_first_difference():
    rng = np.random.default_rng(4)
    for N in (4, 10, 100):
        traj = GridTrajectory(Grid(N), rng.uniform(-5.0, 5.0, size=(N + 1, 2)))
        for i in range(N - 1):
            nested = (delta(traj, i + 1) - delta(traj, i)) / traj.grid.delta
            assert_allclose(delta2(traj, i), nested, rtol=0.0, atol=1e-14)


def test_phi_matches_w_of_differences_on_random_trajectories():
    w_kinds = [
        Affine.constraint([0.7, -1.2], [2.0, 0.5], [-0.3, 1.1], offset=0.4),
        ConvexQuadratic.constraint(np.diag([1.0, 0.5, 0.2, 0.1, 0.05, 0.01]),
                                   linear=[0.0, 1.0, 0.0, -1.0, 0.0, 0.5]),
        MaxOfAffine([Affine.constraint([1.0, 0.0], [0.0, -1.0], [0.0, 0.0]),
                     Affine.constraint([0.0, -1.0], [0.5, 0.0], [0.0, 0.01])]),
    ]
    pc = ContinuousProblem(Affine.state([0.0, 0.0]), Affine.state([1.0, 1.0]), w_kinds,
                           [0.0, 0.0], [0.0, 0.0])
    dp = discretize(pc, 20)
    rng = np.random.default_rng(6)
    for _ in range(100):
        traj = GridTrajectory(dp.grid, rng.uniform(-1.0, 1.0, size=(21, 2)))
        x = traj.values
        for i in range(dp.rows):
            z = np.concatenate([x[i], delta(traj, i), delta2(traj, i)])
            for k, w in enumerate(w_kinds):
                assert abs(dp.phi(k, x[i], x[i + 1], x[i + 2]) - w.evaluate(z)) <= 1e-13


def test_terminal_node_is_free_only_when_a_constraint_reads_it(example51_dp):
    assert not example51_dp.terminal_is_free
    curvature = ContinuousProblem(Affine.state([0.0]), Affine.state([1.0]),
                                  [Affine.constraint([0.0], [0.0], [-1.0], offset=-1.0)],
                                  [1.0], [0.0])
    dp = discretize(curvature, 10)
    assert dp.terminal_is_free
    values = np.zeros((11, 1))
    values[10] = 1.0
    # x(1) sits in the second difference of the last row only.
    assert dp.phi_values(values)[0, -1] == pytest.approx(-1.0 / dp.grid.delta ** 2 - 1.0)
    assert_allclose(dp.phi_values(values)[0, :-1], -1.0)
