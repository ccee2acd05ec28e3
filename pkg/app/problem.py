"""The continuous Bolza problem, its grid discretization and difference operators.

The horizon is [0, 1]. A grid with N steps has nodes t_i = i/N, i = 0..N,
and step delta = 1/N. Differences are forward differences:

    dx(i)  = (x(i+1) - x(i)) / delta            i = 0..N-1
    d2x(i) = (dx(i+1) - dx(i)) / delta          i = 0..N-2

The discrete problem minimizes

    sum_{i=2}^{N-2} delta f(x_i, t_i) + q(x_{N-1})

subject to W_k(x_i, dx(i), d2x(i)) <= 0 for i = 0..N-2, with x_0 = v0 and
x_1 = v0 + delta v1 fixed.
"""
import logging

import numpy as np

from dataclasses import dataclass
from scipy.integrate import trapezoid
from typing import Callable, Sequence

from app.constants import Block, Flavor, FnKind
from app.convexfn import Affine, ConvexQuadratic, ScalarFn
from app.exceptions import ConfigurationError, DimensionError, GridIndexError

logger = logging.getLogger(__name__)

MIN_STEPS = 4


def _readonly(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.flags.writeable = False
    return array


def first_difference(x0, x1, delta: float):
    return (x1 - x0) / delta


def second_difference(x0, x1, x2, delta: float):
    return (first_difference(x1, x2, delta) - first_difference(x0, x1, delta)) / delta


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [0, 1] with N steps. delta is always derived from N."""
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < MIN_STEPS:
            raise ConfigurationError(
                f"Grid needs an integer N >= {MIN_STEPS}, got {self.N}.")

    @property
    def delta(self) -> float:
        return 1.0 / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.N + 1) / self.N

    @property
    def size(self) -> int:
        return self.N + 1

    def time(self, i: int) -> float:
        return i / self.N


@dataclass(frozen=True, eq=False)
class GridTrajectory:
    """State values, one n-vector per node, stored as an (N+1, n) array."""
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2 or values.shape[0] != self.grid.size:
            raise DimensionError(
                f"Trajectory has {values.shape[0]} nodes, grid has "
                f"{self.grid.size}.")
        object.__setattr__(self, 'values', _readonly(values))

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @classmethod
    def sample(cls, grid: Grid, fn: Callable[[np.ndarray], np.ndarray]):
        """Sample a function of t, vectorized over the grid nodes."""
        return cls(grid, fn(grid.nodes))

    def differences(self) -> tuple[np.ndarray, np.ndarray]:
        """All forward differences: dx with N rows and d2x with N-1 rows."""
        x = self.values
        delta = self.grid.delta
        return (first_difference(x[:-1], x[1:], delta),
                second_difference(x[:-2], x[1:-1], x[2:], delta))


def delta(traj: GridTrajectory, i: int) -> np.ndarray:
    """Forward difference (x(t+delta) - x(t)) / delta at node i."""
    if not 0 <= i <= traj.grid.N - 1:
        raise GridIndexError(
            f"Forward difference needs node 0 <= i <= {traj.grid.N - 1}, got {i}.")
    x = traj.values
    return first_difference(x[i], x[i + 1], traj.grid.delta)


def delta2(traj: GridTrajectory, i: int) -> np.ndarray:
    """Second difference (dx(t+delta) - dx(t)) / delta at node i."""
    if not 0 <= i <= traj.grid.N - 2:
        raise GridIndexError(
            f"Second difference needs node 0 <= i <= {traj.grid.N - 2}, got {i}.")
    x = traj.values
    return second_difference(x[i], x[i + 1], x[i + 2], traj.grid.delta)


@dataclass(frozen=True, eq=False)
class ContinuousProblem:
    """Minimize the integral of f(x, t) plus q(x(1)) under W_k(x, x', x'') <= 0."""
    f: ScalarFn
    q: ScalarFn
    constraints: Sequence[ScalarFn]
    v0: np.ndarray
    v1: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'constraints', tuple(self.constraints))
        if not self.constraints:
            raise ConfigurationError("At least one constraint is required.")
        n = self.constraints[0].n
        for k, w in enumerate(self.constraints):
            if w.nblocks != 3 or w.n != n:
                raise DimensionError(
                    f"Constraint {k} has arity {w.arity}, expected {3 * n}.")
        for name, fn in (('f', self.f), ('q', self.q)):
            if fn.nblocks != 1 or fn.n != n:
                raise DimensionError(
                    f"{name} has arity {fn.arity}, expected {n}.")
        for name in ('v0', 'v1'):
            vec = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if vec.shape[0] != n:
                raise DimensionError(
                    f"{name} has dimension {vec.shape[0]}, expected {n}.")
            object.__setattr__(self, name, _readonly(vec))

    @property
    def n(self) -> int:
        return self.v0.shape[0]

    @property
    def m(self) -> int:
        return len(self.constraints)

    def depends_on(self, block: Block) -> bool:
        return any(Block(block) in w.depends_on for w in self.constraints)


@dataclass(frozen=True, eq=False)
class DiscreteProblem:
    """The grid problem of a ContinuousProblem. Constraint rows sit at nodes 0..N-2."""
    source: ContinuousProblem
    grid: Grid

    @property
    def n(self) -> int:
        return self.source.n

    @property
    def m(self) -> int:
        return self.source.m

    @property
    def rows(self) -> int:
        return self.grid.N - 1

    @property
    def fixed_values(self) -> np.ndarray:
        """x(0) and x(delta), the eliminated nodes."""
        v0, v1 = self.source.v0, self.source.v1
        return np.vstack([v0, v0 + self.grid.delta * v1])

    @property
    def terminal_is_free(self) -> bool:
        """True when some constraint reads x'', so x(1) enters the last row and is optimized."""
        return self.source.depends_on(Block.V2)

    def constraint_points(self, values: np.ndarray) -> np.ndarray:
        """W arguments (x, dx, d2x) at every constraint row, shape (N-1, 3n)."""
        traj_values = np.asarray(values, dtype=float)
        delta = self.grid.delta
        x0, x1, x2 = traj_values[:-2], traj_values[1:-1], traj_values[2:]
        return np.hstack([x0, first_difference(x0, x1, delta),
                          second_difference(x0, x1, x2, delta)])

    def phi(self, k: int, x0, x1, x2) -> float:
        """Composed constraint Phi_k at one row, in node values."""
        delta = self.grid.delta
        x0, x1, x2 = (np.asarray(v, dtype=float) for v in (x0, x1, x2))
        z = np.concatenate([x0, first_difference(x0, x1, delta),
                            second_difference(x0, x1, x2, delta)])
        return self.source.constraints[k].evaluate(z)

    def phi_values(self, values: np.ndarray) -> np.ndarray:
        """Phi_k at every row, shape (m, N-1)."""
        Z = self.constraint_points(values)
        return np.vstack([w.evaluate_many(Z) for w in self.source.constraints])

    def running_nodes(self) -> slice:
        return slice(2, self.grid.N - 1)


def discretize(pc: ContinuousProblem, N: int) -> DiscreteProblem:
    grid = Grid(N)
    dp = DiscreteProblem(pc, grid)
    logger.info(f"Discretized problem with n={pc.n}, m={pc.m} on N={N} "
                f"({dp.rows} constraint rows).")
    return dp


def _check_grid(dp: DiscreteProblem, traj: GridTrajectory):
    if traj.grid != dp.grid:
        raise DimensionError(
            f"Trajectory grid N={traj.grid.N} does not match problem grid "
            f"N={dp.grid.N}.")
    if traj.n != dp.n:
        raise DimensionError(
            f"Trajectory has state dimension {traj.n}, expected {dp.n}.")


def objective_discrete(dp: DiscreteProblem, traj: GridTrajectory) -> float:
    """Left-rectangle running cost over nodes 2..N-2 plus q(x(1-delta))."""
    _check_grid(dp, traj)
    nodes = dp.running_nodes()
    running = dp.source.f.evaluate_many(traj.values[nodes], dp.grid.nodes[nodes])
    terminal = dp.source.q.evaluate(traj.values[dp.grid.N - 1])
    return float(dp.grid.delta * np.sum(running) + terminal)


def objective_continuous(pc: ContinuousProblem, traj: GridTrajectory) -> float:
    """Trapezoid approximation, of order delta^2, of the integral plus q(x(1))."""
    if traj.n != pc.n:
        raise DimensionError(
            f"Trajectory has state dimension {traj.n}, expected {pc.n}.")
    grid = traj.grid
    running = pc.f.evaluate_many(traj.values, grid.nodes)
    return float(trapezoid(running, dx=grid.delta) + pc.q.evaluate(traj.values[-1]))


@dataclass(frozen=True, eq=False)
class FeasibilityTable:
    # max(0, Phi_k) per constraint and row, shape (m, N-1).
    constraints: np.ndarray
    initial_state: float
    initial_slope: float

    @property
    def max_constraint(self) -> float:
        return float(self.constraints.max(initial=0.0))

    @property
    def max_residual(self) -> float:
        return max(self.max_constraint, self.initial_state, self.initial_slope)


def feasibility_residuals(dp: DiscreteProblem, traj: GridTrajectory) -> FeasibilityTable:
    _check_grid(dp, traj)
    fixed = dp.fixed_values
    return FeasibilityTable(
        constraints=np.maximum(0.0, dp.phi_values(traj.values)),
        initial_state=float(np.max(np.abs(traj.values[0] - fixed[0]))),
        initial_slope=float(np.max(np.abs(traj.values[1] - fixed[1]))),
    )


def is_feasible(dp: DiscreteProblem, traj: GridTrajectory, feas_tol: float = 1e-8) -> bool:
    return feasibility_residuals(dp, traj).max_residual <= feas_tol


def infer_flavor(pc: ContinuousProblem) -> Flavor:
    """Certificate flavor implied by the constraint dependence tags."""
    if not pc.depends_on(Block.V2):
        return Flavor.W2
    if not pc.depends_on(Block.V1):
        return Flavor.W1
    return Flavor.FULL


def polyhedral_data(constraints: Sequence[ScalarFn]):
    """Matrices (P0, P1, Q) and vector d with W = P0 x + P1 x' - Q x'' - d.

    Each row belongs to one affine constraint.
    """
    rows = []
    for k, w in enumerate(constraints):
        if w.kind != FnKind.AFFINE:
            raise ConfigurationError(
                f"Constraint {k} is {w.kind.value}, polyhedral data needs affine.")
        rows.append(w)
    a = np.vstack([w.coefficients for w in rows])
    n = rows[0].n
    P0, P1, A2 = a[:, :n], a[:, n:2 * n], a[:, 2 * n:]
    d = -np.array([w.offset for w in rows])
    return P0, P1, -A2, d


def is_zero_function(fn: ScalarFn) -> bool:
    if isinstance(fn, Affine):
        return not np.any(fn.coefficients) and fn.offset == 0.0
    if isinstance(fn, ConvexQuadratic):
        return (not np.any(fn.matrix) and not np.any(fn.linear)
                and fn.offset == 0.0)
    return False


def grid_derivative(values: np.ndarray, delta: float) -> np.ndarray:
    """First derivative: central inside, second-order one-sided at the ends."""
    return np.gradient(np.asarray(values, dtype=float), delta, axis=0, edge_order=2)


def grid_second_derivative(values: np.ndarray, delta: float) -> np.ndarray:
    """Second derivative: central inside, second-order one-sided at the ends."""
    y = np.asarray(values, dtype=float)
    if y.shape[0] < 4:
        raise DimensionError("Second derivative needs at least 4 nodes.")
    d2 = np.empty_like(y)
    d2[1:-1] = (y[2:] - 2 * y[1:-1] + y[:-2]) / delta ** 2
    d2[0] = (2 * y[0] - 5 * y[1] + 4 * y[2] - y[3]) / delta ** 2
    d2[-1] = (2 * y[-1] - 5 * y[-2] + 4 * y[-3] - y[-4]) / delta ** 2
    return d2
