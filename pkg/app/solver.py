"""Augmented-Lagrangian solver for the discretized problem and a grid-search oracle.

The free variables are the node values x(2 delta) .. x(1 - delta), plus x(1)
when some constraint reads the second difference. Otherwise x(1) enters
nothing and is set by linear extension.

For the inequality rows g <= 0 the smoothed augmented term is

    mu g + rho g^2 / 2      if mu + rho g > 0
    -mu^2 / (2 rho)         otherwise

and multipliers are updated by mu <- max(0, mu + rho g).
"""
import logging
import itertools

import numpy as np

from dataclasses import dataclass, field
from pydantic import Field, PositiveFloat, PositiveInt
from scipy.optimize import minimize
from typing import Sequence

from app.config import FrozenConfig
from app.constants import InnerMethod
from app.exceptions import ConfigurationError, DimensionError, NumericalFailure, UnsupportedError
from app.problem import (
    DiscreteProblem, GridTrajectory, first_difference, objective_discrete,
    second_difference
)
from app.transforms import w_to_phi_array

logger = logging.getLogger(__name__)

# Violation must shrink by this factor per outer step or the penalty grows.
PROGRESS_FACTOR = 0.25
MIN_STEP = 1e-20


class SolverConfig(FrozenConfig):
    max_outer: PositiveInt = 30
    max_inner: PositiveInt = 5000
    penalty_init: PositiveFloat = 1.0
    penalty_growth: float = Field(10.0, gt=1.0)
    penalty_max: PositiveFloat = 1e8
    grad_tol: PositiveFloat = 1e-8
    feas_tol: PositiveFloat = 1e-8
    # Backtracking parameters of the descent inner method.
    shrink: float = Field(0.5, gt=0.0, lt=1.0)
    sufficient_decrease: float = Field(1e-4, gt=0.0, lt=1.0)
    inner_method: InnerMethod = Field(InnerMethod.LBFGS, description=(
        "Inner minimizer of each outer step. 'descent' is gradient descent with "
        "backtracking. 'lbfgs', the default, runs scipy L-BFGS-B on the same smoothed "
        "objective."))
    memory: PositiveInt = 20
    seed: int = 0


@dataclass(frozen=True, eq=False)
class SolveResult:
    trajectory: GridTrajectory
    # Certificate multipliers alpha_k(t) = lambda_k(t) / delta, shape (m, N-1).
    multipliers: np.ndarray
    # Multipliers of the rows Phi_k <= 0 in the discrete Lagrangian.
    raw_multipliers: np.ndarray
    objective: float
    feasibility: float
    stationarity: float
    complementarity: float
    outer_iters: int
    converged: bool
    penalty: float
    violation_history: tuple = field(default_factory=tuple)
    penalty_increases: tuple = field(default_factory=tuple)

    def summary(self) -> dict:
        return {
            'objective': self.objective,
            'feasibility': self.feasibility,
            'stationarity': self.stationarity,
            'complementarity': self.complementarity,
            'outer_iters': self.outer_iters,
            'converged': self.converged,
            'penalty': self.penalty,
        }


def initial_guess(dp: DiscreteProblem) -> GridTrajectory:
    """x(t) = v0 + t v1 on every node."""
    nodes = dp.grid.nodes[:, None]
    return GridTrajectory(dp.grid, dp.source.v0 + nodes * dp.source.v1)


def objective_gradient(dp: DiscreteProblem, X: np.ndarray) -> np.ndarray:
    """Gradient of the discrete objective with respect to every node value."""
    G = np.zeros_like(X)
    nodes = dp.running_nodes()
    G[nodes] = dp.grid.delta * dp.source.f.gradient_many(X[nodes], dp.grid.nodes[nodes])
    last = dp.grid.N - 1
    G[last] += dp.source.q.gradient(X[last])
    return G


def row_gradients(dp: DiscreteProblem, X: np.ndarray) -> np.ndarray:
    """Gradients of Phi_k with respect to (x_i, x_i+1, x_i+2), shape (m, N-1, 3n)."""
    Z = dp.constraint_points(X)
    return np.stack([w_to_phi_array(w.gradient_many(Z), dp.grid.delta)
                     for w in dp.source.constraints])


def scatter_rows(dp: DiscreteProblem, weights: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Sum_k weights[k, i] * rows[k, i] placed onto the nodes i, i+1, i+2."""
    n = dp.n
    combined = np.einsum('ki,kij->ij', weights, rows)
    G = np.zeros((dp.grid.size, n))
    G[:-2] += combined[:, :n]
    G[1:-1] += combined[:, n:2 * n]
    G[2:] += combined[:, 2 * n:]
    return G


def _check_supported(dp: DiscreteProblem):
    for k, w in enumerate(dp.source.constraints):
        if not w.has_gradient:
            raise UnsupportedError(f"Constraint {k} has no subgradient available.")


def _undetermined_rows(al: 'AugmentedLagrangian', rows: np.ndarray) -> np.ndarray:
    """Rows whose gradient vanishes on every free node, shape (m, N-1)."""
    n = al.dp.n
    index = np.arange(rows.shape[1])
    touched = np.zeros(rows.shape[:2], dtype=bool)
    for b in range(3):
        node = index + b
        free = (node >= 2) & (node <= al.last)
        touched |= free & np.any(rows[:, :, b * n:(b + 1) * n] != 0.0, axis=2)
    return ~touched


def _fill_undetermined(lam: np.ndarray, phi: np.ndarray, undetermined: np.ndarray,
                       feas_tol: float) -> np.ndarray:
    """Price active rows the solve cannot see from the priced rows around them.

    Gaps are interpolated linearly and rows past the priced range are extended
    along the line through the two nearest priced rows, clipped at zero.
    Inactive rows get zero.
    """
    lam = lam.copy()
    for k in range(lam.shape[0]):
        priced = np.flatnonzero(~undetermined[k])
        for i in np.flatnonzero(undetermined[k]):
            if phi[k, i] < -feas_tol or priced.size == 0:
                lam[k, i] = 0.0
            elif priced.size == 1:
                lam[k, i] = lam[k, priced[0]]
            elif i < priced[0]:
                lam[k, i] = _extend(lam[k], priced[0], priced[1], i)
            elif i > priced[-1]:
                lam[k, i] = _extend(lam[k], priced[-1], priced[-2], i)
            else:
                lam[k, i] = np.interp(i, priced, lam[k, priced])
    return lam


def _extend(values: np.ndarray, near: int, far: int, i: int) -> float:
    slope = (values[near] - values[far]) / (near - far)
    return max(0.0, values[near] + slope * (i - near))


def _penalty_terms(g, mu, rho):
    return np.where(mu + rho * g > 0, mu * g + 0.5 * rho * g ** 2,
                    -mu ** 2 / (2 * rho))


class AugmentedLagrangian:
    """Inner objective of one outer iteration, measured from a base point."""

    def __init__(self, dp: DiscreteProblem, scale: np.ndarray):
        self.dp = dp
        self.scale = scale
        N = dp.grid.N
        self.last = N if dp.terminal_is_free else N - 1
        self.free = slice(2, self.last + 1)

    def values(self, y: np.ndarray) -> np.ndarray:
        dp = self.dp
        N = dp.grid.N
        X = np.empty((dp.grid.size, dp.n))
        X[:2] = dp.fixed_values
        X[self.free] = y.reshape(-1, dp.n)
        if self.last < N:
            X[N] = 2 * X[N - 1] - X[N - 2]
        return X

    def free_values(self, X: np.ndarray) -> np.ndarray:
        return np.array(X[self.free], dtype=float).reshape(-1)

    def objective_increment(self, X, X0) -> float:
        dp = self.dp
        nodes = dp.running_nodes()
        last = slice(dp.grid.N - 1, dp.grid.N)
        running = dp.source.f.increment_many(X[nodes], X0[nodes], dp.grid.nodes[nodes])
        terminal = dp.source.q.increment_many(X[last], X0[last])
        return float(dp.grid.delta * np.sum(running) + np.sum(terminal))

    def phi_increment(self, X, X0) -> np.ndarray:
        Z = self.dp.constraint_points(X)
        Z0 = self.dp.constraint_points(X0)
        return np.vstack([w.increment_many(Z, Z0) for w in self.dp.source.constraints])

    def inner_function(self, y0: np.ndarray, mu: np.ndarray, rho: float):
        """(value, gradient) of the augmented Lagrangian minus its value at y0."""
        X0 = self.values(y0)
        g0 = self.scale * self.dp.phi_values(X0)
        base = _penalty_terms(g0, mu, rho)

        def fun(y):
            X = self.values(y)
            g = g0 + self.scale * self.phi_increment(X, X0)
            value = self.objective_increment(X, X0) + float(
                np.sum(_penalty_terms(g, mu, rho) - base))
            weights = self.scale * np.maximum(0.0, mu + rho * g)
            G = objective_gradient(self.dp, X) + scatter_rows(
                self.dp, weights, row_gradients(self.dp, X))
            return value, self.free_values(G)

        return fun

    def stationarity(self, X: np.ndarray, lam: np.ndarray) -> float:
        G = objective_gradient(self.dp, X) + scatter_rows(
            self.dp, lam, row_gradients(self.dp, X))
        return float(np.max(np.abs(G[self.free]), initial=0.0))


def _minimize_lbfgs(fun, y, cfg: SolverConfig) -> np.ndarray:
    result = minimize(fun, y, jac=True, method='L-BFGS-B', options={
        'maxiter': cfg.max_inner,
        'maxfun': 4 * cfg.max_inner,
        'maxcor': cfg.memory,
        'ftol': 0.0,
        'gtol': 0.1 * cfg.grad_tol,
    })
    logger.debug(f"L-BFGS-B: {result.nit} iterations, {result.message}")
    return result.x


def _minimize_descent(fun, y, cfg: SolverConfig) -> np.ndarray:
    """Gradient descent with Armijo backtracking."""
    value, grad = fun(y)
    step = 1.0
    for _ in range(cfg.max_inner):
        if np.max(np.abs(grad), initial=0.0) <= 0.1 * cfg.grad_tol:
            break
        slope = float(grad @ grad)
        while True:
            trial = y - step * grad
            trial_value, trial_grad = fun(trial)
            if trial_value <= value - cfg.sufficient_decrease * step * slope:
                break
            step *= cfg.shrink
            if step < MIN_STEP:
                return y
        y, value, grad = trial, trial_value, trial_grad
        step = min(1.0, step / cfg.shrink)
    return y


INNER_METHODS = {
    InnerMethod.LBFGS: _minimize_lbfgs,
    InnerMethod.DESCENT: _minimize_descent,
}


def solve(dp: DiscreteProblem, cfg: SolverConfig | None = None,
          init: GridTrajectory | None = None) -> SolveResult:
    cfg = cfg or SolverConfig()
    _check_supported(dp)
    if init is None:
        init = initial_guess(dp)
    if init.grid != dp.grid or init.n != dp.n:
        raise DimensionError(
            f"Initial guess on N={init.grid.N} with n={init.n} does not match "
            f"the problem (N={dp.grid.N}, n={dp.n}).")

    X = np.array(init.values, dtype=float)
    X[:2] = dp.fixed_values
    rows = row_gradients(dp, X)
    scale = 1.0 / np.maximum(1.0, np.linalg.norm(rows, axis=2))
    al = AugmentedLagrangian(dp, scale)
    undetermined = _undetermined_rows(al, rows)
    y = al.free_values(X)

    mu = np.zeros((dp.m, dp.rows))
    lam = np.zeros_like(mu)
    rho = cfg.penalty_init
    inner = INNER_METHODS[cfg.inner_method]
    history, increases = [], []
    previous = np.inf
    converged = False
    violation = stationarity = np.inf
    logger.info(f"Solving on N={dp.grid.N} with {y.size} free values, "
                f"inner method {cfg.inner_method.value}.")

    outer = 0
    for outer in range(1, cfg.max_outer + 1):
        y = inner(al.inner_function(y, mu, rho), y, cfg)
        X = al.values(y)
        objective = objective_discrete(dp, GridTrajectory(dp.grid, X))
        if not (np.all(np.isfinite(X)) and np.isfinite(objective)):
            raise NumericalFailure(
                f"Non-finite iterate or objective at outer iteration {outer}.")
        phi = dp.phi_values(X)
        mu = np.maximum(0.0, mu + rho * scale * phi)
        lam = scale * mu
        violation = float(np.max(np.maximum(0.0, phi), initial=0.0))
        stationarity = al.stationarity(X, lam)
        history.append(violation)
        logger.debug(f"Outer {outer}: penalty={rho:g} violation={violation:.3e} "
                     f"stationarity={stationarity:.3e}")
        if violation <= cfg.feas_tol and stationarity <= cfg.grad_tol:
            converged = True
            break
        if violation > PROGRESS_FACTOR * previous and rho < cfg.penalty_max:
            rho = min(rho * cfg.penalty_growth, cfg.penalty_max)
            increases.append(outer)
        previous = violation

    trajectory = GridTrajectory(dp.grid, X)
    objective = objective_discrete(dp, trajectory)
    phi = dp.phi_values(X)
    lam = _fill_undetermined(lam, phi, undetermined, cfg.feas_tol)
    complementarity = float(np.max(np.abs(lam * phi), initial=0.0) / dp.grid.delta)
    if converged:
        logger.info(f"Converged after {outer} outer iterations, objective {objective}.")
    else:
        logger.warning(f"No convergence after {outer} outer iterations: "
                       f"violation={violation:.3e}, stationarity={stationarity:.3e}.")
    return SolveResult(
        trajectory=trajectory,
        multipliers=lam / dp.grid.delta,
        raw_multipliers=lam,
        objective=objective,
        feasibility=violation,
        stationarity=stationarity,
        complementarity=complementarity,
        outer_iters=outer,
        converged=converged,
        penalty=rho,
        violation_history=tuple(history),
        penalty_increases=tuple(increases),
    )


@dataclass(frozen=True, eq=False)
class OracleResult:
    feasible: bool
    trajectory: GridTrajectory | None
    objective: float | None
    resolution: float
    points: int
    feasible_points: int


MAX_ORACLE_NODES = 4
MAX_ORACLE_STEPS = 200


def _batch_objective(dp: DiscreteProblem, V: np.ndarray) -> np.ndarray:
    """Discrete objective of a batch of scalar trajectories, V of shape (B, N+1)."""
    nodes = dp.running_nodes()
    times = np.broadcast_to(dp.grid.nodes[nodes], V[:, nodes].shape)
    running = dp.source.f.evaluate_many(V[:, nodes].reshape(-1, 1), times.reshape(-1))
    running = running.reshape(V.shape[0], -1).sum(axis=1)
    terminal = dp.source.q.evaluate_many(V[:, dp.grid.N - 1].reshape(-1, 1))
    return dp.grid.delta * running + terminal


def _batch_violation(dp: DiscreteProblem, V: np.ndarray) -> np.ndarray:
    delta = dp.grid.delta
    x0, x1, x2 = V[:, :-2], V[:, 1:-1], V[:, 2:]
    Z = np.stack([x0, first_difference(x0, x1, delta),
                  second_difference(x0, x1, x2, delta)], axis=-1).reshape(-1, 3)
    worst = np.full(V.shape[0], -np.inf)
    for w in dp.source.constraints:
        worst = np.maximum(worst, w.evaluate_many(Z).reshape(V.shape[0], -1).max(axis=1))
    return worst


def brute_force_oracle(dp: DiscreteProblem, box: Sequence, steps: int,
                       feas_tol: float = 1e-12) -> OracleResult:
    """Exhaustive search over a lattice of node values inside a box.

    box is one (low, high) pair shared by every free node, or one pair per
    free node. The reported resolution bounds the objective gap to the best
    feasible point of the box when a lattice neighbour of that point is
    feasible.
    """
    if dp.n != 1:
        raise ConfigurationError(f"Oracle needs n=1, got n={dp.n}.")
    if not 1 <= steps <= MAX_ORACLE_STEPS:
        raise ConfigurationError(f"Oracle steps must be in 1..{MAX_ORACLE_STEPS}, got {steps}.")
    al = AugmentedLagrangian(dp, np.ones((dp.m, dp.rows)))
    count = al.last - 1
    if count > MAX_ORACLE_NODES:
        raise ConfigurationError(
            f"Oracle handles at most {MAX_ORACLE_NODES} free nodes, got {count}.")
    bounds = np.asarray(box, dtype=float)
    if bounds.ndim == 1:
        bounds = np.tile(bounds, (count, 1))
    if bounds.shape != (count, 2):
        raise DimensionError(f"Box has shape {bounds.shape}, expected ({count}, 2).")
    axes = [np.linspace(lo, hi, steps + 1) for lo, hi in bounds]

    corners = np.array(list(itertools.product(*bounds)))
    slopes = [np.abs(objective_gradient(dp, al.values(c))[al.free]).sum() for c in corners]
    width = float(np.max(bounds[:, 1] - bounds[:, 0]))
    resolution = float(max(slopes)) * width / steps

    best_value, best_y = np.inf, None
    total = feasible_total = 0
    split = max(0, count - 2)
    tail = np.meshgrid(*axes[split:], indexing='ij')
    tail = np.stack([g.reshape(-1) for g in tail], axis=1)
    for head in itertools.product(*axes[:split]):
        chunk = np.hstack([np.tile(head, (tail.shape[0], 1)), tail])
        V = np.empty((chunk.shape[0], dp.grid.size))
        V[:, :2] = dp.fixed_values[:, 0]
        V[:, 2:al.last + 1] = chunk
        if al.last < dp.grid.N:
            V[:, -1] = 2 * V[:, -2] - V[:, -3]
        ok = _batch_violation(dp, V) <= feas_tol
        total += chunk.shape[0]
        feasible_total += int(ok.sum())
        if not ok.any():
            continue
        values = np.where(ok, _batch_objective(dp, V), np.inf)
        i = int(np.argmin(values))
        if values[i] < best_value:
            best_value, best_y = float(values[i]), chunk[i].copy()

    if best_y is None:
        logger.warning(f"Oracle found no feasible point among {total} candidates.")
        return OracleResult(False, None, None, resolution, total, 0)
    trajectory = GridTrajectory(dp.grid, al.values(best_y))
    logger.info(f"Oracle best objective {best_value} over {feasible_total} feasible "
                f"points, resolution {resolution:.3e}.")
    return OracleResult(True, trajectory, best_value, resolution, total, feasible_total)
