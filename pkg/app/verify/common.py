"""Residual building blocks shared by the discrete and continuous checkers."""
import logging

import numpy as np

from typing import Callable, Sequence

from app.adjoint import Certificate, Derivatives
from app.constants import BLOCK_ORDER, Block, THEOREM_FLAVORS, TheoremId
from app.convexfn import SUBGRADIENT_SLACK, ScalarFn, subgradient_gap
from app.exceptions import DimensionError, FlavorError
from app.problem import (
    ContinuousProblem, Grid, GridTrajectory, grid_derivative, grid_second_derivative
)
from app.transforms import weighted_hull_residual
from app.verify.report import NONTRIVIALITY, ConditionRow

logger = logging.getLogger(__name__)

# Conditions at t = 0 and t = delta are not checked.
FIRST_CHECKED_NODE = 2
BOUNDARY_SAMPLES = 100
BOUNDARY_RADIUS = 1.0


def check_flavor(theorem: TheoremId, cert: Certificate):
    allowed = THEOREM_FLAVORS[theorem]
    if cert.flavor not in allowed:
        raise FlavorError(
            f"{theorem.value} accepts {sorted(f.value for f in allowed)} "
            f"certificates, got {cert.flavor.value}.")


def check_grids(grid: Grid, traj: GridTrajectory, cert: Certificate, pc: ContinuousProblem):
    if traj.grid != grid or cert.grid != grid:
        raise DimensionError(
            f"Grids differ: trajectory N={traj.grid.N}, certificate N={cert.grid.N}, "
            f"expected N={grid.N}.")
    if traj.n != pc.n or cert.n != pc.n:
        raise DimensionError(
            f"State dimension mismatch: problem {pc.n}, trajectory {traj.n}, "
            f"certificate {cert.n}.")
    if cert.m != pc.m:
        raise DimensionError(
            f"Certificate has {cert.m} multiplier columns, problem has {pc.m} constraints.")


def require_independent(pc: ContinuousProblem, block: Block, theorem: TheoremId):
    for k, w in enumerate(pc.constraints):
        if block in w.depends_on:
            raise FlavorError(
                f"{theorem.value} needs constraints free of {block.value}; "
                f"constraint {k} depends on it.")


def checked_nodes(grid: Grid) -> np.ndarray:
    """Nodes 2 delta .. 1 - 2 delta."""
    return np.arange(FIRST_CHECKED_NODE, grid.N - 1)


def block_columns(n: int, blocks: Sequence[Block]) -> np.ndarray:
    return np.concatenate([
        np.arange(BLOCK_ORDER.index(b) * n, (BLOCK_ORDER.index(b) + 1) * n)
        for b in blocks])


def membership_residuals(targets: np.ndarray, alphas: np.ndarray,
                         constraints: Sequence[ScalarFn], Z: np.ndarray,
                         eps_act: float, columns: np.ndarray,
                         transform: Callable | None = None) -> np.ndarray:
    """Per-node distance from targets to sum_k alpha_k conv(generators of dW_k).

    Generators are restricted to the given columns and then passed through
    transform when one is given.
    """
    transform = transform or (lambda G: G)
    if all(w.is_smooth for w in constraints):
        combined = np.zeros_like(targets)
        for k, w in enumerate(constraints):
            combined += alphas[:, [k]] * transform(w.gradient_many(Z)[:, columns])
        return np.linalg.norm(targets - combined, axis=1)
    residuals = np.empty(targets.shape[0])
    for i in range(targets.shape[0]):
        groups = [(alphas[i, k], transform(w.subdiff(Z[i], eps_act).generators[:, columns]))
                  for k, w in enumerate(constraints)]
        residuals[i] = weighted_hull_residual(targets[i], groups)
    return residuals


def constraint_values(constraints: Sequence[ScalarFn], Z: np.ndarray) -> np.ndarray:
    return np.stack([w.evaluate_many(Z) for w in constraints], axis=1)


def complementarity_residuals(alphas: np.ndarray, values: np.ndarray,
                              threshold: float) -> np.ndarray:
    """max_k |alpha_k W_k|, with alpha_k itself counted where W_k is inactive."""
    products = np.abs(alphas * values)
    inactive = np.abs(values) > threshold
    products = np.where(inactive, np.maximum(products, np.abs(alphas)), products)
    return products.max(axis=1)


def worst_row(label: str, residuals: np.ndarray, times: np.ndarray, tol: float,
              homogeneous: bool = True, required: bool = True) -> ConditionRow:
    residuals = np.atleast_1d(np.asarray(residuals, dtype=float))
    if residuals.size == 0:
        return ConditionRow(label=label, residual=0.0, tolerance=tol, passed=True,
                            homogeneous=homogeneous, required=required)
    bad = np.isnan(residuals)
    worst = int(np.argmax(bad)) if bad.any() else int(np.argmax(residuals))
    residual = float(residuals[worst])
    return ConditionRow(
        label=label,
        residual=residual,
        tolerance=tol,
        passed=bool(residual <= tol),
        homogeneous=homogeneous,
        required=required,
        worst_time=float(np.atleast_1d(times)[worst]),
    )


def sign_row(alphas: np.ndarray, times: np.ndarray, tol: float) -> ConditionRow:
    return worst_row('multiplier sign', np.maximum(0.0, -alphas.min(axis=1)), times, tol)


def boundary_rows(label: str, target: np.ndarray, q: ScalarFn, x: np.ndarray,
                  mu: float, time: float, tol: float, eps_act: float,
                  seed: int = 0, required: bool = True) -> list[ConditionRow]:
    """Membership of target in mu dq(x), as a hull distance and a sampled inequality."""
    generators = q.subdiff(x, eps_act).generators
    distance = weighted_hull_residual(target, [(mu, generators)])
    rows = [ConditionRow(label=label, residual=distance, tolerance=tol,
                         passed=distance <= tol, homogeneous=False,
                         required=required, worst_time=time)]
    if mu > 0:
        gap = subgradient_gap(q, x, target / mu, BOUNDARY_SAMPLES, seed,
                              BOUNDARY_RADIUS)
        slope_gap = max(0.0, -gap - SUBGRADIENT_SLACK) / BOUNDARY_RADIUS
        rows.append(ConditionRow(
            label=f"{label} (subgradient inequality)", residual=slope_gap,
            tolerance=tol, passed=slope_gap <= tol, homogeneous=False,
            required=required, worst_time=time))
    return rows


def vanishing_row(label: str, values: np.ndarray, times: np.ndarray, tol: float,
                  required: bool = True) -> ConditionRow:
    values = np.asarray(values, dtype=float).reshape(len(np.atleast_1d(times)), -1)
    return worst_row(label, np.abs(values).max(axis=1), times, tol, required=required)


def nontriviality_row(cert: Certificate, trivial_tol: float) -> ConditionRow:
    value = cert.nontriviality
    return ConditionRow(label=NONTRIVIALITY, residual=value, tolerance=trivial_tol,
                        passed=value > trivial_tol, homogeneous=False)


class GridCalculus:
    """Time derivatives of trajectory and certificate grids.

    Analytic grids from a Derivatives bundle win. Otherwise the grids are
    differenced: central inside, second-order one-sided at the ends.
    Multipliers are differenced over the constraint rows 0 .. N-2 only.
    """

    def __init__(self, traj: GridTrajectory, cert: Certificate,
                 derivatives: Derivatives | None = None):
        self.traj = traj
        self.cert = cert
        self.given = derivatives or Derivatives()
        self.delta = traj.grid.delta

    def _pick(self, name: str, compute: Callable[[], np.ndarray]) -> np.ndarray:
        value = getattr(self.given, name)
        if value is None:
            return compute()
        value = np.asarray(value, dtype=float)
        return value.reshape(self.traj.grid.size, -1)

    @property
    def dx(self):
        return self._pick('dx', lambda: grid_derivative(self.traj.values, self.delta))

    @property
    def d2x(self):
        return self._pick('d2x', lambda: grid_second_derivative(self.traj.values, self.delta))

    @property
    def dxstar(self):
        return self._pick('dxstar', lambda: grid_derivative(self.cert.xstar, self.delta))

    @property
    def d2xstar(self):
        return self._pick('d2xstar', lambda: grid_second_derivative(self.cert.xstar, self.delta))

    @property
    def dpsistar(self):
        return self._pick('dpsistar', lambda: grid_derivative(self.cert.psistar, self.delta))

    @property
    def dustar(self):
        return self._pick('dustar', lambda: grid_derivative(self.cert.ustar, self.delta))

    def row_range(self, fn, values: np.ndarray) -> np.ndarray:
        """fn applied to grids that are only defined on the constraint rows 0 .. N-2."""
        values = np.asarray(values, dtype=float)
        rows = values.shape[0] - 2
        out = np.empty_like(values)
        if rows >= 4:
            out[:rows] = fn(values[:rows], self.delta)
            out[rows:] = out[rows - 1]
        else:
            out[:] = fn(values, self.delta)
        return out

    @property
    def dalphas(self):
        return self._pick('dalphas', lambda: self.row_range(grid_derivative, self.cert.alphas))

    @property
    def d2alphas(self):
        return self._pick('d2alphas', lambda: self.row_range(grid_second_derivative, self.cert.alphas))

    def arc_points(self) -> np.ndarray:
        """(x, x', x'') at every node, shape (N+1, 3n)."""
        return np.hstack([self.traj.values, self.dx, self.d2x])
