"""Adjoint reconstruction from multipliers, and the worked example's closed-form duals.

Multipliers alpha_k(t) are stored in continuous-limit scaling: alpha = lambda / delta
where lambda multiplies the row Phi_k(t) <= 0 in the discrete Lagrangian.
Walking the constraint rows t = 0 .. 1-2delta,

    x*(t+2delta) = -sum_k alpha_k(t) dW_k/dv2
    u*(t+delta)  = delta sum_k alpha_k(t) dW_k/dv1 + 2 x*(t+2delta)
    psi*(t)      = (u*(t) - 2 x*(t+delta)) / delta

with x*(1) = 0 imposed. Nodes the rows cannot reach copy their nearest
reconstructed neighbour.
"""
import logging

import numpy as np

from dataclasses import dataclass, replace

from app.constants import Block, Flavor
from app.convexfn import Affine
from app.exceptions import DimensionError, FlavorError, UnsupportedError
from app.problem import (
    ContinuousProblem, DiscreteProblem, Grid, GridTrajectory, infer_flavor
)

logger = logging.getLogger(__name__)


def _grid_array(values, rows: int, name: str) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if array.ndim == 1:
        array = array.reshape(-1, 1)
    if array.ndim != 2 or array.shape[0] != rows:
        raise DimensionError(
            f"{name} has {array.shape[0]} nodes, expected {rows}.")
    array = np.array(array)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class Certificate:
    """Adjoint grids (N+1, n) and multiplier grid (N+1, m) with the scalar mu."""
    grid: Grid
    flavor: Flavor
    mu: float
    xstar: np.ndarray
    ustar: np.ndarray
    psistar: np.ndarray
    alphas: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'flavor', Flavor(self.flavor))
        object.__setattr__(self, 'mu', float(self.mu))
        for name in ('xstar', 'ustar', 'psistar', 'alphas'):
            object.__setattr__(
                self, name, _grid_array(getattr(self, name), self.grid.size, name))
        n = {self.xstar.shape[1], self.ustar.shape[1], self.psistar.shape[1]}
        if len(n) != 1:
            raise DimensionError(f"Adjoint grids differ in dimension: {sorted(n)}.")

    @property
    def n(self) -> int:
        return self.xstar.shape[1]

    @property
    def m(self) -> int:
        return self.alphas.shape[1]

    @property
    def nontriviality(self) -> float:
        """Max norm over the adjoint and multiplier grids."""
        return float(max(np.max(np.abs(a), initial=0.0) for a in (
            self.xstar, self.ustar, self.psistar, self.alphas)))

    def scaled(self, c: float) -> 'Certificate':
        """Adjoints and multipliers multiplied by c, mu kept."""
        return replace(self, xstar=c * self.xstar, ustar=c * self.ustar,
                       psistar=c * self.psistar, alphas=c * self.alphas)

    def with_flavor(self, flavor: Flavor) -> 'Certificate':
        return replace(self, flavor=flavor)


@dataclass(frozen=True, eq=False)
class Derivatives:
    """Analytic derivative grids. Missing entries are differenced numerically."""
    dx: np.ndarray | None = None
    d2x: np.ndarray | None = None
    dxstar: np.ndarray | None = None
    d2xstar: np.ndarray | None = None
    dpsistar: np.ndarray | None = None
    dustar: np.ndarray | None = None
    dalphas: np.ndarray | None = None
    d2alphas: np.ndarray | None = None


def alpha_grid(dp: DiscreteProblem, rows) -> np.ndarray:
    """Multiplier rows (m, N-1) spread onto all N+1 nodes."""
    rows = np.asarray(rows, dtype=float)
    if rows.shape != (dp.m, dp.rows):
        raise DimensionError(
            f"Multipliers have shape {rows.shape}, expected ({dp.m}, {dp.rows}).")
    grid = np.empty((dp.grid.size, dp.m))
    grid[:dp.rows] = rows.T
    grid[dp.rows:] = rows.T[-1]
    return grid


def _check_smooth(dp: DiscreteProblem, Z: np.ndarray, alphas: np.ndarray):
    for k, w in enumerate(dp.source.constraints):
        if not w.has_gradient:
            raise UnsupportedError(f"Constraint {k} has no gradient.")
        if w.is_smooth:
            continue
        for i in np.flatnonzero(alphas[k] != 0.0):
            if not w.subdiff(Z[i]).is_singleton:
                raise UnsupportedError(
                    f"Constraint {k} is not differentiable at node {i}; "
                    f"verify a supplied certificate instead.")


def reconstruct_adjoints(dp: DiscreteProblem, traj: GridTrajectory, alphas,
                         mu: float = 1.0, flavor: Flavor | None = None) -> Certificate:
    """Certificate from multiplier rows alphas of shape (m, N-1)."""
    flavor = Flavor(flavor) if flavor is not None else infer_flavor(dp.source)
    if flavor == Flavor.W2 and dp.source.depends_on(Block.V2):
        raise FlavorError("W2-reduced certificates need constraints free of v2.")
    if flavor == Flavor.W1 and dp.source.depends_on(Block.V1):
        raise FlavorError("W1-reduced certificates need constraints free of v1.")
    grid, delta, n, N = dp.grid, dp.grid.delta, dp.n, dp.grid.N
    rows = np.asarray(alphas, dtype=float)
    alpha_nodes = alpha_grid(dp, rows)

    Z = dp.constraint_points(traj.values)
    _check_smooth(dp, Z, rows)
    gradients = np.stack([w.gradient_many(Z) for w in dp.source.constraints])
    gv1 = np.einsum('ki,kij->ij', rows, gradients[:, :, n:2 * n])
    gv2 = np.einsum('ki,kij->ij', rows, gradients[:, :, 2 * n:])

    xstar = np.zeros((grid.size, n))
    ustar = np.zeros((grid.size, n))
    if flavor == Flavor.W2:
        ustar[1:N] = gv1
        # Node 0 carries no row. The terminal condition sits at N-1, so u*(1) copies it.
        ustar[0] = 2 * ustar[1] - ustar[2]
        ustar[N] = ustar[N - 1]
        psistar = ustar / delta
    else:
        xstar[2:N] = -gv2[:-1]
        xstar[:2] = xstar[2]
        # x*(1) = 0 holds exactly; the last row's v2 term is left to the checker.
        xstar[N] = 0.0
        if flavor == Flavor.W1:
            ustar[:N] = 2 * xstar[1:]
        else:
            ustar[1:N] = delta * gv1 + 2 * xstar[2:]
            ustar[0] = ustar[1]
        ustar[N] = ustar[N - 1]
        psistar = np.empty_like(ustar)
        psistar[:N] = (ustar[:N] - 2 * xstar[1:]) / delta
        psistar[N] = psistar[N - 1]

    logger.info(f"Reconstructed {flavor.value} certificate on N={N}.")
    return Certificate(grid, flavor, mu, xstar, ustar, psistar, alpha_nodes)


def example51_problem() -> ContinuousProblem:
    """Minimize x(1) subject to x - 3x' <= 0, x(0) = 1, x'(0) = 1/3."""
    return ContinuousProblem(
        f=Affine.state([0.0]),
        q=Affine.state([1.0]),
        constraints=[Affine.constraint([1.0], [-3.0])],
        v0=[1.0],
        v1=[1.0 / 3.0],
    )


def example51_trajectory(grid: Grid) -> GridTrajectory:
    """The optimal arc e^(t/3)."""
    return GridTrajectory.sample(grid, lambda t: np.exp(t / 3.0))


def _example51_dual(t: np.ndarray) -> np.ndarray:
    return np.exp((1.0 - t) / 3.0)


def analytic_certificate_example51(N: int, flavor: Flavor = Flavor.W2) -> Certificate:
    """Closed-form duals u* = -e^((1-t)/3) and alpha = e^((1-t)/3) / 3 on a grid."""
    grid = Grid(N)
    t = grid.nodes
    dual = _example51_dual(t).reshape(-1, 1)
    zeros = np.zeros_like(dual)
    alphas = dual / 3.0
    flavor = Flavor(flavor)
    if flavor == Flavor.W2:
        return Certificate(grid, flavor, 1.0, zeros, -dual, -dual / grid.delta, alphas)
    if flavor in (Flavor.FULL, Flavor.POLYHEDRAL):
        return Certificate(grid, flavor, 1.0, zeros, -grid.delta * dual, -dual, alphas)
    raise FlavorError(f"The worked example has no {flavor.value} certificate.")


def analytic_derivatives_example51(N: int, flavor: Flavor = Flavor.W2) -> Derivatives:
    grid = Grid(N)
    t = grid.nodes
    arc = np.exp(t / 3.0).reshape(-1, 1)
    dual = _example51_dual(t).reshape(-1, 1)
    zeros = np.zeros_like(dual)
    flavor = Flavor(flavor)
    if flavor == Flavor.W1:
        raise FlavorError("The worked example has no W1-reduced certificate.")
    if flavor == Flavor.W2:
        dpsistar = dual / 3.0 / grid.delta
    else:
        dpsistar = dual / 3.0
    return Derivatives(
        dx=arc / 3.0,
        d2x=arc / 9.0,
        dxstar=zeros,
        d2xstar=zeros,
        dpsistar=dpsistar,
        dustar=dual / 3.0 if flavor == Flavor.W2 else grid.delta * dual / 3.0,
        dalphas=-dual / 9.0,
        d2alphas=dual / 27.0,
    )
