"""Problem instances and trajectories shared by the test modules."""
import numpy as np

from app.convexfn import Affine, ConvexQuadratic
from app.problem import ContinuousProblem, Grid, GridTrajectory

E13 = float(np.exp(1.0 / 3.0))


def discrete_optimum(grid: Grid) -> GridTrajectory:
    """x_k = (1 + delta/3)^k, which keeps every row of the worked example active."""
    k = np.arange(grid.size)
    return GridTrajectory(grid, (1.0 + grid.delta / 3.0) ** k)


def tiny_instance(seed: int) -> ContinuousProblem:
    """Scalar instance: f = (x - c)^2 / 2, q = a (x - c)^2 / 2 up to a constant, x <= b."""
    rng = np.random.default_rng(seed)
    c = rng.uniform(0.8, 1.8)
    b = rng.uniform(1.2, 1.6)
    a = rng.uniform(0.5, 2.0)
    return ContinuousProblem(
        f=ConvexQuadratic.state([[1.0]], linear=[-c], offset=0.5 * c * c),
        q=ConvexQuadratic.state([[a]], linear=[-a * c]),
        constraints=[Affine.constraint([1.0], offset=-b)],
        v0=[1.0],
        v1=[0.0],
    )


def unconstrained_instance() -> ContinuousProblem:
    """f = x^2 / 2, q = 0 and a constraint that never binds."""
    return ContinuousProblem(
        f=ConvexQuadratic.state([[1.0]]),
        q=Affine.state([0.0]),
        constraints=[Affine.constraint([0.0], [0.0], [0.0], offset=-1.0)],
        v0=[1.0],
        v1=[0.0],
    )
