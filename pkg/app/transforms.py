"""Linear maps between subgradients of the composed constraints Phi_k and of W_k.

Phi_k(x0, x1, x2) = W_k(x0, (x1 - x0)/delta, (x2 - 2 x1 + x0)/delta^2), so a
subgradient (a, b, c) of Phi_k in node values corresponds to a subgradient
(a + b + c, delta b + 2 delta c, delta^2 c) of W_k. Both directions are
triangular and invertible for delta > 0.
"""
import logging

import numpy as np

from dataclasses import dataclass
from scipy.optimize import nnls
from typing import Sequence

from app.exceptions import ConfigurationError, DimensionError, PreconditionError

logger = logging.getLogger(__name__)

SIDE_CONDITION_TOL = 1e-10
CONE_TOL = 1e-9
# Weight of the rows pinning each group's hull weights to its multiplier.
HULL_PIN = 1e6


@dataclass(frozen=True, eq=False)
class SubgradTriple:
    xs: np.ndarray
    v1s: np.ndarray
    v2s: np.ndarray

    def __post_init__(self):
        parts = [np.atleast_1d(np.asarray(p, dtype=float)) for p in
                 (self.xs, self.v1s, self.v2s)]
        if len({p.shape for p in parts}) != 1 or parts[0].ndim != 1:
            raise DimensionError(
                f"Triple blocks differ in shape: {[p.shape for p in parts]}.")
        for name, part in zip(('xs', 'v1s', 'v2s'), parts):
            object.__setattr__(self, name, part)

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.xs, self.v1s, self.v2s])

    @classmethod
    def from_vector(cls, vec):
        vec = np.asarray(vec, dtype=float).reshape(-1)
        if vec.shape[0] % 3:
            raise DimensionError(
                f"Vector of length {vec.shape[0]} does not split in three blocks.")
        return cls(*np.split(vec, 3))


def _check_delta(delta: float):
    if not delta > 0:
        raise ConfigurationError(f"delta must be positive, got {delta}.")


def _blocks(G: np.ndarray):
    G = np.asarray(G, dtype=float)
    if G.shape[-1] % 3:
        raise DimensionError(
            f"Last axis of length {G.shape[-1]} does not split in three blocks.")
    return np.split(G, 3, axis=-1)


def phi_to_w_array(G, delta: float) -> np.ndarray:
    """phi_to_w along the last axis of an array of stacked triples."""
    _check_delta(delta)
    a, b, c = _blocks(G)
    return np.concatenate([a + b + c, delta * b + 2 * delta * c,
                           delta ** 2 * c], axis=-1)


def w_to_phi_array(G, delta: float) -> np.ndarray:
    """w_to_phi along the last axis of an array of stacked triples."""
    _check_delta(delta)
    xs, v1s, v2s = _blocks(G)
    c = v2s / delta ** 2
    b = (v1s - 2 * v2s / delta) / delta
    return np.concatenate([xs - b - c, b, c], axis=-1)


def phi_to_w(g: SubgradTriple, delta: float) -> SubgradTriple:
    return SubgradTriple.from_vector(phi_to_w_array(g.as_vector(), delta))


def w_to_phi(g: SubgradTriple, delta: float) -> SubgradTriple:
    return SubgradTriple.from_vector(w_to_phi_array(g.as_vector(), delta))


def reduced_to_w1(g: SubgradTriple, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Image (x*, v2*) of a Phi subgradient whose v1 block equals -2 times its v2 block."""
    _check_delta(delta)
    gap = np.max(np.abs(g.v1s + 2 * g.v2s))
    if gap > SIDE_CONDITION_TOL:
        raise PreconditionError(
            f"Reduction to W(x, v2) needs v1* = -2 v2*, off by {gap}.")
    return g.xs - g.v2s, delta ** 2 * g.v2s


def reduced_to_w2(g: SubgradTriple, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Image (x*, v1*) of a Phi subgradient with vanishing v2 block."""
    _check_delta(delta)
    gap = np.max(np.abs(g.v2s))
    if gap > SIDE_CONDITION_TOL:
        raise PreconditionError(
            f"Reduction to W(x, v1) needs v2* = 0, off by {gap}.")
    return g.xs + g.v1s, delta * g.v1s


@dataclass(frozen=True, eq=False)
class ConeGenerators:
    """Rays of a finitely generated cone, one per row.

    owners[i] names the constraint a ray came from, so weights can be summed
    back into per-constraint multipliers.
    """
    generators: np.ndarray
    owners: tuple = ()

    def __post_init__(self):
        G = np.asarray(self.generators, dtype=float)
        if G.ndim == 1:
            G = G.reshape(1, -1) if G.size else G.reshape(0, 0)
        object.__setattr__(self, 'generators', G)
        if not self.owners:
            object.__setattr__(self, 'owners', tuple(range(G.shape[0])))
        if len(self.owners) != G.shape[0]:
            raise DimensionError("Every ray needs an owner.")

    def __len__(self):
        return self.generators.shape[0]

    def multipliers(self, coefficients: np.ndarray, count: int) -> np.ndarray:
        """Sum ray weights per owner."""
        alphas = np.zeros(count)
        np.add.at(alphas, np.asarray(self.owners, dtype=int), coefficients)
        return alphas


def cone_membership(target, cone: ConeGenerators, tol: float = CONE_TOL):
    """Nonnegative least squares fit of target by the cone's rays.

    Returns (member, coefficients). Members have a fit residual of at most
    tol * (1 + |target|).
    """
    target = np.asarray(target, dtype=float).reshape(-1)
    bound = tol * (1.0 + np.linalg.norm(target))
    if len(cone) == 0:
        return bool(np.linalg.norm(target) <= bound), np.zeros(0)
    if cone.generators.shape[1] != target.shape[0]:
        raise DimensionError(
            f"Target has dimension {target.shape[0]}, rays have "
            f"{cone.generators.shape[1]}.")
    coefficients, residual = nnls(cone.generators.T, target)
    return bool(residual <= bound), coefficients


def weighted_hull_residual(target, groups: Sequence[tuple[float, np.ndarray]]) -> float:
    """Distance from target to sum_k alpha_k conv(generators_k).

    groups holds one (alpha_k, generators_k) pair per constraint. Singleton
    groups contribute alpha_k g_k directly. Groups with several generators
    get hull weights found by NNLS, with extra rows pinning each group's
    weights to sum to alpha_k.
    """
    target = np.asarray(target, dtype=float).reshape(-1)
    fixed = np.zeros_like(target)
    columns, pins, owners = [], [], []
    for alpha, generators in groups:
        generators = np.atleast_2d(np.asarray(generators, dtype=float))
        if alpha == 0.0:
            continue
        if generators.shape[0] == 1:
            fixed += alpha * generators[0]
            continue
        # alpha conv(G) = |alpha| conv(sign(alpha) G)
        pins.append(abs(alpha))
        for g in generators:
            columns.append(np.sign(alpha) * g)
            owners.append(len(pins) - 1)
    rest = target - fixed
    if not columns:
        return float(np.linalg.norm(rest))
    scale = HULL_PIN * max(1.0, float(np.abs(np.array(columns)).max()))
    A = np.vstack([np.array(columns).T, np.zeros((len(pins), len(columns)))])
    for j, owner in enumerate(owners):
        A[target.shape[0] + owner, j] = scale
    b = np.concatenate([rest, scale * np.array(pins)])
    weights, _ = nnls(A, b)
    return float(np.linalg.norm(rest - np.array(columns).T @ weights))
