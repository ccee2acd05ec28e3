"""Scalar functions of (x, v1, v2) with values, gradients and subdifferentials.

A function is defined over `nblocks` argument blocks of state dimension `n`.
Running and terminal costs use one block (x). Constraints use three
(x, v1, v2). Subdifferentials are finite generator lists. The set they
represent is the convex hull of the generators.
"""
import logging

import numpy as np

from pydantic import BaseModel, ConfigDict
from typing import Callable, Iterable, Sequence

from app.constants import BLOCK_ORDER, Block, FnKind
from app.exceptions import (
    ConfigurationError, DimensionError, UnsupportedError
)

logger = logging.getLogger(__name__)

EPS_ACT = 1e-8
PSD_FLOOR = -1e-10
SUBGRADIENT_SLACK = 1e-10


class SubdiffSet(BaseModel):
    # One generator per row.
    generators: np.ndarray

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @property
    def is_singleton(self) -> bool:
        return self.generators.shape[0] == 1

    def __len__(self):
        return self.generators.shape[0]


def _as_vector(values, length: int, name: str) -> np.ndarray:
    vec = np.asarray(values, dtype=float).reshape(-1)
    if vec.shape[0] != length:
        raise DimensionError(
            f"{name} has length {vec.shape[0]}, expected {length}.")
    return vec


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.flags.writeable = False
    return array


class ScalarFn:
    """Common interface of every function kind."""
    kind: FnKind

    def __init__(self, n: int, nblocks: int, depends_on: Iterable[Block]):
        if n < 1:
            raise DimensionError(f"State dimension must be positive, got {n}.")
        if nblocks not in (1, 3):
            raise DimensionError(f"Functions take 1 or 3 blocks, got {nblocks}.")
        self.n = n
        self.nblocks = nblocks
        self.depends_on = frozenset(Block(b) for b in depends_on)

    @property
    def arity(self) -> int:
        return self.n * self.nblocks

    @property
    def is_convex(self) -> bool:
        return True

    @property
    def is_smooth(self) -> bool:
        return True

    @property
    def has_gradient(self) -> bool:
        return True

    def block(self, vec: np.ndarray, block: Block) -> np.ndarray:
        """Slice one argument block out of a point or a gradient."""
        i = BLOCK_ORDER.index(Block(block))
        if i >= self.nblocks:
            raise DimensionError(f"Function has no {block.value} block.")
        return vec[..., i * self.n:(i + 1) * self.n]

    def check_point(self, z) -> np.ndarray:
        return _as_vector(z, self.arity, "Point")

    def check_points(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        if Z.ndim != 2 or Z.shape[1] != self.arity:
            raise DimensionError(
                f"Points have shape {Z.shape}, expected (rows, {self.arity}).")
        return Z

    def evaluate(self, z, t: float = 0.0) -> float:
        raise NotImplementedError

    def evaluate_many(self, Z, t=None) -> np.ndarray:
        Z = self.check_points(Z)
        times = _times(t, Z.shape[0])
        return np.array([self.evaluate(z, s) for z, s in zip(Z, times)])

    def gradient(self, z, t: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def gradient_many(self, Z, t=None) -> np.ndarray:
        Z = self.check_points(Z)
        times = _times(t, Z.shape[0])
        if Z.shape[0] == 0:
            return np.zeros((0, self.arity))
        return np.vstack([self.gradient(z, s) for z, s in zip(Z, times)])

    def subdiff(self, z, eps_act: float = EPS_ACT, t: float = 0.0) -> SubdiffSet:
        if eps_act < 0:
            raise ConfigurationError(f"eps_act must be >= 0, got {eps_act}.")
        return SubdiffSet(generators=self.gradient(z, t).reshape(1, -1))

    def increment_many(self, Z, Z0, t=None) -> np.ndarray:
        """Values fn(Z) - fn(Z0), row by row."""
        return self.evaluate_many(Z, t) - self.evaluate_many(Z0, t)


def _times(t, rows: int) -> np.ndarray:
    if t is None:
        return np.zeros(rows)
    times = np.broadcast_to(np.asarray(t, dtype=float), (rows,))
    return times


class Affine(ScalarFn):
    """<a, z> + offset."""
    kind = FnKind.AFFINE

    def __init__(self, coefficients, offset: float = 0.0, n: int = 1,
                 nblocks: int = 3):
        coefficients = np.asarray(coefficients, dtype=float).reshape(-1)
        if coefficients.shape[0] != n * nblocks:
            raise DimensionError(
                f"Affine coefficients have length {coefficients.shape[0]}, "
                f"expected {n * nblocks}.")
        used = [
            b for i, b in enumerate(BLOCK_ORDER[:nblocks])
            if np.any(coefficients[i * n:(i + 1) * n] != 0.0)
        ]
        super().__init__(n, nblocks, used)
        self.coefficients = _frozen(coefficients)
        self.offset = float(offset)

    @classmethod
    def constraint(cls, p0, p1=None, p2=None, offset: float = 0.0):
        """W(x, v1, v2) = <p0, x> + <p1, v1> + <p2, v2> + offset."""
        p0 = np.asarray(p0, dtype=float).reshape(-1)
        n = p0.shape[0]
        p1 = np.zeros(n) if p1 is None else _as_vector(p1, n, "p1")
        p2 = np.zeros(n) if p2 is None else _as_vector(p2, n, "p2")
        return cls(np.concatenate([p0, p1, p2]), offset, n=n, nblocks=3)

    @classmethod
    def state(cls, p0, offset: float = 0.0):
        """f(x) = <p0, x> + offset."""
        p0 = np.asarray(p0, dtype=float).reshape(-1)
        return cls(p0, offset, n=p0.shape[0], nblocks=1)

    def evaluate(self, z, t: float = 0.0) -> float:
        z = self.check_point(z)
        return float(self.coefficients @ z + self.offset)

    def evaluate_many(self, Z, t=None) -> np.ndarray:
        Z = self.check_points(Z)
        return Z @ self.coefficients + self.offset

    def gradient(self, z, t: float = 0.0) -> np.ndarray:
        self.check_point(z)
        return self.coefficients.copy()

    def gradient_many(self, Z, t=None) -> np.ndarray:
        Z = self.check_points(Z)
        return np.tile(self.coefficients, (Z.shape[0], 1))

    def increment_many(self, Z, Z0, t=None) -> np.ndarray:
        return (self.check_points(Z) - self.check_points(Z0)) @ self.coefficients


class ConvexQuadratic(ScalarFn):
    """0.5 z'Hz + <b, z> + offset with H symmetric positive semidefinite."""
    kind = FnKind.CONVEX_QUADRATIC

    def __init__(self, matrix, linear=None, offset: float = 0.0, n: int = 1,
                 nblocks: int = 1):
        arity = n * nblocks
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (arity, arity):
            raise DimensionError(
                f"Quadratic matrix has shape {matrix.shape}, "
                f"expected ({arity}, {arity}).")
        if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-12):
            raise ConfigurationError("Quadratic matrix is not symmetric.")
        floor = float(np.linalg.eigvalsh(matrix).min())
        if floor < PSD_FLOOR:
            raise ConfigurationError(
                f"Quadratic matrix is not positive semidefinite "
                f"(smallest eigenvalue {floor}).")
        linear = np.zeros(arity) if linear is None else _as_vector(
            linear, arity, "Linear term")
        used = []
        for i, b in enumerate(BLOCK_ORDER[:nblocks]):
            rows = slice(i * n, (i + 1) * n)
            if np.any(matrix[rows] != 0.0) or np.any(linear[rows] != 0.0):
                used.append(b)
        super().__init__(n, nblocks, used)
        self.matrix = _frozen(matrix)
        self.linear = _frozen(linear)
        self.offset = float(offset)

    @classmethod
    def state(cls, matrix, linear=None, offset: float = 0.0):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        return cls(matrix, linear, offset, n=matrix.shape[0], nblocks=1)

    @classmethod
    def constraint(cls, matrix, linear=None, offset: float = 0.0):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if matrix.shape[0] % 3:
            raise DimensionError(
                f"Constraint matrix size {matrix.shape[0]} is not a multiple of 3.")
        return cls(matrix, linear, offset, n=matrix.shape[0] // 3, nblocks=3)

    def evaluate(self, z, t: float = 0.0) -> float:
        z = self.check_point(z)
        return float(0.5 * z @ self.matrix @ z + self.linear @ z + self.offset)

    def evaluate_many(self, Z, t=None) -> np.ndarray:
        Z = self.check_points(Z)
        return (0.5 * np.einsum('ij,jk,ik->i', Z, self.matrix, Z)
                + Z @ self.linear + self.offset)

    def gradient(self, z, t: float = 0.0) -> np.ndarray:
        z = self.check_point(z)
        return self.matrix @ z + self.linear

    def gradient_many(self, Z, t=None) -> np.ndarray:
        Z = self.check_points(Z)
        return Z @ self.matrix + self.linear

    def increment_many(self, Z, Z0, t=None) -> np.ndarray:
        Z = self.check_points(Z)
        Z0 = self.check_points(Z0)
        dZ = Z - Z0
        return (np.einsum('ij,ij->i', dZ, self.gradient_many(Z0))
                + 0.5 * np.einsum('ij,jk,ik->i', dZ, self.matrix, dZ))


class SmoothBlackBox(ScalarFn):
    """A function given by callables value(z, t) and gradient(z, t)."""
    kind = FnKind.SMOOTH_BLACK_BOX

    def __init__(self, value: Callable, gradient: Callable | None = None,
                 n: int = 1, nblocks: int = 1,
                 depends_on: Iterable[Block] | None = None,
                 convex: bool = False):
        if depends_on is None:
            depends_on = BLOCK_ORDER[:nblocks]
        super().__init__(n, nblocks, depends_on)
        self._value = value
        self._gradient = gradient
        self._convex = convex

    @property
    def is_convex(self) -> bool:
        return self._convex

    @property
    def has_gradient(self) -> bool:
        return self._gradient is not None

    def evaluate(self, z, t: float = 0.0) -> float:
        return float(self._value(self.check_point(z), t))

    def gradient(self, z, t: float = 0.0) -> np.ndarray:
        if self._gradient is None:
            raise UnsupportedError(
                "Black-box function has no gradient callable.")
        g = self._gradient(self.check_point(z), t)
        return _as_vector(g, self.arity, "Gradient")


class MaxOfAffine(ScalarFn):
    """Pointwise maximum of affine pieces."""
    kind = FnKind.MAX_OF_AFFINE

    def __init__(self, pieces: Sequence[Affine]):
        if not pieces:
            raise ConfigurationError("Max-of-affine needs at least one piece.")
        n, nblocks = pieces[0].n, pieces[0].nblocks
        for piece in pieces:
            if (piece.n, piece.nblocks) != (n, nblocks):
                raise DimensionError("Max-of-affine pieces differ in arity.")
        used = set()
        for piece in pieces:
            used |= piece.depends_on
        super().__init__(n, nblocks, used)
        self.pieces = tuple(pieces)

    @property
    def is_smooth(self) -> bool:
        return len(self.pieces) == 1

    def piece_values(self, z) -> np.ndarray:
        return np.array([piece.evaluate(z) for piece in self.pieces])

    def evaluate(self, z, t: float = 0.0) -> float:
        return float(np.max(self.piece_values(z)))

    def evaluate_many(self, Z, t=None) -> np.ndarray:
        Z = self.check_points(Z)
        return np.max(self._piece_matrix(Z), axis=0)

    def _piece_matrix(self, Z) -> np.ndarray:
        return np.vstack([piece.evaluate_many(Z) for piece in self.pieces])

    def gradient(self, z, t: float = 0.0) -> np.ndarray:
        # First active piece.
        i = int(np.argmax(self.piece_values(z)))
        return self.pieces[i].coefficients.copy()

    def gradient_many(self, Z, t=None) -> np.ndarray:
        Z = self.check_points(Z)
        first = np.argmax(self._piece_matrix(Z), axis=0)
        coefficients = np.vstack([p.coefficients for p in self.pieces])
        return coefficients[first]

    def active_pieces(self, z, eps_act: float = EPS_ACT) -> list[int]:
        values = self.piece_values(z)
        top = float(values.max())
        threshold = top - eps_act * max(1.0, abs(top))
        return [i for i, v in enumerate(values) if v >= threshold]

    def subdiff(self, z, eps_act: float = EPS_ACT, t: float = 0.0) -> SubdiffSet:
        if eps_act < 0:
            raise ConfigurationError(f"eps_act must be >= 0, got {eps_act}.")
        rows = []
        for i in self.active_pieces(z, eps_act):
            g = self.pieces[i].coefficients
            if not any(np.array_equal(g, r) for r in rows):
                rows.append(g)
        return SubdiffSet(generators=np.vstack(rows))


def check_subgradient_inequality(fn: ScalarFn, z0, g, samples: int = 100,
                                 seed: int = 0, radius: float = 5.0) -> bool:
    """True iff fn(z) - fn(z0) >= <g, z - z0> at every sampled z."""
    return subgradient_gap(fn, z0, g, samples, seed, radius) >= -SUBGRADIENT_SLACK


def subgradient_gap(fn: ScalarFn, z0, g, samples: int = 100, seed: int = 0,
                    radius: float = 5.0, t: float = 0.0) -> float:
    """Smallest fn(z) - fn(z0) - <g, z - z0> over a box of samples around z0."""
    if not fn.is_convex:
        logger.debug(f"Sampling the subgradient inequality of a nonconvex "
                     f"{fn.kind.value} function.")
    z0 = fn.check_point(z0)
    g = _as_vector(g, fn.arity, "Subgradient")
    rng = np.random.default_rng(seed)
    Z = z0 + rng.uniform(-radius, radius, size=(samples, fn.arity))
    lhs = fn.evaluate_many(Z, np.full(samples, t)) - fn.evaluate(z0, t)
    rhs = (Z - z0) @ g
    return float(np.min(lhs - rhs))


def central_difference_gradient(fn: ScalarFn, z, h: float = 1e-6,
                                t: float = 0.0) -> np.ndarray:
    z = fn.check_point(z)
    grad = np.zeros_like(z)
    for i in range(z.shape[0]):
        step = np.zeros_like(z)
        step[i] = h
        grad[i] = (fn.evaluate(z + step, t) - fn.evaluate(z - step, t)) / (2 * h)
    return grad
