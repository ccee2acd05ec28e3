"""Pydantic models of the problem and certificate files."""
import json
import logging

import numpy as np

from pathlib import Path
from pydantic import (
    BaseModel, ConfigDict, Field, PositiveInt, ValidationError, model_validator
)
from typing import Annotated, Literal, Union

from app.adjoint import Certificate, Derivatives
from app.constants import Block, Flavor
from app.convexfn import Affine, ConvexQuadratic, MaxOfAffine, ScalarFn
from app.exceptions import BolzaError, ProblemFileError
from app.problem import ContinuousProblem, Grid

logger = logging.getLogger(__name__)


class _Strict(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)


class AffineSpec(_Strict):
    kind: Literal['affine']
    coefficients: list[float]
    offset: float = 0.0
    depends_on: list[Block] | None = None

    def build(self, n: int, nblocks: int) -> ScalarFn:
        return Affine(self.coefficients, self.offset, n=n, nblocks=nblocks)


class ConvexQuadraticSpec(_Strict):
    kind: Literal['convex_quadratic']
    matrix: list[list[float]]
    linear: list[float] | None = None
    offset: float = 0.0
    depends_on: list[Block] | None = None

    def build(self, n: int, nblocks: int) -> ScalarFn:
        return ConvexQuadratic(self.matrix, self.linear, self.offset, n=n, nblocks=nblocks)


class PieceSpec(_Strict):
    coefficients: list[float]
    offset: float = 0.0


class MaxOfAffineSpec(_Strict):
    kind: Literal['max_of_affine']
    pieces: list[PieceSpec] = Field(min_length=1)
    depends_on: list[Block] | None = None

    def build(self, n: int, nblocks: int) -> ScalarFn:
        return MaxOfAffine([Affine(p.coefficients, p.offset, n=n, nblocks=nblocks)
                            for p in self.pieces])


FunctionSpec = Annotated[
    Union[AffineSpec, ConvexQuadraticSpec, MaxOfAffineSpec],
    Field(discriminator='kind')
]


class ExponentialArc(_Strict):
    """scale * exp(rate * t) + offset."""
    kind: Literal['exponential']
    scale: float = 1.0
    rate: float
    offset: float = 0.0

    def __call__(self, t: np.ndarray) -> np.ndarray:
        return self.scale * np.exp(self.rate * np.asarray(t)) + self.offset


class PolynomialArc(_Strict):
    """sum_j coefficients[j] t^j."""
    kind: Literal['polynomial']
    coefficients: list[float] = Field(min_length=1)

    def __call__(self, t: np.ndarray) -> np.ndarray:
        return np.polynomial.polynomial.polyval(np.asarray(t), self.coefficients)


AnalyticArc = Annotated[Union[ExponentialArc, PolynomialArc], Field(discriminator='kind')]


class ProblemFile(_Strict):
    n: PositiveInt
    f: FunctionSpec
    q: FunctionSpec
    constraints: list[FunctionSpec] = Field(min_length=1)
    v0: list[float]
    v1: list[float]
    analytic: AnalyticArc | None = None

    @model_validator(mode='after')
    def check_analytic(self):
        if self.analytic is not None and self.n != 1:
            raise ValueError("An analytic optimum is only supported for n = 1.")
        return self

    def to_problem(self) -> ContinuousProblem:
        """Build the in-memory problem, checking dependence tags against coefficients."""
        try:
            constraints = []
            for k, entry in enumerate(self.constraints):
                w = entry.build(self.n, 3)
                if entry.depends_on is None:
                    raise ProblemFileError(f"Constraint {k} has no depends_on tag.")
                declared = frozenset(entry.depends_on)
                if declared != w.depends_on:
                    raise ProblemFileError(
                        f"Constraint {k} declares depends_on {sorted(b.value for b in declared)} "
                        f"but its nonzero blocks are {sorted(b.value for b in w.depends_on)}.")
                constraints.append(w)
            return ContinuousProblem(
                f=self.f.build(self.n, 1),
                q=self.q.build(self.n, 1),
                constraints=constraints,
                v0=self.v0,
                v1=self.v1,
            )
        except ProblemFileError:
            raise
        except BolzaError as e:
            raise ProblemFileError(f"Problem file is inconsistent: {e}") from e

    @classmethod
    def from_problem(cls, pc: ContinuousProblem, analytic=None) -> 'ProblemFile':
        constraints = [_function_spec(w, tag=True) for w in pc.constraints]
        return cls(n=pc.n, f=_function_spec(pc.f), q=_function_spec(pc.q),
                   constraints=constraints, v0=pc.v0.tolist(), v1=pc.v1.tolist(),
                   analytic=analytic)


def _function_spec(fn: ScalarFn, tag: bool = False) -> dict:
    depends_on = [b.value for b in Block if b in fn.depends_on] if tag else None
    if isinstance(fn, Affine):
        entry = {'kind': 'affine', 'coefficients': fn.coefficients.tolist(),
                 'offset': fn.offset}
    elif isinstance(fn, ConvexQuadratic):
        entry = {'kind': 'convex_quadratic', 'matrix': fn.matrix.tolist(),
                 'linear': fn.linear.tolist(), 'offset': fn.offset}
    elif isinstance(fn, MaxOfAffine):
        entry = {'kind': 'max_of_affine',
                 'pieces': [{'coefficients': p.coefficients.tolist(), 'offset': p.offset}
                            for p in fn.pieces]}
    else:
        raise ProblemFileError(f"{fn.kind.value} functions cannot be written to a problem file.")
    if depends_on is not None:
        entry['depends_on'] = depends_on
    return entry


class DerivativesFile(_Strict):
    dx: list[list[float]] | None = None
    d2x: list[list[float]] | None = None
    dxstar: list[list[float]] | None = None
    d2xstar: list[list[float]] | None = None
    dpsistar: list[list[float]] | None = None
    dustar: list[list[float]] | None = None
    dalphas: list[list[float]] | None = None
    d2alphas: list[list[float]] | None = None


class CertificateFile(_Strict):
    N: int
    flavor: Flavor
    mu: float = 1.0
    xstar: list[list[float]]
    ustar: list[list[float]]
    psistar: list[list[float]]
    alphas: list[list[float]]
    derivatives: DerivativesFile | None = None

    def to_certificate(self) -> Certificate:
        try:
            return Certificate(Grid(self.N), self.flavor, self.mu, self.xstar, self.ustar,
                               self.psistar, self.alphas)
        except BolzaError as e:
            raise ProblemFileError(f"Certificate file is inconsistent: {e}") from e

    def to_derivatives(self) -> Derivatives | None:
        if self.derivatives is None:
            return None
        return Derivatives(**{k: None if v is None else np.array(v)
                              for k, v in self.derivatives.model_dump().items()})

    @classmethod
    def from_certificate(cls, cert: Certificate,
                         derivatives: Derivatives | None = None) -> 'CertificateFile':
        bundle = None
        if derivatives is not None:
            bundle = {name: None if getattr(derivatives, name) is None
                      else np.asarray(getattr(derivatives, name)).reshape(cert.grid.size, -1).tolist()
                      for name in DerivativesFile.model_fields}
        return cls(N=cert.grid.N, flavor=cert.flavor, mu=cert.mu,
                   xstar=cert.xstar.tolist(), ustar=cert.ustar.tolist(),
                   psistar=cert.psistar.tolist(), alphas=cert.alphas.tolist(),
                   derivatives=bundle)


def _load(model: type[BaseModel], path: Path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ProblemFileError(f"Cannot read {path}: {e}") from e
    try:
        return model.model_validate_json(text)
    except ValidationError as e:
        fields = ', '.join('.'.join(str(p) for p in error['loc']) for error in e.errors())
        raise ProblemFileError(f"{path} failed validation ({fields}): {e}") from e


def load_problem_file(path) -> ProblemFile:
    problem_file = _load(ProblemFile, path)
    logger.info(f"Loaded problem file {path}.")
    return problem_file


def load_certificate_file(path) -> CertificateFile:
    return _load(CertificateFile, path)


def format_float(value: float) -> str:
    """17 significant digits, keeping a decimal point or exponent so floats stay floats."""
    if np.isnan(value):
        return 'NaN'
    if np.isinf(value):
        return 'Infinity' if value > 0 else '-Infinity'
    text = format(value, '.17g')
    return text if '.' in text or 'e' in text else text + '.0'


class _FixedDigitsEncoder(json.JSONEncoder):
    def iterencode(self, o, _one_shot=False):
        encoder = (json.encoder.encode_basestring_ascii if self.ensure_ascii
                   else json.encoder.encode_basestring)
        markers = {} if self.check_circular else None
        return json.encoder._make_iterencode(
            markers, self.default, encoder, self.indent, format_float, self.key_separator,
            self.item_separator, self.sort_keys, self.skipkeys, False)(o, 0)


def canonical_json(document) -> str:
    """Sorted keys, indent 2, floats with 17 significant digits and a trailing newline."""
    if isinstance(document, BaseModel):
        document = document.model_dump(mode='json', exclude_none=True)
    return json.dumps(document, cls=_FixedDigitsEncoder, sort_keys=True, indent=2) + '\n'
