from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat

from app.config import FrozenConfig
from app.constants import Flavor, SamplingStatus, TheoremId

NONTRIVIALITY = "nontriviality"


class Tolerances(FrozenConfig):
    tol: float = Field(1e-6, gt=0.0)
    eps_act: NonNegativeFloat = 1e-8
    trivial_tol: float = Field(1e-10, gt=0.0)
    cone_tol: float = Field(1e-9, gt=0.0)
    # Sampled global inequalities of the nonconvex checker.
    sample_count: int = Field(1000, gt=0)
    sample_radius: float = Field(5.0, gt=0.0)
    seed: int = 0

    @property
    def activity(self) -> float:
        """Threshold |W_k| below which a constraint counts as active."""
        return max(self.eps_act, self.tol)


class ConditionRow(BaseModel):
    label: str
    residual: float
    tolerance: float
    passed: bool
    # Residual scales linearly with the certificate.
    homogeneous: bool = True
    # Optional rows are reported but do not decide the verdict.
    required: bool = True
    worst_time: float | None = None

    model_config = ConfigDict(frozen=True)


class VerificationReport(BaseModel):
    theorem: TheoremId
    flavor: Flavor
    conditions: list[ConditionRow]
    nontriviality: float
    trivial_tol: float
    passed: bool
    notes: list[str] = []

    model_config = ConfigDict(frozen=True)

    @classmethod
    def assemble(cls, theorem: TheoremId, flavor: Flavor, conditions: list[ConditionRow],
                 nontriviality: float, trivial_tol: float, notes: list[str] | None = None):
        passed = (all(row.passed for row in conditions if row.required)
                  and nontriviality > trivial_tol)
        return cls(theorem=theorem, flavor=flavor, conditions=conditions,
                   nontriviality=nontriviality, trivial_tol=trivial_tol,
                   passed=passed, notes=notes or [])

    @property
    def nontrivial(self) -> bool:
        return self.nontriviality > self.trivial_tol

    def condition(self, label: str) -> ConditionRow:
        for row in self.conditions:
            if row.label == label:
                return row
        raise KeyError(label)

    def homogeneous_passed(self) -> bool:
        return all(row.passed for row in self.conditions
                   if row.required and row.homogeneous)

    def max_residual(self, required_only: bool = True) -> float:
        """Largest residual, leaving out the nontriviality norm."""
        return max((row.residual for row in self.conditions
                    if row.label != NONTRIVIALITY and (row.required or not required_only)),
                   default=0.0)


class SamplingReport(BaseModel):
    status: SamplingStatus
    samples: int
    draws: int
    acceptance_rate: float
    min_gap: float | None
    violations: int
    optimal_objective: float
    best_objective: float | None
    passed: bool

    model_config = ConfigDict(frozen=True)
