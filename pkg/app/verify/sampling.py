"""Empirical sufficiency check: no sampled feasible trajectory beats the candidate."""
import logging

import numpy as np

from pydantic import Field, NonNegativeFloat, PositiveInt

from app.config import FrozenConfig
from app.constants import SamplingStatus
from app.exceptions import PreconditionError
from app.problem import (
    ContinuousProblem, DiscreteProblem, GridTrajectory, discretize, feasibility_residuals,
    objective_discrete
)
from app.verify.report import SamplingReport

logger = logging.getLogger(__name__)


class SamplerConfig(FrozenConfig):
    samples: PositiveInt = 1000
    amplitude: NonNegativeFloat = 0.1
    # Perturbations are polynomials in t of this degree.
    degree: int = Field(3, ge=0)
    seed: int = 0
    feas_tol: NonNegativeFloat = 1e-12
    # Feasibility required of the candidate itself.
    candidate_tol: NonNegativeFloat = 1e-8
    budget_factor: PositiveInt = 50
    gap_tol: NonNegativeFloat = 1e-9


def _perturbations(rng: np.random.Generator, t: np.ndarray, count: int,
                   cfg: SamplerConfig, n: int) -> np.ndarray:
    """amplitude * sum_j c_j t^j with c_j ~ U(-1, 1), shape (count, N+1, n)."""
    powers = np.vander(t, cfg.degree + 1, increasing=True)
    coefficients = rng.uniform(-1.0, 1.0, size=(count, cfg.degree + 1, n))
    return cfg.amplitude * np.einsum('ij,cjn->cin', powers, coefficients)


def _is_feasible(dp: DiscreteProblem, values: np.ndarray, tol: float) -> bool:
    return bool(np.all(dp.phi_values(values) <= tol))


def sufficiency_sampling_test(pc: ContinuousProblem, traj_opt: GridTrajectory,
                              cfg: SamplerConfig | None = None) -> SamplingReport:
    cfg = cfg or SamplerConfig()
    dp = discretize(pc, traj_opt.grid.N)
    residual = feasibility_residuals(dp, traj_opt).max_residual
    if residual > cfg.candidate_tol:
        raise PreconditionError(
            f"Candidate trajectory is infeasible (max residual {residual:.3e}).")
    optimal = objective_discrete(dp, traj_opt)
    rng = np.random.default_rng(cfg.seed)
    budget = cfg.budget_factor * cfg.samples
    fixed = dp.fixed_values

    gaps, draws = [], 0
    while len(gaps) < cfg.samples and draws < budget:
        count = min(cfg.samples, budget - draws)
        candidates = traj_opt.values + _perturbations(rng, dp.grid.nodes, count, cfg, dp.n)
        candidates[:, :2] = fixed
        draws += count
        for values in candidates:
            if not _is_feasible(dp, values, cfg.feas_tol):
                continue
            sample = GridTrajectory(dp.grid, values)
            gaps.append(objective_discrete(dp, sample) - optimal)
            if len(gaps) == cfg.samples:
                break

    accepted = len(gaps)
    if accepted == 0:
        logger.warning(f"No feasible sample in {draws} draws.")
        return SamplingReport(status=SamplingStatus.SAMPLING_FAILURE, samples=0, draws=draws,
                              acceptance_rate=0.0, min_gap=None, violations=0,
                              optimal_objective=optimal, best_objective=None, passed=False)
    gaps = np.array(gaps)
    violations = int(np.sum(gaps < -cfg.gap_tol))
    if accepted < cfg.samples:
        logger.warning(f"Sampling budget spent with {accepted} of {cfg.samples} samples.")
        status = SamplingStatus.SAMPLING_FAILURE
    else:
        status = SamplingStatus.VIOLATION if violations else SamplingStatus.OK
    logger.info(f"Sampled {accepted} feasible trajectories in {draws} draws, "
                f"min gap {gaps.min():.3e}, {violations} violations.")
    return SamplingReport(
        status=status,
        samples=accepted,
        draws=draws,
        acceptance_rate=accepted / draws,
        min_gap=float(gaps.min()),
        violations=violations,
        optimal_objective=optimal,
        best_objective=float(optimal + gaps.min()),
        passed=status == SamplingStatus.OK,
    )
