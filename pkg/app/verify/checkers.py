"""Routing of a theorem identifier to its checker."""
import logging

from app.adjoint import Certificate, Derivatives
from app.constants import TheoremId
from app.problem import ContinuousProblem, GridTrajectory, discretize
from app.verify.continuous import (
    verify_continuous, verify_nonconvex, verify_polyhedral, verify_special_w1,
    verify_special_w2
)
from app.verify.discrete import DISCRETE_THEOREMS, verify_discrete
from app.verify.report import Tolerances, VerificationReport

logger = logging.getLogger(__name__)

CONTINUOUS_CHECKERS = {
    TheoremId.C5_1: verify_special_w1,
    TheoremId.T5_2: verify_special_w2,
    TheoremId.C5_3: verify_polyhedral,
    TheoremId.T5_3: verify_nonconvex,
}


def run_checker(theorem: TheoremId, pc: ContinuousProblem, traj: GridTrajectory,
                cert: Certificate, tolerances: Tolerances | None = None,
                derivatives: Derivatives | None = None) -> VerificationReport:
    theorem = TheoremId(theorem)
    logger.debug(f"Running {theorem.value} checker on N={traj.grid.N}.")
    if theorem in DISCRETE_THEOREMS:
        dp = discretize(pc, traj.grid.N)
        return verify_discrete(dp, traj, cert, theorem=theorem, tolerances=tolerances)
    if theorem in (TheoremId.T5_1, TheoremId.C5_2):
        return verify_continuous(pc, traj, cert, tolerances=tolerances,
                                 derivatives=derivatives, theorem=theorem)
    return CONTINUOUS_CHECKERS[theorem](pc, traj, cert, tolerances=tolerances,
                                        derivatives=derivatives)
