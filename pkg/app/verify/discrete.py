"""Checkers for the optimality conditions of the discretized problem.

Rows are checked at t = 2 delta .. 1 - 2 delta. With alpha in continuous-limit
scaling the stationarity target of the full form is

    [(x*(t) - u*(t) + u*(t+delta) - x*(t+2delta)) / delta^2 - mu f'(x(t), t),
     (u*(t+delta) - 2 x*(t+2delta)) / delta,
     -x*(t+2delta)]                               in  sum_k alpha_k(t) dW_k

with (x*(1-delta) - u*(1-delta)) / delta in mu dq(x(1-delta)) and x*(1) = 0.
"""
import logging

import numpy as np

from app.adjoint import Certificate
from app.constants import Block, DISCRETE_THEOREM, Flavor, TheoremId
from app.exceptions import ConfigurationError
from app.problem import DiscreteProblem, GridTrajectory
from app.transforms import w_to_phi_array
from app.verify.common import (
    block_columns, boundary_rows, check_flavor, check_grids, checked_nodes,
    complementarity_residuals, constraint_values, membership_residuals,
    nontriviality_row, require_independent, sign_row, vanishing_row, worst_row
)
from app.verify.report import Tolerances, VerificationReport

logger = logging.getLogger(__name__)

DISCRETE_THEOREMS = (TheoremId.T3_1, TheoremId.T4_1, TheoremId.T4_2, TheoremId.T4_3)

ALTERNATE_BOUNDARY_NOTE = (
    "The boundary condition is also reported in the alternate form "
    "psi*(1) + dx*(1-delta) in mu dq(x(1-delta)); that row is informational.")


def _running_gradient(dp: DiscreteProblem, traj: GridTrajectory, nodes: np.ndarray) -> np.ndarray:
    return dp.source.f.gradient_many(traj.values[nodes], dp.grid.nodes[nodes])


def _stationarity_targets(theorem: TheoremId, dp: DiscreteProblem, traj: GridTrajectory,
                          cert: Certificate, nodes: np.ndarray) -> np.ndarray:
    delta, mu = dp.grid.delta, cert.mu
    xs, us = cert.xstar, cert.ustar
    fx = _running_gradient(dp, traj, nodes)
    if theorem == TheoremId.T4_2:
        second = (xs[nodes + 2] - 2 * xs[nodes + 1] + xs[nodes]) / delta ** 2
        return np.hstack([second - mu * fx, -xs[nodes + 2]])
    if theorem == TheoremId.T4_3:
        slope = (us[nodes + 1] - us[nodes]) / delta
        return np.hstack([slope - mu * fx, us[nodes + 1]])
    if theorem == TheoremId.T3_1:
        X, U = xs / delta, us / delta
        return np.hstack([X[nodes] - U[nodes] - mu * delta * fx, U[nodes + 1], -X[nodes + 2]])
    first = (xs[nodes] - us[nodes] + us[nodes + 1] - xs[nodes + 2]) / delta ** 2
    return np.hstack([first - mu * fx, (us[nodes + 1] - 2 * xs[nodes + 2]) / delta,
                      -xs[nodes + 2]])


def _boundary_target(theorem: TheoremId, cert: Certificate, delta: float) -> np.ndarray:
    N = cert.grid.N
    xs, us = cert.xstar, cert.ustar
    if theorem == TheoremId.T4_2:
        return -(xs[N] - xs[N - 1]) / delta
    if theorem == TheoremId.T4_3:
        return -us[N - 1]
    return (xs[N - 1] - us[N - 1]) / delta


def verify_discrete(dp: DiscreteProblem, traj: GridTrajectory, cert: Certificate,
                    tol: float | None = None, theorem: TheoremId | None = None,
                    tolerances: Tolerances | None = None) -> VerificationReport:
    tolerances = (tolerances or Tolerances()).updated(tol=tol)
    tol = tolerances.tol
    theorem = TheoremId(theorem) if theorem else DISCRETE_THEOREM[cert.flavor]
    if theorem not in DISCRETE_THEOREMS:
        raise ConfigurationError(f"{theorem.value} is not a discrete checker.")
    check_flavor(theorem, cert)
    pc = dp.source
    check_grids(dp.grid, traj, cert, pc)
    if theorem == TheoremId.T4_2:
        require_independent(pc, Block.V1, theorem)
    if theorem == TheoremId.T4_3:
        require_independent(pc, Block.V2, theorem)

    grid, delta, n, N = dp.grid, dp.grid.delta, dp.n, dp.grid.N
    nodes = checked_nodes(grid)
    times = grid.nodes[nodes]
    Z = dp.constraint_points(traj.values)[nodes]
    alphas = cert.alphas[nodes]

    if theorem == TheoremId.T4_2:
        columns = block_columns(n, (Block.X, Block.V2))
    elif theorem == TheoremId.T4_3:
        columns = block_columns(n, (Block.X, Block.V1))
    else:
        columns = block_columns(n, (Block.X, Block.V1, Block.V2))
    weights = alphas
    transform = None
    if theorem == TheoremId.T3_1:
        # Phi-form: generators of dPhi_k and raw multipliers delta alpha_k.
        weights = delta * alphas
        transform = lambda G: w_to_phi_array(G, delta)  # noqa: E731

    targets = _stationarity_targets(theorem, dp, traj, cert, nodes)
    residuals = membership_residuals(targets, weights, pc.constraints, Z,
                                     tolerances.eps_act, columns, transform)
    values = constraint_values(pc.constraints, Z)
    rows = [
        worst_row('adjoint inclusion', residuals, times, tol),
        worst_row('complementary slackness',
                  complementarity_residuals(weights, values, tolerances.activity), times, tol),
        sign_row(weights, times, tol),
    ]

    x_end = traj.values[N - 1]
    target = _boundary_target(theorem, cert, delta)
    rows += boundary_rows('boundary', target, pc.q, x_end, cert.mu, grid.time(N - 1),
                          tol, tolerances.eps_act, tolerances.seed)
    terminal = cert.xstar[N] / delta if theorem == TheoremId.T3_1 else cert.xstar[N]
    rows.append(vanishing_row('terminal adjoint', terminal, [1.0], tol))
    if cert.flavor == Flavor.W2:
        rows.append(vanishing_row('x* vanishes', cert.xstar, grid.nodes, tol))

    notes = []
    if theorem in (TheoremId.T4_1, TheoremId.T3_1):
        alternate = cert.psistar[N] + (cert.xstar[N] - cert.xstar[N - 1]) / delta
        rows += boundary_rows('boundary (alternate form)', alternate, pc.q, x_end,
                              cert.mu, 1.0, tol, tolerances.eps_act, tolerances.seed,
                              required=False)
        notes.append(ALTERNATE_BOUNDARY_NOTE)
    rows.append(nontriviality_row(cert, tolerances.trivial_tol))
    if cert.mu != 1.0:
        notes.append(f"Certificate carries mu={cert.mu}; only mu=1 certificates are constructed.")

    report = VerificationReport.assemble(theorem, cert.flavor, rows, cert.nontriviality,
                                         tolerances.trivial_tol, notes)
    logger.info(f"{theorem.value} on N={N}: {'pass' if report.passed else 'fail'} "
                f"(max residual {report.max_residual():.3e}).")
    return report
