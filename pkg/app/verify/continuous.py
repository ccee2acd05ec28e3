"""Checkers for the optimality conditions of the continuous-time problem.

Every checker evaluates on the nodes t = 2 delta .. 1 - 2 delta with derivatives
from a GridCalculus (analytic grids when supplied, finite differences otherwise)
and reads the boundary conditions at t = 1.
"""
import logging

import numpy as np

from app.adjoint import Certificate, Derivatives
from app.constants import Block, FnKind, TheoremId
from app.convexfn import SUBGRADIENT_SLACK, subgradient_gap
from app.exceptions import ConfigurationError, FlavorError, UnsupportedError
from app.problem import (
    ContinuousProblem, GridTrajectory, grid_derivative, grid_second_derivative,
    is_zero_function, polyhedral_data
)
from app.transforms import ConeGenerators, cone_membership
from app.verify.common import (
    GridCalculus, block_columns, boundary_rows, check_flavor, check_grids,
    checked_nodes, complementarity_residuals, constraint_values, membership_residuals,
    nontriviality_row, require_independent, sign_row, vanishing_row, worst_row
)
from app.verify.report import ConditionRow, Tolerances, VerificationReport

logger = logging.getLogger(__name__)

SMOOTH_ADJOINT_ROW = 'smooth adjoint equation'

SHARED_SLOPE_NOTE = (
    "The adjoint x* doubles as the support slope of the running cost; "
    "one grid is used for both.")
SAMPLED_NOTE = "Global support inequalities are sampled, not proven."


class _Context:
    """Grids, nodes and arc points shared by one checker run."""

    def __init__(self, theorem: TheoremId, pc: ContinuousProblem, traj: GridTrajectory,
                 cert: Certificate, tol: float | None, tolerances: Tolerances | None,
                 derivatives: Derivatives | None):
        check_flavor(theorem, cert)
        check_grids(traj.grid, traj, cert, pc)
        self.theorem = theorem
        self.pc = pc
        self.traj = traj
        self.cert = cert
        self.tolerances = (tolerances or Tolerances()).updated(tol=tol)
        self.tol = self.tolerances.tol
        self.grid = traj.grid
        self.N = self.grid.N
        self.calc = GridCalculus(traj, cert, derivatives)
        self.nodes = checked_nodes(self.grid)
        self.times = self.grid.nodes[self.nodes]
        self.points = self.calc.arc_points()
        self.Z = self.points[self.nodes]
        self.alphas = cert.alphas[self.nodes]

    def running_gradient(self) -> np.ndarray:
        return self.pc.f.gradient_many(self.traj.values[self.nodes], self.times)

    def inclusion_row(self, targets: np.ndarray, blocks) -> ConditionRow:
        columns = block_columns(self.pc.n, blocks)
        residuals = membership_residuals(targets, self.alphas, self.pc.constraints, self.Z,
                                         self.tolerances.eps_act, columns)
        return worst_row('adjoint inclusion', residuals, self.times, self.tol)

    def slackness_rows(self) -> list[ConditionRow]:
        values = constraint_values(self.pc.constraints, self.Z)
        return [
            worst_row('complementary slackness',
                      complementarity_residuals(self.alphas, values, self.tolerances.activity),
                      self.times, self.tol),
            sign_row(self.alphas, self.times, self.tol),
        ]

    def boundary_rows(self, target: np.ndarray) -> list[ConditionRow]:
        return boundary_rows('boundary', target, self.pc.q, self.traj.values[self.N],
                             self.cert.mu, 1.0, self.tol, self.tolerances.eps_act,
                             self.tolerances.seed)

    def terminal_row(self) -> ConditionRow:
        return vanishing_row('terminal adjoint', self.cert.xstar[self.N], [1.0], self.tol)

    def report(self, rows: list[ConditionRow], notes: list[str] | None = None) -> VerificationReport:
        rows = rows + [nontriviality_row(self.cert, self.tolerances.trivial_tol)]
        report = VerificationReport.assemble(
            self.theorem, self.cert.flavor, rows, self.cert.nontriviality,
            self.tolerances.trivial_tol, notes)
        logger.info(f"{self.theorem.value} on N={self.N}: "
                    f"{'pass' if report.passed else 'fail'} "
                    f"(max residual {report.max_residual():.3e}).")
        return report


def _weighted_gradients(ctx: _Context) -> dict[Block, np.ndarray]:
    """sum_k alpha_k dW_k per argument block at every node, shape (N+1, n)."""
    n = ctx.pc.n
    sums = {block: np.zeros((ctx.grid.size, n)) for block in (Block.X, Block.V1, Block.V2)}
    for k, w in enumerate(ctx.pc.constraints):
        G = w.gradient_many(ctx.points)
        for j, block in enumerate((Block.X, Block.V1, Block.V2)):
            sums[block] += ctx.cert.alphas[:, [k]] * G[:, j * n:(j + 1) * n]
    return sums


def _smooth_adjoint_row(ctx: _Context, analytic_alphas: bool, required: bool) -> ConditionRow:
    """(sum alpha W_v2)'' - (sum alpha W_v1)' + sum alpha W_x + mu f' = 0."""
    n, pc = ctx.pc.n, ctx.pc
    if analytic_alphas and all(w.kind == FnKind.AFFINE for w in pc.constraints):
        A = np.vstack([w.coefficients for w in pc.constraints])
        second = ctx.calc.d2alphas @ A[:, 2 * n:]
        first = ctx.calc.dalphas @ A[:, n:2 * n]
        state = ctx.cert.alphas @ A[:, :n]
    else:
        sums = _weighted_gradients(ctx)
        second = ctx.calc.row_range(grid_second_derivative, sums[Block.V2])
        first = ctx.calc.row_range(grid_derivative, sums[Block.V1])
        state = sums[Block.X]
    residual = (second - first + state)[ctx.nodes] + ctx.cert.mu * ctx.running_gradient()
    return worst_row(SMOOTH_ADJOINT_ROW, np.linalg.norm(residual, axis=1), ctx.times,
                     ctx.tol, required=required)


def verify_continuous(pc: ContinuousProblem, traj: GridTrajectory, cert: Certificate,
                      tol: float | None = None, tolerances: Tolerances | None = None,
                      derivatives: Derivatives | None = None,
                      theorem: TheoremId = TheoremId.T5_1) -> VerificationReport:
    """Second-order adjoint inclusion, slackness and the t = 1 boundary conditions.

    With theorem C5.2 the smooth adjoint equation obtained by eliminating x*
    and psi* is required to pass. Under T5.1 it is reported but optional.
    """
    theorem = TheoremId(theorem)
    if theorem not in (TheoremId.T5_1, TheoremId.C5_2):
        raise ConfigurationError(f"{theorem.value} is not checked by verify_continuous.")
    ctx = _Context(theorem, pc, traj, cert, tol, tolerances, derivatives)
    calc, nodes, mu = ctx.calc, ctx.nodes, cert.mu
    first = (calc.d2xstar + calc.dpsistar)[nodes] - mu * ctx.running_gradient()
    targets = np.hstack([first, cert.psistar[nodes], -cert.xstar[nodes]])
    rows = [ctx.inclusion_row(targets, (Block.X, Block.V1, Block.V2))]
    rows += ctx.slackness_rows()
    rows += ctx.boundary_rows(-cert.psistar[ctx.N] - calc.dxstar[ctx.N])
    rows.append(ctx.terminal_row())

    notes = []
    if all(w.is_smooth for w in pc.constraints):
        analytic = derivatives is not None and derivatives.d2alphas is not None
        rows.append(_smooth_adjoint_row(ctx, analytic, required=theorem == TheoremId.C5_2))
    elif theorem == TheoremId.C5_2:
        raise UnsupportedError("The smooth adjoint equation needs differentiable constraints.")
    else:
        notes.append("Constraints are nonsmooth; the smooth adjoint equation is skipped.")
    return ctx.report(rows, notes)


def verify_special_w1(pc: ContinuousProblem, traj: GridTrajectory, cert: Certificate,
                      tol: float | None = None, tolerances: Tolerances | None = None,
                      derivatives: Derivatives | None = None) -> VerificationReport:
    """Constraints free of x': (x*'' - mu f', -x*) in sum alpha dW over (x, x'')."""
    require_independent(pc, Block.V1, TheoremId.C5_1)
    ctx = _Context(TheoremId.C5_1, pc, traj, cert, tol, tolerances, derivatives)
    nodes = ctx.nodes
    targets = np.hstack([ctx.calc.d2xstar[nodes] - cert.mu * ctx.running_gradient(),
                         -cert.xstar[nodes]])
    rows = [ctx.inclusion_row(targets, (Block.X, Block.V2))]
    rows += ctx.slackness_rows()
    rows += ctx.boundary_rows(-ctx.calc.dxstar[ctx.N])
    rows.append(ctx.terminal_row())
    return ctx.report(rows)


def verify_special_w2(pc: ContinuousProblem, traj: GridTrajectory, cert: Certificate,
                      tol: float | None = None, tolerances: Tolerances | None = None,
                      derivatives: Derivatives | None = None) -> VerificationReport:
    """Constraints free of x'': (u*' - mu f', u*) in sum alpha dW over (x, x')."""
    require_independent(pc, Block.V2, TheoremId.T5_2)
    ctx = _Context(TheoremId.T5_2, pc, traj, cert, tol, tolerances, derivatives)
    nodes = ctx.nodes
    targets = np.hstack([ctx.calc.dustar[nodes] - cert.mu * ctx.running_gradient(),
                         cert.ustar[nodes]])
    rows = [ctx.inclusion_row(targets, (Block.X, Block.V1))]
    rows += ctx.slackness_rows()
    rows += ctx.boundary_rows(-cert.ustar[ctx.N])
    rows.append(vanishing_row('x* vanishes', cert.xstar, ctx.grid.nodes, ctx.tol))
    return ctx.report(rows)


def _normal_cone_rows(ctx: _Context, targets: np.ndarray) -> list[ConditionRow]:
    """Multiplier-free inclusion: targets lie in the cone of the active constraint gradients.

    The cone weights summed per constraint are compared with the certificate
    multipliers in an optional row.
    """
    pc, tolerances = ctx.pc, ctx.tolerances
    A = np.vstack([w.coefficients for w in pc.constraints])
    values = constraint_values(pc.constraints, ctx.Z)
    bound = max(tolerances.cone_tol, ctx.tol)
    fits, gaps = np.empty(len(ctx.nodes)), np.empty(len(ctx.nodes))
    for i, target in enumerate(targets):
        active = np.flatnonzero(np.abs(values[i]) <= tolerances.activity)
        cone = ConeGenerators(A[active], owners=tuple(int(k) for k in active))
        member, coefficients = cone_membership(target, cone, bound)
        fit = cone.generators.T @ coefficients - target if len(cone) else -target
        fits[i] = np.linalg.norm(fit) / (1.0 + np.linalg.norm(target))
        if not member:
            logger.debug(f"Target at t={ctx.times[i]:.4f} is outside the normal cone.")
        gaps[i] = np.max(np.abs(cone.multipliers(coefficients, pc.m) - ctx.alphas[i]))
    return [
        worst_row('normal cone', fits, ctx.times, bound, homogeneous=False),
        worst_row('recovered multipliers', gaps, ctx.times, ctx.tol, required=False),
    ]


def verify_polyhedral(pc: ContinuousProblem, traj: GridTrajectory, cert: Certificate,
                      tol: float | None = None, tolerances: Tolerances | None = None,
                      derivatives: Derivatives | None = None) -> VerificationReport:
    """Affine constraints P0 x + P1 x' - Q x'' - d <= 0 with zero running cost.

    lambda = alphas must satisfy Q^T lambda'' + P1^T lambda' - P0^T lambda = 0,
    with -x*(1) - P1^T lambda(1) in mu dq(x(1)) and x*(1) = 0.
    """
    for k, w in enumerate(pc.constraints):
        if w.kind != FnKind.AFFINE:
            raise FlavorError(f"C5.3 needs affine constraints; constraint {k} is {w.kind.value}.")
    if not is_zero_function(pc.f):
        raise UnsupportedError("C5.3 is stated for a zero running cost.")
    ctx = _Context(TheoremId.C5_3, pc, traj, cert, tol, tolerances, derivatives)
    P0, P1, Q, _ = polyhedral_data(pc.constraints)
    lam = cert.alphas
    residual = ctx.calc.d2alphas @ Q + ctx.calc.dalphas @ P1 - lam @ P0
    rows = [worst_row('multiplier equation', np.linalg.norm(residual[ctx.nodes], axis=1),
                      ctx.times, ctx.tol)]
    calc, nodes = ctx.calc, ctx.nodes
    targets = np.hstack([(calc.d2xstar + calc.dpsistar)[nodes], cert.psistar[nodes],
                         -cert.xstar[nodes]])
    rows += _normal_cone_rows(ctx, targets)
    rows += ctx.boundary_rows(-cert.xstar[ctx.N] - lam[ctx.N] @ P1)
    rows.append(ctx.terminal_row())
    rows += ctx.slackness_rows()
    return ctx.report(rows)


def verify_nonconvex(pc: ContinuousProblem, traj: GridTrajectory, cert: Certificate,
                     tol: float | None = None, sample_count: int | None = None,
                     seed: int | None = None, tolerances: Tolerances | None = None,
                     derivatives: Derivatives | None = None) -> VerificationReport:
    tolerances = (tolerances or Tolerances()).updated(sample_count=sample_count, seed=seed)
    ctx = _Context(TheoremId.T5_3, pc, traj, cert, tol, tolerances, derivatives)
    tolerances, calc, nodes = ctx.tolerances, ctx.calc, ctx.nodes
    first = (calc.d2xstar + calc.dpsistar - cert.xstar)[nodes]
    targets = np.hstack([first, cert.psistar[nodes], -cert.xstar[nodes]])
    rows = [ctx.inclusion_row(targets, (Block.X, Block.V1, Block.V2))]

    gaps = np.array([
        subgradient_gap(pc.f, traj.values[i], cert.xstar[i], tolerances.sample_count,
                        tolerances.seed, tolerances.sample_radius, float(t))
        for i, t in zip(nodes, ctx.times)])
    rows.append(worst_row('running cost support (sampled)',
                          np.maximum(0.0, -gaps - SUBGRADIENT_SLACK), ctx.times, ctx.tol,
                          homogeneous=False))
    slope = -(cert.psistar[ctx.N] + calc.dxstar[ctx.N])
    gap = subgradient_gap(pc.q, traj.values[ctx.N], slope, tolerances.sample_count,
                          tolerances.seed, tolerances.sample_radius)
    rows.append(worst_row('terminal cost support (sampled)',
                          max(0.0, -gap - SUBGRADIENT_SLACK), [1.0], ctx.tol,
                          homogeneous=False))
    rows += ctx.slackness_rows()
    notes = [SHARED_SLOPE_NOTE,
             f"{SAMPLED_NOTE} {tolerances.sample_count} samples within "
             f"{tolerances.sample_radius} of the arc, seed {tolerances.seed}."]
    return ctx.report(rows, notes)
