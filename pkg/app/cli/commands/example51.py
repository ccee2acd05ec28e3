"""End-to-end run of the worked example: minimize x(1) under x - 3x' <= 0."""
import logging

import numpy as np

from pathlib import Path

from app.adjoint import (
    analytic_certificate_example51, analytic_derivatives_example51, example51_problem,
    example51_trajectory, reconstruct_adjoints
)
from app.cli.artifacts import (
    CERTIFICATE_NAME, REPORT_NAME, TRAJECTORY_NAME, RunReport, write_certificate,
    write_json, write_trajectory_csv
)
from app.cli.boundary import command_boundary
from app.cli.svg import line_chart, write_svg
from app.constants import EXIT_PASS, EXIT_SOLVER_FAIL, EXIT_VERIFY_FAIL, Flavor
from app.env import get_env_settings
from app.problem import discretize
from app.solver import SolverConfig, solve
from app.verify import Tolerances, verify_special_w2

logger = logging.getLogger(__name__)

OPTIMAL_VALUE = float(np.exp(1.0 / 3.0))
# Finite-difference checks of the solver certificate are first order in delta.
FD_TOL_FACTOR = 10.0
TABLE_ROWS = 10


def comparison_table(t, x, ustar, alphas) -> list[dict]:
    step = max(1, (len(t) - 1) // TABLE_ROWS)
    rows = []
    for i in range(0, len(t), step):
        dual = np.exp((1.0 - t[i]) / 3.0)
        rows.append({'t': float(t[i]), 'x': float(x[i]), 'x_exact': float(np.exp(t[i] / 3.0)),
                     'ustar': float(ustar[i]), 'ustar_exact': float(-dual),
                     'alpha': float(alphas[i]), 'alpha_exact': float(dual / 3.0)})
    return rows


def _print_table(rows: list[dict]):
    print(f"{'t':>6} {'x':>10} {'e^(t/3)':>10} {'u*':>10} {'-e^((1-t)/3)':>13} "
          f"{'alpha':>10} {'exact':>10}")
    for r in rows:
        print(f"{r['t']:6.3f} {r['x']:10.6f} {r['x_exact']:10.6f} {r['ustar']:10.6f} "
              f"{r['ustar_exact']:13.6f} {r['alpha']:10.6f} {r['alpha_exact']:10.6f}")


@command_boundary
def cmd_example51(N: int, out_path=None, tol: float | None = None, seed: int = 0) -> int:
    pc = example51_problem()
    dp = discretize(pc, N)
    grid = dp.grid
    logger.info("Stage solve.")
    result = solve(dp, SolverConfig.create(seed=seed))
    if not result.converged:
        logger.error(f"Stage solve failed on N={N}.")
        return EXIT_SOLVER_FAIL

    logger.info("Stage reconstruct.")
    cert = reconstruct_adjoints(dp, result.trajectory, result.multipliers, flavor=Flavor.W2)
    logger.info("Stage verify.")
    fd_tol = tol if tol is not None else FD_TOL_FACTOR * grid.delta
    numeric = verify_special_w2(pc, result.trajectory, cert,
                                tolerances=Tolerances.create(tol=fd_tol, seed=seed))
    exact_cert = analytic_certificate_example51(N, Flavor.W2)
    exact_derivatives = analytic_derivatives_example51(N, Flavor.W2)
    analytic = verify_special_w2(pc, example51_trajectory(grid), exact_cert,
                                 tolerances=Tolerances.create(seed=seed),
                                 derivatives=exact_derivatives)

    t = grid.nodes
    x = result.trajectory.values[:, 0]
    trajectory_error = float(np.max(np.abs(x - np.exp(t / 3.0))))
    objective_error = abs(result.objective - OPTIMAL_VALUE)
    rows = comparison_table(t, x, cert.ustar[:, 0], cert.alphas[:, 0])
    _print_table(rows)
    print(f"minimal value {result.objective:.7f} (exact {OPTIMAL_VALUE:.7f}), "
          f"max trajectory error {trajectory_error:.3e}")
    print(f"T5.2 solver certificate: {'pass' if numeric.passed else 'fail'}, "
          f"analytic certificate: {'pass' if analytic.passed else 'fail'}")

    if not analytic.passed:
        logger.error("Stage verify failed for the analytic certificate.")
    if not numeric.passed:
        logger.error("Stage verify failed for the solver certificate.")
    exit_code = EXIT_PASS if numeric.passed and analytic.passed else EXIT_VERIFY_FAIL

    if out_path is not None:
        out = Path(out_path)
        write_trajectory_csv(out / TRAJECTORY_NAME, result.trajectory, cert)
        write_certificate(out / CERTIFICATE_NAME, cert)
        write_certificate(out / 'analytic_certificate.json', exact_cert, exact_derivatives)
        write_trajectory_csv(out / 'analytic_trajectory.csv', example51_trajectory(grid))
        write_json(out / REPORT_NAME, RunReport.create(
            command='example51',
            config={'N': N, 'tol': fd_tol, 'seed': seed},
            solve=result.summary() | {'trajectory_error': trajectory_error,
                                      'objective_error': objective_error},
            verification=[numeric, analytic],
            table=rows,
            exit_code=exit_code,
        ))
        if get_env_settings().emit_svg:
            write_svg(out / 'example51.svg', line_chart(
                {'numeric': (t, x), 'e^(t/3)': (t, np.exp(t / 3.0))},
                title=f"Worked example, N={N}", xlabel='t', ylabel='x'))
    return exit_code


def register(subparsers):
    parser = subparsers.add_parser('example51', help="Solve and verify the worked example.")
    parser.add_argument('--n', type=int, default=100)
    parser.add_argument('--tol', type=float, default=None,
                        help="Tolerance for the solver certificate (default 10 delta).")
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--out', default=None)
    parser.set_defaults(func=lambda args: cmd_example51(
        args.n, args.out, tol=args.tol, seed=args.seed))
