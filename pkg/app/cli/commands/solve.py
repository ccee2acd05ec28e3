import logging

from pathlib import Path

from app.adjoint import reconstruct_adjoints
from app.cli.artifacts import (
    CERTIFICATE_NAME, REPORT_NAME, TRAJECTORY_NAME, RunReport, write_certificate,
    write_json, write_trajectory_csv
)
from app.cli.boundary import command_boundary
from app.cli.schema import load_problem_file
from app.constants import EXIT_PASS, EXIT_SOLVER_FAIL, EXIT_VERIFY_FAIL, InnerMethod
from app.problem import discretize
from app.solver import SolverConfig, solve
from app.verify import Tolerances, verify_discrete

logger = logging.getLogger(__name__)

# Discrete residuals of a converged solve scale like grad_tol / delta.
TOL_FACTOR = 10.0


def default_tol(cfg: SolverConfig, delta: float) -> float:
    return TOL_FACTOR * cfg.grad_tol / delta


@command_boundary
def cmd_solve(problem_path, N: int, out_path, tol: float | None = None, seed: int = 0,
              overrides: dict | None = None) -> int:
    """Discretize, solve, reconstruct, verify and write the run artifacts."""
    pc = load_problem_file(problem_path).to_problem()
    dp = discretize(pc, N)
    cfg = SolverConfig.create(seed=seed, **(overrides or {}))
    result = solve(dp, cfg)
    cert = reconstruct_adjoints(dp, result.trajectory, result.multipliers)
    tol = tol if tol is not None else default_tol(cfg, dp.grid.delta)
    report = verify_discrete(dp, result.trajectory, cert, tolerances=Tolerances.create(tol=tol))

    if not result.converged:
        exit_code = EXIT_SOLVER_FAIL
    elif not report.passed:
        exit_code = EXIT_VERIFY_FAIL
    else:
        exit_code = EXIT_PASS
    out = Path(out_path)
    write_trajectory_csv(out / TRAJECTORY_NAME, result.trajectory, cert)
    write_certificate(out / CERTIFICATE_NAME, cert)
    summary = result.summary() | {'raw_multipliers': result.raw_multipliers.tolist()}
    write_json(out / REPORT_NAME, RunReport.create(
        command='solve',
        config={'problem': str(problem_path), 'N': N, 'tol': tol,
                'solver': cfg.model_dump(mode='json')},
        solve=summary,
        verification=[report],
        exit_code=exit_code,
    ))
    logger.info(f"Solve finished with exit code {exit_code}.")
    return exit_code


def register(subparsers):
    parser = subparsers.add_parser('solve', help="Solve a problem file on one grid.")
    parser.add_argument('--problem', required=True, help="Problem JSON file.")
    parser.add_argument('--n', type=int, required=True, help="Grid size N >= 4.")
    parser.add_argument('--tol', type=float, default=None,
                        help="Verification tolerance (default 10 grad_tol / delta).")
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--inner-method', choices=[m.value for m in InnerMethod], default=None,
                        help="Inner minimizer (default lbfgs).")
    parser.add_argument('--out', default='out', help="Output directory.")
    parser.set_defaults(func=lambda args: cmd_solve(
        args.problem, args.n, args.out, tol=args.tol, seed=args.seed,
        overrides={'inner_method': args.inner_method} if args.inner_method else None))
