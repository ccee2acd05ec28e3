import logging
import math

import numpy as np

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from app.cli.artifacts import RunReport, write_json, write_table_csv
from app.cli.boundary import command_boundary
from app.cli.schema import load_problem_file
from app.cli.svg import line_chart, write_svg
from app.constants import EXIT_PASS, EXIT_SOLVER_FAIL
from app.env import get_env_settings
from app.exceptions import BolzaError, ConfigurationError
from app.problem import ContinuousProblem, discretize
from app.solver import SolveResult, SolverConfig, solve

logger = logging.getLogger(__name__)


def parse_n_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(',') if part.strip()]
    except ValueError as e:
        raise ConfigurationError(f"--n-list must be comma-separated integers: {text}") from e


def _check_n_list(n_list: list[int]):
    if not n_list:
        raise ConfigurationError("The grid list is empty.")
    if any(N < 4 for N in n_list):
        raise ConfigurationError(f"Every grid needs N >= 4, got {n_list}.")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ConfigurationError(f"Grid sizes must be strictly ascending, got {n_list}.")


def _solve_one(pc: ContinuousProblem, N: int, cfg: SolverConfig) -> SolveResult:
    return solve(discretize(pc, N), cfg)


def _interpolate(values: np.ndarray, nodes: np.ndarray, at: np.ndarray) -> np.ndarray:
    return np.column_stack([np.interp(at, nodes, values[:, j]) for j in range(values.shape[1])])


def error_table(results: dict[int, SolveResult], arc=None) -> list[dict]:
    """Error per grid against the analytic arc, or against the next coarser grid.

    The observed order between consecutive rows is log(e_a / e_b) / log(N_b / N_a).
    """
    table = []
    previous = None
    for N in sorted(results):
        result = results[N]
        traj = result.trajectory
        if arc is not None:
            error = float(np.max(np.abs(traj.values - arc(traj.grid.nodes).reshape(-1, 1))))
        elif previous is not None:
            coarse = previous.trajectory
            fine = _interpolate(traj.values, traj.grid.nodes, coarse.grid.nodes)
            error = float(np.max(np.abs(coarse.values - fine)))
        else:
            error = None
        table.append({'N': N, 'delta': traj.grid.delta, 'objective': result.objective,
                      'converged': result.converged, 'error': error})
        previous = result
    if len(table) > 1:
        for i, row in enumerate(table):
            row['order'] = None
            if i == 0:
                continue
            a, b = table[i - 1], row
            if a['error'] and b['error'] and a['error'] > 0 and b['error'] > 0:
                row['order'] = math.log(a['error'] / b['error']) / math.log(b['N'] / a['N'])
    return table


@command_boundary
def cmd_converge(problem_path, n_list: list[int], out_path, analytic_check: bool = True,
                 seed: int = 0) -> int:
    _check_n_list(n_list)
    problem_file = load_problem_file(problem_path)
    pc = problem_file.to_problem()
    cfg = SolverConfig.create(seed=seed)
    env = get_env_settings()

    results, failures = {}, []
    with ThreadPoolExecutor(max_workers=env.max_workers) as executor:
        futures = {N: executor.submit(_solve_one, pc, N, cfg) for N in n_list}
        for N, future in futures.items():
            try:
                results[N] = future.result()
            except BolzaError as e:
                logger.error(f"Solve on N={N} failed: {e}")
                failures.append(N)
    failures += [N for N, result in results.items() if not result.converged]

    arc = problem_file.analytic if analytic_check else None
    table = error_table(results, arc)
    exit_code = EXIT_SOLVER_FAIL if failures else EXIT_PASS
    for row in table:
        logger.info(f"N={row['N']}: error={row['error']} order={row.get('order')}")

    out = Path(out_path)
    write_table_csv(out / 'converge.csv', table)
    write_json(out / 'converge.json', RunReport.create(
        command='converge',
        config={'problem': str(problem_path), 'n_list': n_list,
                'analytic_check': arc is not None, 'solver': cfg.model_dump(mode='json'),
                'failed': sorted(failures)},
        table=table,
        exit_code=exit_code,
    ))
    if env.emit_svg:
        rows = [row for row in table if row['error']]
        write_svg(out / 'converge.svg', line_chart(
            {'max error': ([row['N'] for row in rows], [row['error'] for row in rows])},
            title='Convergence', xlabel='N', ylabel='error', log_x=True, log_y=True))
    return exit_code


def register(subparsers):
    parser = subparsers.add_parser('converge', help="Convergence study over several grids.")
    parser.add_argument('--problem', required=True)
    parser.add_argument('--n-list', required=True, help="Comma-separated ascending N values.")
    parser.add_argument('--analytic-check', choices=['on', 'off'], default='on',
                        help="Compare against the problem's analytic optimum when present.")
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--out', default='out')
    parser.set_defaults(func=lambda args: cmd_converge(
        args.problem, parse_n_list(args.n_list), args.out,
        analytic_check=args.analytic_check == 'on', seed=args.seed))
