import logging

from pathlib import Path

from app.cli.artifacts import REPORT_NAME, RunReport, read_trajectory_csv, write_json
from app.cli.boundary import command_boundary
from app.cli.schema import load_certificate_file, load_problem_file
from app.constants import EXIT_PASS, EXIT_VERIFY_FAIL, TheoremId
from app.verify import Tolerances, run_checker

logger = logging.getLogger(__name__)


@command_boundary
def cmd_verify(problem_path, trajectory_path, certificate_path, theorem: TheoremId,
               out_path, tol: float | None = None, seed: int = 0) -> int:
    pc = load_problem_file(problem_path).to_problem()
    traj = read_trajectory_csv(trajectory_path)
    certificate_file = load_certificate_file(certificate_path)
    cert = certificate_file.to_certificate()
    tolerances = Tolerances.create(seed=seed).updated(tol=tol)
    report = run_checker(theorem, pc, traj, cert, tolerances,
                         certificate_file.to_derivatives())
    exit_code = EXIT_PASS if report.passed else EXIT_VERIFY_FAIL
    write_json(Path(out_path) / REPORT_NAME, RunReport.create(
        command='verify',
        config={'problem': str(problem_path), 'trajectory': str(trajectory_path),
                'certificate': str(certificate_path), 'theorem': report.theorem.value,
                'tolerances': tolerances.model_dump(mode='json')},
        verification=[report],
        exit_code=exit_code,
    ))
    for row in report.conditions:
        logger.info(f"{row.label}: {row.residual:.3e} <= {row.tolerance:g} "
                    f"{'ok' if row.passed else 'FAIL'}")
    return exit_code


def register(subparsers):
    parser = subparsers.add_parser('verify', help="Check a trajectory and certificate.")
    parser.add_argument('--problem', required=True)
    parser.add_argument('--trajectory', required=True, help="Trajectory CSV.")
    parser.add_argument('--certificate', required=True, help="Certificate JSON.")
    parser.add_argument('--theorem', required=True, choices=[t.value for t in TheoremId])
    parser.add_argument('--tol', type=float, default=None)
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--out', default='out')
    parser.set_defaults(func=lambda args: cmd_verify(
        args.problem, args.trajectory, args.certificate, TheoremId(args.theorem),
        args.out, tol=args.tol, seed=args.seed))
