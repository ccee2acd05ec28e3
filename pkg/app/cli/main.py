import argparse
import logging

from app.cli.commands.converge import register as register_converge
from app.cli.commands.example51 import register as register_example51
from app.cli.commands.solve import register as register_solve
from app.cli.commands.verify import register as register_verify

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='bolza',
        description="Solve and verify Bolza problems with second-order differential inequalities.")
    subparsers = parser.add_subparsers(dest='command', required=True)
    register_solve(subparsers)
    register_verify(subparsers)
    register_converge(subparsers)
    register_example51(subparsers)
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logger.debug(f"Running command {args.command}.")
    return args.func(args)
