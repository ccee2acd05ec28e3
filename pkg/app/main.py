import logging
import sys

from app.cli.main import run
from app.constants import EXIT_SOLVER_FAIL
from app.env import get_env_settings


def configure_logging():
    env = get_env_settings()
    if logging.getLogger().hasHandlers():
        # An embedding process configured logging already.
        logging.getLogger().setLevel(env.log_level.upper())
    else:
        logging.basicConfig(level=env.log_level.upper())


def main(argv: list[str] | None = None) -> int:
    configure_logging()
    logger = logging.getLogger()
    try:
        return run(argv)
    except Exception:
        logger.error("Unexpected failure.", exc_info=True)
        return EXIT_SOLVER_FAIL


if __name__ == '__main__':
    sys.exit(main())
