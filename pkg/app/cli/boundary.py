import functools
import logging

from app.exceptions import BolzaError

logger = logging.getLogger(__name__)


def command_boundary(fn):
    """Map a BolzaError escaping a command to its exit code."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs) -> int:
        try:
            return fn(*args, **kwargs)
        except BolzaError as e:
            logger.error(f"{fn.__name__} failed: {e}", exc_info=logger.isEnabledFor(logging.DEBUG))
            return e.exit_code
    return wrapper
