import logging

from functools import lru_cache
from pydantic_settings import BaseSettings, SettingsConfigDict

logger = logging.getLogger(__name__)


class EnvSettings(BaseSettings):
    # Default values for environment variables.
    # Only ambient concerns live here. Anything that changes a numerical
    # result comes from the problem file or the command line.
    log_level: str = 'warning'  # [debug|info|warning|error|critical]
    max_workers: int = 4
    emit_svg: bool = False

    # Settings are obtained in order of preference from the following sources:
    # 1. Environment variables.
    # 2. .env file.
    # 3. Default values.
    # Making the settings frozen means they are hashable.
    model_config = SettingsConfigDict(env_file=".env", frozen=True)


@lru_cache
def get_env_settings():
    # A cached function keeping settings in memory.
    env_settings = EnvSettings()
    logger.info(f"Environment settings: {env_settings}")
    return env_settings
