import json
import logging
import os
from typing import Any, Optional

from pydantic import ValidationError

from app.errors import ConfigError
from app.models.run_config import RunConfig

logger = logging.getLogger(__name__)

WORKERS_ENV_VAR = "MORPHTEST_WORKERS"


def get_worker_count(cli_value: Optional[int] = None, default: int = 1) -> int:
    """
    Resolves the number of worker slots for subject execution.

    The command-line value wins; otherwise the MORPHTEST_WORKERS environment
    variable is used; otherwise the default.

    Raises:
        ConfigError: If the resolved value is not a positive integer.

    Returns:
        int: The worker count.
    """
    if cli_value is not None:
        if cli_value < 1:
            raise ConfigError(f"--workers must be positive, got {cli_value}")
        return cli_value

    raw = os.getenv(WORKERS_ENV_VAR)
    if raw is None or raw.strip() == "":
        return default
    try:
        workers = int(raw)
    except ValueError:
        logger.error(f"{WORKERS_ENV_VAR} is not an integer: {raw!r}")
        raise ConfigError(f"Error: {WORKERS_ENV_VAR} must be a positive integer, got {raw!r}")
    if workers < 1:
        logger.error(f"{WORKERS_ENV_VAR} must be positive: {workers}")
        raise ConfigError(f"Error: {WORKERS_ENV_VAR} must be a positive integer, got {workers}")
    logger.info(f"Using {workers} workers from {WORKERS_ENV_VAR}.")
    return workers


def parse_run_config(data: Any) -> RunConfig:
    """
    Validates a decoded run-configuration document.

    Raises:
        ConfigError: If the document does not match the schema.
    """
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        details = "; ".join(
            f"{'.'.join(str(part) for part in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
        )
        logger.error(f"Run configuration is invalid: {details}")
        raise ConfigError(f"Invalid run configuration: {details}") from e


def load_run_config(path: str) -> RunConfig:
    """
    Reads and validates the run-configuration file at path.

    Raises:
        ConfigError: If the file is missing, is not JSON, or does not validate.

    Returns:
        RunConfig: The validated configuration.
    """
    if not os.path.isfile(path):
        logger.error(f"Run configuration file not found at path: {path}")
        raise ConfigError(f"Error: run configuration file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except json.JSONDecodeError as e:
        logger.error(f"Run configuration {path} is not valid JSON: {e}")
        raise ConfigError(f"Error: {path} is not valid JSON: {e}") from e
    logger.info(f"Run configuration loaded from {path}")
    return parse_run_config(data)
