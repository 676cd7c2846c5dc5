"""Log handler setup for the balanced_lab package."""

import logging
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler

from .config import RunConfig

PACKAGE_LOGGER = "balanced_lab"
FILE_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(config: RunConfig, console: Optional[Console] = None) -> logging.Logger:
    """Route package logs to stderr through rich, plus ``config.log_file`` if set.

    Calling it again replaces the handlers installed by the previous call.
    """
    logger = logging.getLogger(PACKAGE_LOGGER)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()
    logger.setLevel(config.log_level)
    logger.propagate = False

    logger.addHandler(
        RichHandler(
            console=console or Console(stderr=True),
            show_path=False,
            rich_tracebacks=False,
            markup=False,
        )
    )
    if config.log_file:
        file_handler = logging.FileHandler(config.log_file, encoding="utf-8")
        file_handler.setFormatter(logging.Formatter(FILE_FORMAT))
        logger.addHandler(file_handler)
    return logger
