"""Logging configuration for hubforge."""

import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from platformdirs import user_log_dir

APP_NAME = "hubforge"
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
MAX_LOG_BYTES = 5 * 1024 * 1024
LOG_BACKUPS = 3


def resolve_log_level(name, default=logging.INFO) -> int:
    """Numeric level for a name such as ``debug`` or ``WARNING``, or a number.

    Unknown names fall back to ``default``.
    """
    if name is None or not str(name).strip():
        return default
    text = str(name).strip()
    if text.isdigit():
        return int(text)
    level = logging.getLevelName(text.upper())
    return level if isinstance(level, int) else default


def setup_logging(level=logging.INFO, log_file=None):
    """Route hubforge logs to a rotating file and warnings to stderr.

    Solver progress is logged at DEBUG, so the file only gets per-node and
    per-pivot detail when ``level`` asks for it. Python warnings raised by
    numpy or scipy are captured into the same handlers.

    Returns:
        Path: The log file in use.
    """
    if log_file is None:
        log_dir = Path(user_log_dir(APP_NAME, APP_NAME))
        log_dir.mkdir(parents=True, exist_ok=True)
        log_file = log_dir / "hubforge.log"
    log_file = Path(log_file)

    formatter = logging.Formatter(LOG_FORMAT)

    root_logger = logging.getLogger()
    root_logger.setLevel(level)

    # Remove existing handlers to avoid duplication
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)
        handler.close()

    file_handler = RotatingFileHandler(log_file, maxBytes=MAX_LOG_BYTES,
                                       backupCount=LOG_BACKUPS, encoding='utf-8')
    file_handler.setLevel(level)
    file_handler.setFormatter(formatter)
    root_logger.addHandler(file_handler)

    # stdout carries reports and CSV output
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(max(level, logging.WARNING))
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    logging.captureWarnings(True)
    return log_file
