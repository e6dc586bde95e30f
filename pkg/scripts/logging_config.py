"""Centralized logging configuration for the contact solver scripts.

Import and call `setup_logging()` early in the entry point to configure
all loggers with a consistent format. Individual modules should use:
    import logging
    logger = logging.getLogger(__name__)
"""

import logging
import os
import sys
from datetime import datetime

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def setup_logging(level: int = logging.INFO, log_file: str = None) -> None:
    """Configure root logger with console and optional file handlers.

    Args:
        level: Logging level (default: INFO).
        log_file: Optional path to a log file.
    """
    handlers: list = [logging.StreamHandler(sys.stdout)]
    if log_file:
        os.makedirs(os.path.dirname(log_file) or ".", exist_ok=True)
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))

    # force=True replaces handlers from an earlier call instead of stacking them
    logging.basicConfig(
        level=level,
        format=LOG_FORMAT,
        datefmt=DATE_FORMAT,
        handlers=handlers,
        force=True,
    )


def default_log_file(entry: str, log_dir: str = "logs") -> str:
    """logs/<entry>_<YYYYmmdd_HHMMSS>.log"""
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    return os.path.join(log_dir, f"{entry}_{timestamp}.log")


def get_benchmark_logger(name: str = "suite", log_dir: str = "logs") -> logging.Logger:
    """Get a logger with its own timestamped file, for suite runs.

    Args:
        name: Logger name, also the log file prefix (default: "suite")
        log_dir: Directory for log files (default: "logs")

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)

    # 避免重复添加handler
    if not logger.handlers:
        os.makedirs(log_dir, exist_ok=True)
        log_file = default_log_file(name, log_dir)

        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setLevel(logging.INFO)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT))

        logger.addHandler(file_handler)
        logger.setLevel(logging.INFO)

        logger.info("=" * 60)
        logger.info("Benchmark日志: %s", log_file)
        logger.info("=" * 60)

    return logger


def log_benchmark_row(logger: logging.Logger, row) -> None:
    """Write the fixed-format [Result] line that analyze_logs.py parses back.

    Args:
        logger: Target logger
        row: A BenchmarkRow or a dict with the same keys
    """
    rec = row if isinstance(row, dict) else row.to_record()
    logger.info(
        "[Result] model=%s method=%s NIT=%d r_rel=%.3e converged=%s setup=%.3fs solve=%.3fs",
        rec["model"], rec["method"], int(rec["NIT"]), float(rec["r_rel"]),
        bool(rec["converged"]), float(rec["setup_time"]), float(rec["solve_time"]),
    )
    if rec.get("error"):
        logger.warning("[Result] model=%s method=%s error=%s", rec["model"], rec["method"], rec["error"])
