#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Logging
Loguru sinks for the simulator. Console output always goes to stderr so that
stdout carries only command results.
"""

import os
import sys
import time
from fractions import Fraction
from functools import wraps
from pathlib import Path

from loguru import logger


class LogConfig:
    """Sink formats and file policy"""

    CONSOLE_FORMAT = (
        "<green>{time:HH:mm:ss.SSS}</green> | "
        "<level>{level: <8}</level> | "
        "<cyan>{name}</cyan>:<cyan>{line}</cyan> - "
        "<level>{message}</level>"
    )
    FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {process} | {name}:{function}:{line} - {message}"
    ROTATION = "50 MB"
    RETENTION = "14 days"


def setup_logging(level=None, log_dir=None):
    """Install the console sink and, with log_dir, rotating file sinks"""
    level = (level or os.getenv("LOG_LEVEL", "WARNING")).upper()

    logger.remove()
    logger.add(sys.stderr, format=LogConfig.CONSOLE_FORMAT, level=level, colorize=True)

    if log_dir:
        directory = Path(log_dir)
        directory.mkdir(parents=True, exist_ok=True)
        logger.add(
            directory / "simulator.log",
            format=LogConfig.FILE_FORMAT,
            level="DEBUG",
            rotation=LogConfig.ROTATION,
            retention=LogConfig.RETENTION,
            enqueue=True,
        )
        # timings only
        logger.add(
            directory / "timings.log",
            format=LogConfig.FILE_FORMAT,
            level="DEBUG",
            rotation=LogConfig.ROTATION,
            retention=LogConfig.RETENTION,
            filter=lambda record: "elapsed_ms" in record["extra"],
            enqueue=True,
        )

    logger.debug(f"Logging at {level}" + (f", files in {log_dir}" if log_dir else ""))


def _fmt(value):
    if isinstance(value, Fraction):
        return str(float(value)) if value.denominator != 1 else str(value.numerator)
    return str(value)


def _pairs(context):
    return " ".join(f"{key}={_fmt(context[key])}" for key in sorted(context))


def log_performance(threshold_ms=1000):
    """Log the wrapped call's wall time; warn above threshold_ms"""

    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            try:
                return func(*args, **kwargs)
            finally:
                elapsed_ms = (time.perf_counter() - start) * 1000
                timed = logger.bind(elapsed_ms=round(elapsed_ms, 1))
                if elapsed_ms > threshold_ms:
                    timed.warning(f"{func.__name__} took {elapsed_ms:.1f}ms (threshold {threshold_ms}ms)")
                else:
                    timed.debug(f"{func.__name__} took {elapsed_ms:.1f}ms")

        return wrapper

    return decorator


class OperationLogger:
    """Scope that logs the start, outcome and duration of one operation"""

    def __init__(self, operation_name, **context):
        self.operation_name = operation_name
        self.context = context
        self.start_time = None

    def __enter__(self):
        self.start_time = time.perf_counter()
        suffix = f" | {_pairs(self.context)}" if self.context else ""
        logger.info(f"{self.operation_name} started{suffix}")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        elapsed_ms = (time.perf_counter() - self.start_time) * 1000
        timed = logger.bind(elapsed_ms=round(elapsed_ms, 1))
        if exc_type:
            timed.error(f"{self.operation_name} failed after {elapsed_ms:.1f}ms: {exc_val}")
        else:
            timed.info(f"{self.operation_name} done in {elapsed_ms:.1f}ms")
        return False


class StructuredLogger:
    """Event message followed by sorted key=value pairs"""

    @staticmethod
    def info(message, **context):
        logger.opt(depth=1).info(f"{message} | {_pairs(context)}")

    @staticmethod
    def warning(message, **context):
        logger.opt(depth=1).warning(f"{message} | {_pairs(context)}")
