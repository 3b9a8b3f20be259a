"""
Logging utility for the big-bang regularization toolkit
Provides configurable logging with thread-safe implementation.

Console output goes to stderr so that JSON and CSV written to stdout by
the command line stay machine-readable.
"""

import os
import sys
import logging
import threading
from typing import Optional
from logging.handlers import RotatingFileHandler

from config.config_manager import config_manager, PROJECT_ROOT


CONSOLE_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
FILE_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'


class LoggerManager:
    """Thread-safe logger manager for library modules and the command line."""

    _loggers = {}
    _lock = threading.Lock()
    _level: Optional[int] = None

    @classmethod
    def _resolve_settings(cls):
        log_config = config_manager.get_logging_config()
        level = cls._level
        if level is None:
            level = getattr(logging, log_config['log_level'].upper(), logging.INFO)
        log_file = log_config['log_file']
        if log_file and not os.path.isabs(log_file):
            log_file = os.path.join(PROJECT_ROOT, log_file)
        return level, log_file

    @classmethod
    def get_logger(cls, name: str) -> logging.Logger:
        """Get or create a logger instance."""
        if name not in cls._loggers:
            with cls._lock:
                if name not in cls._loggers:
                    level, log_file = cls._resolve_settings()
                    logger = logging.getLogger(name)
                    logger.setLevel(level)

                    # Remove existing handlers to avoid duplicates
                    for handler in logger.handlers[:]:
                        logger.removeHandler(handler)

                    console_handler = logging.StreamHandler(sys.stderr)
                    console_handler.setLevel(level)
                    console_handler.setFormatter(logging.Formatter(CONSOLE_FORMAT, datefmt=DATE_FORMAT))
                    logger.addHandler(console_handler)

                    if log_file:
                        try:
                            os.makedirs(os.path.dirname(log_file), exist_ok=True)
                            file_handler = RotatingFileHandler(
                                log_file,
                                maxBytes=10*1024*1024,  # 10MB
                                backupCount=5
                            )
                        except OSError as e:
                            logger.warning(f"File logging disabled: {e}")
                        else:
                            file_handler.setLevel(level)
                            file_handler.setFormatter(logging.Formatter(FILE_FORMAT, datefmt=DATE_FORMAT))
                            logger.addHandler(file_handler)

                    # Let pytest's live logging capture records through the root logger
                    logger.propagate = True

                    cls._loggers[name] = logger

        return cls._loggers[name]

    @classmethod
    def set_level(cls, level: int) -> None:
        """Override the configured level for every logger, existing and future."""
        with cls._lock:
            cls._level = level
            for logger in cls._loggers.values():
                logger.setLevel(level)
                for handler in logger.handlers:
                    handler.setLevel(level)


def get_logger(name: str) -> logging.Logger:
    """Convenience function to get a logger instance."""
    return LoggerManager.get_logger(name)
