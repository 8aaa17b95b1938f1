"""Shared helpers for vintage-sparse-pca.

Logging:
  - setup_logging: Install console (stderr) and optional file handlers
  - set_log_level: Change the package logger's level by name

Reproducibility:
  - make_rng: Build the seeded Philox generator used for every random draw
  - get_thread_count: Worker cap taken from the VSP_THREADS environment variable

Filesystem:
  - ensure_directory: Create an output directory if needed

Type Aliases:
  - PathLike: str | Path
  - LogLevel: Names accepted by set_log_level

All modules log through ``logger`` (name ``vintage_sparse_pca``).
"""

import logging
import os
import sys
from pathlib import Path
from typing import Literal, TypeAlias

import numpy as np

from .exceptions import ConfigurationError

PathLike: TypeAlias = str | Path
LogLevel: TypeAlias = Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]

THREADS_ENV_VAR = "VSP_THREADS"

CONSOLE_FORMAT = "%(levelname)s: %(message)s"
FILE_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"

logger = logging.getLogger("vintage_sparse_pca")


def setup_logging(log_file: PathLike | None = None, verbose: bool = False) -> None:
    """Route package log records to stderr and, optionally, a file.

    Previous handlers are dropped, so calling this twice does not duplicate output.
    Standard output is left to tables and reports.

    Args:
    ----
        log_file: Also append records to this file when given.
        verbose: Emit DEBUG records (per-iteration SVD and Varimax progress).

    Examples:
    --------
        >>> setup_logging(verbose=True)
        >>> setup_logging("/tmp/vsp.log")

    """
    level = logging.DEBUG if verbose else logging.INFO
    logger.setLevel(level)
    for stale in list(logger.handlers):
        logger.removeHandler(stale)

    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    handlers[0].setFormatter(logging.Formatter(CONSOLE_FORMAT))
    if log_file:
        to_file = logging.FileHandler(log_file)
        to_file.setFormatter(logging.Formatter(FILE_FORMAT))
        handlers.append(to_file)

    for handler in handlers:
        handler.setLevel(level)
        logger.addHandler(handler)


def set_log_level(level: LogLevel) -> None:
    """Change the package logger's level; unknown names are logged and ignored."""
    numeric = logging.getLevelName(level)
    if isinstance(numeric, int):
        logger.setLevel(numeric)
    else:
        logger.warning(f"Unknown log level: {level}")


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Build the generator used for every random draw in the package.

    The bit generator is Philox-4x64, a counter-based generator whose output for a
    given key is identical on every platform. The key is derived from
    ``SeedSequence([seed, stream])`` so that independent streams of one seed never
    overlap.

    Args:
    ----
        seed: Non-negative 64-bit seed.
        stream: Stream index for independent draws under the same seed.

    Returns:
    -------
        A numpy Generator over Philox.

    Examples:
    --------
        >>> rng = make_rng(7)
        >>> omega = rng.standard_normal((5, 3))

    """
    if seed < 0 or stream < 0:
        raise ConfigurationError(
            "seed and stream must be non-negative", {"seed": seed, "stream": stream}
        )
    sequence = np.random.SeedSequence([int(seed), int(stream)])
    return np.random.Generator(np.random.Philox(sequence))


def get_thread_count() -> int:
    """Return the worker cap from VSP_THREADS, defaulting to the CPU count.

    Returns:
    -------
        A positive number of worker threads.

    """
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            logger.warning(f"Ignoring non-integer {THREADS_ENV_VAR}={raw!r}")
        else:
            if value >= 1:
                return value
            logger.warning(f"Ignoring non-positive {THREADS_ENV_VAR}={raw!r}")
    return os.cpu_count() or 1


def ensure_directory(path: PathLike) -> Path:
    """Create a directory (and parents) if it does not exist.

    Args:
    ----
        path: Directory to create.

    Returns:
    -------
        The directory as a Path.

    """
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    return directory
