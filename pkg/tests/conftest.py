"""Shared fixtures for the vintage-sparse-pca tests."""

import os
from collections.abc import Generator

import numpy as np
import pytest
from vintage_sparse_pca.sparse_core import SparseMatrix
from vintage_sparse_pca.utils import THREADS_ENV_VAR, logger

from tests.helpers import BLOCK_B, block_membership


@pytest.fixture()
def reset_logger() -> Generator[None, None, None]:
    """Reset the logger between tests."""
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)
    yield
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)


@pytest.fixture(autouse=True)
def pinned_threads(monkeypatch: pytest.MonkeyPatch) -> None:
    """Pin the worker cap so outputs do not depend on the machine."""
    if THREADS_ENV_VAR not in os.environ:
        monkeypatch.setenv(THREADS_ENV_VAR, "2")


@pytest.fixture()
def small_matrix() -> SparseMatrix:
    """The 2x2 matrix [[1, 2], [3, 5]]."""
    return SparseMatrix.from_dense(np.array([[1.0, 2.0], [3.0, 5.0]]))


@pytest.fixture()
def random_sparse() -> tuple[SparseMatrix, np.ndarray]:
    """A random 50x40 sparse matrix with about 20% stored entries, and its dense copy."""
    rng = np.random.default_rng(7)
    dense = rng.standard_normal((50, 40)) * (rng.random((50, 40)) < 0.2)
    return SparseMatrix.from_dense(dense), dense


@pytest.fixture()
def noiseless_blocks() -> tuple[SparseMatrix, np.ndarray]:
    """Noiseless 3-block matrix ``Z B Z^T`` on 300 nodes with its membership matrix."""
    z = block_membership(300)
    return SparseMatrix.from_dense(z @ BLOCK_B @ z.T), z
