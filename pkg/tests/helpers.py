"""Helpers shared by several test modules."""

from pathlib import Path

import numpy as np

BLOCK_B = np.array([[0.8, 0.1, 0.1], [0.1, 0.6, 0.1], [0.1, 0.1, 0.5]])


def block_membership(n: int, k: int = 3) -> np.ndarray:
    """One-hot memberships with nodes assigned to blocks in round-robin order."""
    z = np.zeros((n, k))
    z[np.arange(n), np.arange(n) % k] = 1.0
    return z


def write_text(path: Path, text: str) -> Path:
    """Write ``text`` to ``path`` and return the path."""
    path.write_text(text, encoding="utf-8")
    return path


def kurtosis_standard_error(x: np.ndarray) -> float:
    """Asymptotic standard error of the sample kurtosis, from its influence function."""
    c = x - x.mean()
    m2, m3, m4 = np.mean(c**2), np.mean(c**3), np.mean(c**4)
    influence = (c**4 - m4 - 4.0 * m3 * c) / m2**2 - 2.0 * m4 * (c**2 - m2) / m2**3
    return float(influence.std() / np.sqrt(x.size))
