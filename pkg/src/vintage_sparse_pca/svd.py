"""Seeded randomized truncated SVD of implicit operators.

The decomposition only touches the operator through block products with its
forward and adjoint maps, so centered and scaled sparse inputs are never
densified. A small dense oracle is provided for tests.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from .exceptions import ConfigurationError, NumericalError, SizeGuardError, ValidationError
from .utils import logger, make_rng

ORACLE_GUARD = 500
COLLAPSE_RATIO = 1e-10
ORTHONORMAL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SvdResult:
    """Leading singular triplets: ``u`` is n x k, ``v`` is d x k."""

    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        k = self.singular_values.shape[0]
        if self.u.shape[1] != k or self.v.shape[1] != k:
            raise ValidationError(
                f"singular vectors must have {k} columns",
                {"u": self.u.shape, "v": self.v.shape},
            )
        s = self.singular_values
        if np.any(s < 0) or np.any(np.diff(s) > 0):
            raise ValidationError("singular values must be nonnegative and nonincreasing")
        for name, block in (("u", self.u), ("v", self.v)):
            gram = block.T @ block
            if np.max(np.abs(gram - np.eye(k)), initial=0.0) > ORTHONORMAL_TOL:
                raise NumericalError(f"{name} lost orthonormality")

    @property
    def k(self) -> int:
        return int(self.singular_values.shape[0])

    def reconstruct(self) -> np.ndarray:
        """Dense ``U diag(s) V^T``."""
        return (self.u * self.singular_values) @ self.v.T


def _orthonormalize(block: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Modified Gram-Schmidt with one re-pass.

    A column that collapses below ``COLLAPSE_RATIO`` of its original norm lies in
    the span of the previous columns and is replaced by a fresh random direction.
    """
    q = np.array(block, dtype=np.float64, copy=True)
    m, width = q.shape
    for j in range(width):
        v = q[:, j]
        original = float(np.linalg.norm(v))
        for _ in range(2):
            for i in range(j):
                v -= (q[:, i] @ v) * q[:, i]
        norm = float(np.linalg.norm(v))
        while norm <= max(COLLAPSE_RATIO * original, np.finfo(np.float64).tiny):
            logger.debug(f"Replacing collapsed basis column {j}")
            v = rng.standard_normal(m)
            original = float(np.linalg.norm(v))
            for _ in range(2):
                for i in range(j):
                    v -= (q[:, i] @ v) * q[:, i]
            norm = float(np.linalg.norm(v))
        q[:, j] = v / norm
    return q


def truncated_svd(
    op: LinearOperator | np.ndarray,
    k: int,
    seed: int,
    oversample: int = 10,
    power_iters: int = 5,
) -> SvdResult:
    """Compute the top-k singular triplets by randomized subspace iteration.

    A ``d x (k + oversample)`` standard-normal test matrix is drawn from the seeded
    Philox generator, pushed through ``power_iters`` forward/adjoint round trips
    with re-orthonormalization after every half-step, and the final subspace is
    resolved by Rayleigh-Ritz.

    Args:
        op: Operator (or dense array) to decompose
        k: Number of triplets, ``1 <= k <= min(n, d)``
        seed: Seed of the test matrix
        oversample: Extra subspace columns beyond k
        power_iters: Number of forward/adjoint round trips

    Returns:
        The leading k triplets

    Raises:
        ConfigurationError: If k or the iteration parameters are out of range
        ValidationError: If the operator has a zero dimension

    """
    op = aslinearoperator(op)
    n, d = op.shape
    if n == 0 or d == 0:
        raise ValidationError(f"cannot decompose an operator of shape {n}x{d}")
    if not 1 <= k <= min(n, d):
        raise ConfigurationError(
            f"k must satisfy 1 <= k <= min(n, d) = {min(n, d)}, got {k}", {"k": k}
        )
    if oversample < 0 or power_iters < 0:
        raise ConfigurationError("oversample and power_iters must be non-negative")

    width = min(k + oversample, min(n, d))
    rng = make_rng(seed)
    omega = rng.standard_normal((d, width))
    logger.debug(f"Randomized SVD: {n}x{d}, k={k}, subspace width {width}, {power_iters} passes")

    q = _orthonormalize(op.matmat(omega), rng)
    for _ in range(power_iters):
        w = _orthonormalize(op.rmatmat(q), rng)
        q = _orthonormalize(op.matmat(w), rng)

    projected = np.asarray(op.rmatmat(q)).T
    ub, s, vt = scipy.linalg.svd(projected, full_matrices=False, lapack_driver="gesvd")
    u = q @ ub[:, :k]
    return SvdResult(u=u, singular_values=s[:k].copy(), v=vt[:k].T.copy())


def dense_svd_oracle(m: np.ndarray) -> SvdResult:
    """Full thin SVD of a small dense matrix by Golub-Kahan bidiagonalization.

    Raises:
        SizeGuardError: If the smaller dimension exceeds 500

    """
    m = np.asarray(m, dtype=np.float64)
    if min(m.shape) > ORACLE_GUARD:
        raise SizeGuardError("dense_svd_oracle", min(m.shape), ORACLE_GUARD)
    u, s, vt = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
    return SvdResult(u=u, singular_values=s, v=vt.T)
