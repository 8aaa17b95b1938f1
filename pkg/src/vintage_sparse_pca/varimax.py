"""Varimax rotation and the signed-permutation group.

The solver maximizes the raw Varimax criterion

    v(R, U) = sum_l [ mean_i (UR)_il^4 - (mean_i (UR)_il^2)^2 ]

over orthogonal R by cyclic sweeps of planar rotations. For each column pair the
in-plane angle is available in closed form, so every rotation is an exact
maximization along its plane and the objective never decreases across sweeps.

Type Definitions:
  - RotationMatrix: Validated k x k orthogonal matrix with its sweep history
  - SignedPermutation: Column reordering with sign flips

Operations:
  - varimax_objective: Evaluate the criterion
  - solve_varimax: Maximize the criterion
  - apply_sign_convention: Make the third central moment of every column nonnegative
  - order_factor_columns: Order columns by decreasing sum of fourth powers
  - canonical_form: Ordering and sign rule combined into one signed permutation
  - enumerate_signed_permutations: Every element of the group for small k
"""

import itertools
import math
from collections.abc import Iterator
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import ConfigurationError, DimensionMismatchError, SizeGuardError, ValidationError
from .utils import logger, make_rng

ENUMERATION_GUARD = 8
RESTART_STREAM = 2
ORTHOGONALITY_TOL = 1e-10
DETERMINANT_TOL = 1e-8
SKEW_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class RotationMatrix:
    """Orthogonal k x k matrix, plus the objective recorded after each sweep."""

    r: np.ndarray
    objective_history: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        r = np.asarray(self.r, dtype=np.float64)
        object.__setattr__(self, "r", r)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ValidationError(f"rotation must be square, got shape {r.shape}")
        k = r.shape[0]
        if np.max(np.abs(r.T @ r - np.eye(k))) > ORTHOGONALITY_TOL:
            raise ValidationError("rotation is not orthogonal")
        if abs(abs(float(np.linalg.det(r))) - 1.0) > DETERMINANT_TOL:
            raise ValidationError("rotation determinant is not +-1")

    @property
    def k(self) -> int:
        return int(self.r.shape[0])

    @property
    def objective(self) -> float:
        """Last recorded objective, NaN when no history was kept."""
        return self.objective_history[-1] if self.objective_history else math.nan


@dataclass(frozen=True)
class SignedPermutation:
    """Element of the signed-permutation group.

    The induced matrix has ``P[perm[j], j] = signs[j]``, so ``M @ P`` moves column
    ``perm[j]`` of ``M`` to position ``j`` and multiplies it by ``signs[j]``.
    """

    perm: tuple[int, ...]
    signs: tuple[int, ...]

    def __post_init__(self) -> None:
        perm = tuple(int(p) for p in self.perm)
        signs = tuple(int(s) for s in self.signs)
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "signs", signs)
        if sorted(perm) != list(range(len(perm))):
            raise ValidationError(f"{perm} is not a permutation")
        if len(signs) != len(perm) or any(s not in (-1, 1) for s in signs):
            raise ValidationError("signs must be one of -1/+1 per column")

    @classmethod
    def identity(cls, k: int) -> "SignedPermutation":
        return cls(tuple(range(k)), (1,) * k)

    @property
    def k(self) -> int:
        return len(self.perm)

    @property
    def matrix(self) -> np.ndarray:
        p = np.zeros((self.k, self.k))
        p[list(self.perm), list(range(self.k))] = self.signs
        return p

    def apply(self, m: np.ndarray) -> np.ndarray:
        """Return ``m @ P`` without forming P."""
        return np.asarray(m)[:, list(self.perm)] * np.asarray(self.signs, dtype=np.float64)

    def apply_vector(self, v: np.ndarray) -> np.ndarray:
        """Return ``v @ P`` for a row vector."""
        return np.asarray(v)[list(self.perm)] * np.asarray(self.signs, dtype=np.float64)

    def to_dict(self) -> dict[str, list[int]]:
        return {"perm": list(self.perm), "signs": list(self.signs)}


def _as_array(r: RotationMatrix | np.ndarray) -> np.ndarray:
    return r.r if isinstance(r, RotationMatrix) else np.asarray(r, dtype=np.float64)


def _criterion(loadings: np.ndarray) -> float:
    squared = loadings * loadings
    return float(np.sum(np.mean(squared * squared, axis=0) - np.mean(squared, axis=0) ** 2))


def varimax_objective(r: RotationMatrix | np.ndarray, u: np.ndarray) -> float:
    """Evaluate the Varimax criterion of ``u @ r``.

    Both terms are always computed, even when the second is constant because the
    columns of ``u`` are orthonormal.
    """
    rot = _as_array(r)
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 2 or u.shape[1] != rot.shape[0]:
        raise DimensionMismatchError("varimax input columns", rot.shape[0], u.shape)
    return _criterion(u @ rot)


def random_orthogonal(k: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix from the QR factorization of a Gaussian draw."""
    q, r = scipy.linalg.qr(rng.standard_normal((k, k)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def _ascend(
    loadings: np.ndarray, start: np.ndarray, tol: float, max_sweeps: int
) -> tuple[np.ndarray, list[float]]:
    n, k = loadings.shape
    rot = start.copy()
    current = loadings @ rot
    history = [_criterion(current)]
    for sweep in range(max_sweeps):
        previous_rot = rot.copy()
        previous_loadings = current.copy()
        for p in range(k - 1):
            for q in range(p + 1, k):
                x = current[:, p].copy()
                y = current[:, q].copy()
                diff = x * x - y * y
                cross = 2.0 * x * y
                sum_diff = diff.sum()
                sum_cross = cross.sum()
                numerator = 2.0 * np.dot(diff, cross) - 2.0 * sum_diff * sum_cross / n
                denominator = (
                    np.dot(diff, diff)
                    - np.dot(cross, cross)
                    - (sum_diff * sum_diff - sum_cross * sum_cross) / n
                )
                theta = math.atan2(numerator, denominator) / 4.0
                c, s = math.cos(theta), math.sin(theta)
                current[:, p] = c * x + s * y
                current[:, q] = -s * x + c * y
                rp = rot[:, p].copy()
                rq = rot[:, q].copy()
                rot[:, p] = c * rp + s * rq
                rot[:, q] = -s * rp + c * rq

        old = history[-1]
        new = _criterion(current)
        if new < old:
            # Rounding pushed the sweep downhill; keep the previous iterate.
            rot, current = previous_rot, previous_loadings
            logger.debug(f"Varimax sweep {sweep + 1} lost {old - new:.3e}; stopping")
            break
        history.append(new)
        if new - old < tol * max(abs(old), np.finfo(np.float64).tiny):
            logger.debug(f"Varimax converged after {sweep + 1} sweeps, objective {new:.12g}")
            break
    else:
        logger.debug(f"Varimax stopped at max_sweeps={max_sweeps}")
    return rot, history


def solve_varimax(
    u: np.ndarray,
    tol: float = 1e-10,
    max_sweeps: int = 100,
    restarts: int = 1,
    seed: int = 0,
    kaiser_normalize: bool = False,
) -> RotationMatrix:
    """Find the orthogonal matrix maximizing the Varimax criterion of ``u``.

    The first start is the identity; each further restart begins at a random
    orthogonal matrix drawn from a dedicated stream of ``seed``. The best final
    objective wins, ties going to the earliest start.

    Args:
        u: n x k loading matrix with ``n >= k >= 1``
        tol: Relative objective increase below which a sweep counts as converged
        max_sweeps: Upper bound on sweeps per start
        restarts: Number of starts
        seed: Seed of the random starts
        kaiser_normalize: Divide rows by their l2 norms before solving

    Returns:
        The rotation and the objective after each sweep of the winning start

    Raises:
        ValidationError: On non-finite input
        DimensionMismatchError: If ``u`` is not n x k with ``n >= k >= 1``
        ConfigurationError: If ``restarts`` or ``max_sweeps`` is below 1

    """
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 2 or u.shape[1] < 1 or u.shape[0] < u.shape[1]:
        raise DimensionMismatchError("varimax input", "n x k with n >= k >= 1", u.shape)
    if not np.all(np.isfinite(u)):
        raise ValidationError("varimax input contains non-finite values")
    if restarts < 1 or max_sweeps < 1:
        raise ConfigurationError("restarts and max_sweeps must be at least 1")

    loadings = u
    if kaiser_normalize:
        norms = np.linalg.norm(u, axis=1)
        norms[norms == 0] = 1.0
        loadings = u / norms[:, np.newaxis]

    k = u.shape[1]
    if k == 1:
        return RotationMatrix(np.ones((1, 1)), (_criterion(loadings),))

    rng = make_rng(seed, RESTART_STREAM)
    starts = [np.eye(k)] + [random_orthogonal(k, rng) for _ in range(restarts - 1)]
    best: tuple[np.ndarray, list[float]] | None = None
    for index, start in enumerate(starts):
        rot, history = _ascend(loadings, start, tol, max_sweeps)
        logger.debug(f"Varimax start {index}: objective {history[-1]:.12g}")
        if best is None or history[-1] > best[1][-1]:
            best = (rot, history)
    assert best is not None
    return RotationMatrix(best[0], tuple(best[1]))


def apply_sign_convention(factors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Negate every column whose third central sample moment is negative.

    Columns with zero skew keep their sign. Applying the rule twice is the same
    as applying it once.

    Returns:
        The sign-fixed factors and the applied signs

    """
    factors = np.asarray(factors, dtype=np.float64)
    centered = factors - factors.mean(axis=0)
    m2 = np.mean(centered**2, axis=0)
    m3 = np.mean(centered**3, axis=0)
    signs = np.where(m3 < -SKEW_TOL * m2**1.5, -1.0, 1.0)
    return factors * signs, signs


def order_factor_columns(factors: np.ndarray) -> np.ndarray:
    """Column order by decreasing sum of fourth powers (stable for ties)."""
    fourth = np.sum(np.asarray(factors, dtype=np.float64) ** 4, axis=0)
    return np.argsort(-fourth, kind="stable")


def canonical_form(factors: np.ndarray) -> SignedPermutation:
    """Signed permutation that orders the columns and then applies the sign rule."""
    order = order_factor_columns(factors)
    _, signs = apply_sign_convention(np.asarray(factors)[:, order])
    return SignedPermutation(tuple(order.tolist()), tuple(int(s) for s in signs))


def iter_signed_permutations(k: int) -> Iterator[SignedPermutation]:
    """Yield every signed permutation, permutations outer and signs inner.

    The identity comes first, which makes it win ties in any search that keeps the
    first minimum.
    """
    for perm in itertools.permutations(range(k)):
        for signs in itertools.product((1, -1), repeat=k):
            yield SignedPermutation(perm, signs)


def enumerate_signed_permutations(k: int) -> list[SignedPermutation]:
    """All ``2^k k!`` signed permutations of size k.

    Raises:
        ConfigurationError: If k < 1
        SizeGuardError: If k > 8

    """
    if k < 1:
        raise ConfigurationError(f"k must be at least 1, got {k}")
    if k > ENUMERATION_GUARD:
        raise SizeGuardError("enumerate_signed_permutations", k, ENUMERATION_GUARD)
    return list(iter_signed_permutations(k))


def compose_rotation(rotation: RotationMatrix, p: SignedPermutation) -> RotationMatrix:
    """Return the rotation ``R @ P``; the objective history carries over unchanged."""
    return RotationMatrix(p.apply(rotation.r), rotation.objective_history)


def signed_permutation_distance(a: np.ndarray, b: np.ndarray) -> tuple[float, SignedPermutation]:
    """Smallest ``||a - b P||_F`` over the group, by exhaustive search (k <= 8)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    best: tuple[float, SignedPermutation] | None = None
    k = a.shape[1]
    if k > ENUMERATION_GUARD:
        raise SizeGuardError("signed_permutation_distance", k, ENUMERATION_GUARD)
    for p in iter_signed_permutations(k):
        distance = float(np.linalg.norm(a - p.apply(b)))
        if best is None or distance < best[0]:
            best = (distance, p)
    assert best is not None
    return best

