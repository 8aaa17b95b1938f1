"""Evaluation harness: alignment, topic recovery, convergence sweeps and diagnostics.

The module is organized into the following functional areas:

Alignment:
  - two_to_inf_norm: Maximum row l2 norm
  - align_factors: Best signed permutation of the truth onto an estimate
  - AlignmentResult: The permutation and its errors

Topics:
  - estimate_topics: Topic matrix from rotated factors and the column-centered counts
  - topic_l1_error: Worst-topic l1 error after alignment
  - clip_to_simplex: Post-hoc projection of estimated topics onto the simplex

Sweeps:
  - SweepFamily / Simulation: A model family with a size knob
  - dcsbm_family: DC-SBM family with fixed density
  - convergence_sweep: Median error per size and the log-log slope

Diagnostics:
  - diagnostics: Kurtosis, scree, pair sample and participation ratios
  - inclusion_probabilities: Row-norm proportional sampling weights
"""

import itertools
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal, NamedTuple, TypeAlias

import numpy as np
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from .constants import DEFAULT_PAIRS_SAMPLE, MAX_EXACT_K, NEAR_GAUSSIAN_BAND
from .exceptions import (
    ConfigurationError,
    DegenerateDistributionError,
    DegenerateTopicError,
    DimensionMismatchError,
    SizeGuardError,
)
from .models import DcSbmSpec, expected_density, generate_dcsbm, sample_kurtosis
from .pipeline import VspConfig, build_config, run_vsp
from .sparse_core import SparseMatrix
from .utils import get_thread_count, logger, make_rng
from .varimax import SignedPermutation, apply_sign_convention

AlignMode: TypeAlias = Literal["exact", "greedy"]

PAIRS_STREAM = 3
TIE_MARGIN = 1e-12


def two_to_inf_norm(m: np.ndarray) -> float:
    """Maximum l2 norm over the rows of ``m``."""
    m = np.asarray(m, dtype=np.float64)
    if m.size == 0:
        return 0.0
    if m.ndim == 1:
        m = m[:, np.newaxis]
    return float(np.max(np.sqrt(np.sum(m * m, axis=1))))


@dataclass(frozen=True)
class AlignmentResult:
    """Signed permutation P minimizing ``||est - truth P||_{2->inf}`` and its errors."""

    best_p: SignedPermutation
    err_two_inf: float
    err_frob: float
    mode: AlignMode = "exact"

    def to_dict(self) -> dict[str, object]:
        return {
            "mode": self.mode,
            "err_two_inf": self.err_two_inf,
            "err_frob": self.err_frob,
            **self.best_p.to_dict(),
        }


def _column_costs(est: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Squared row errors for every (estimate column, truth column, sign) choice.

    Returns an array of shape ``(k, k, 2, n)``; sign index 0 is +1 and 1 is -1.
    """
    k = est.shape[1]
    costs = np.empty((k, k, 2, est.shape[0]))
    for j in range(k):
        for c in range(k):
            costs[j, c, 0] = (est[:, j] - truth[:, c]) ** 2
            costs[j, c, 1] = (est[:, j] + truth[:, c]) ** 2
    return costs


def _errors_for(costs: np.ndarray, p: SignedPermutation) -> tuple[float, float]:
    total = np.zeros(costs.shape[-1])
    for j, (c, s) in enumerate(zip(p.perm, p.signs)):
        total += costs[j, c, 0 if s > 0 else 1]
    return math.sqrt(float(total.max(initial=0.0))), math.sqrt(float(total.sum()))


def _greedy_assignment(est: np.ndarray, truth: np.ndarray) -> SignedPermutation:
    """Match columns by repeated argmax of the absolute cosine, then read off signs."""
    k = est.shape[1]
    est_norms = np.linalg.norm(est, axis=0)
    truth_norms = np.linalg.norm(truth, axis=0)
    denom = np.outer(est_norms, truth_norms)
    cosine = np.divide(est.T @ truth, denom, out=np.zeros((k, k)), where=denom > 0)
    available = np.abs(cosine)
    perm = [0] * k
    signs = [1] * k
    for _ in range(k):
        j, c = np.unravel_index(int(np.argmax(available)), available.shape)
        perm[j] = int(c)
        signs[j] = -1 if cosine[j, c] < 0 else 1
        available[j, :] = -1.0
        available[:, c] = -1.0
    return SignedPermutation(tuple(perm), tuple(signs))


def _exact_search(costs: np.ndarray, bound: float) -> SignedPermutation | None:
    """Depth-first search over signed permutations with max-row pruning.

    Candidates are visited identity first and only a strictly better candidate
    replaces the incumbent, so ties resolve to the identity.
    """
    k = costs.shape[0]
    best_value = bound
    best: SignedPermutation | None = None
    perm: list[int] = []
    signs: list[int] = []
    used = [False] * k

    def descend(j: int, partial: np.ndarray) -> None:
        nonlocal best_value, best
        if j == k:
            value = float(partial.max(initial=0.0))
            if value < best_value:
                best_value = value
                best = SignedPermutation(tuple(perm), tuple(signs))
            return
        for c in range(k):
            if used[c]:
                continue
            for sign_index, sign in enumerate((1, -1)):
                candidate = partial + costs[j, c, sign_index]
                if float(candidate.max(initial=0.0)) >= best_value:
                    continue
                used[c] = True
                perm.append(c)
                signs.append(sign)
                descend(j + 1, candidate)
                perm.pop()
                signs.pop()
                used[c] = False

    descend(0, np.zeros(costs.shape[-1]))
    return best


def align_factors(est: np.ndarray, truth: np.ndarray, mode: AlignMode = "exact") -> AlignmentResult:
    """Align an estimate with the truth over signed permutations.

    Exact mode minimizes ``||est - truth P||_{2->inf}`` over all ``2^k k!`` elements
    (k <= 8). Greedy mode assigns columns by maximal absolute cosine and fixes signs,
    which gives an upper bound on the exact minimum.

    Args:
        est: Estimated factors (n x k)
        truth: True factors (n x k)
        mode: ``"exact"`` or ``"greedy"``

    Returns:
        The alignment and its 2->inf and Frobenius errors

    Raises:
        DimensionMismatchError: If the shapes differ
        SizeGuardError: If exact mode is requested for k > 8

    """
    est = np.asarray(est, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if est.ndim != 2 or est.shape != truth.shape:
        raise DimensionMismatchError("factor matrices", truth.shape, est.shape)
    if mode not in ("exact", "greedy"):
        raise ConfigurationError(f"Unknown alignment mode: {mode}")
    k = est.shape[1]
    if mode == "exact" and k > MAX_EXACT_K:
        raise SizeGuardError("exact alignment (use --mode greedy for k > 8)", k, MAX_EXACT_K)

    costs = _column_costs(est, truth)
    greedy = _greedy_assignment(est, truth)
    best = greedy
    if mode == "exact":
        greedy_value = _errors_for(costs, greedy)[0] ** 2
        bound = greedy_value * (1.0 + TIE_MARGIN) + np.finfo(np.float64).tiny
        found = _exact_search(costs, bound)
        if found is not None:
            best = found
    err_two_inf, err_frob = _errors_for(costs, best)
    return AlignmentResult(best, err_two_inf, err_frob, mode)


# --------------------------------------------------------------------------- topics


def estimate_topics(z_hat: np.ndarray, a_colcentered: LinearOperator) -> np.ndarray:
    """Estimate the topic matrix from rotated factors.

    ``Phi = Z^T A`` is formed with k adjoint products; each row is divided by its l1
    norm and the result is transposed to d x k. Entries may be negative.

    Raises:
        DimensionMismatchError: If ``z_hat`` does not match the operator rows
        DegenerateTopicError: If a row of ``Phi`` is zero

    """
    op = aslinearoperator(a_colcentered)
    z_hat = np.asarray(z_hat, dtype=np.float64)
    if z_hat.ndim != 2 or z_hat.shape[0] != op.shape[0]:
        raise DimensionMismatchError("factor rows", op.shape[0], z_hat.shape)
    phi = np.asarray(op.rmatmat(z_hat)).T
    norms = np.abs(phi).sum(axis=1)
    degenerate = np.flatnonzero(~(norms > 0))
    if degenerate.size:
        raise DegenerateTopicError(f"degenerate topic: row {int(degenerate[0])} of Z^T A is zero")
    return (phi / norms[:, np.newaxis]).T


def _topic_costs(beta_hat: np.ndarray, beta: np.ndarray) -> np.ndarray:
    k = beta.shape[1]
    plus = np.abs(beta_hat[:, :, np.newaxis] - beta[:, np.newaxis, :]).sum(axis=0)
    minus = np.abs(beta_hat[:, :, np.newaxis] + beta[:, np.newaxis, :]).sum(axis=0)
    return np.minimum(plus, minus).reshape(k, k)


def topic_l1_error(beta_hat: np.ndarray, beta: np.ndarray) -> float:
    """Smallest worst-topic l1 distance between ``beta_hat`` and ``beta P`` (k <= 8)."""
    beta_hat = np.asarray(beta_hat, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    if beta_hat.ndim != 2 or beta_hat.shape != beta.shape:
        raise DimensionMismatchError("topic matrices", beta.shape, beta_hat.shape)
    k = beta.shape[1]
    if k > MAX_EXACT_K:
        raise SizeGuardError("topic_l1_error", k, MAX_EXACT_K)
    costs = _topic_costs(beta_hat, beta)
    columns = np.arange(k)
    return min(
        float(costs[columns, list(perm)].max()) for perm in itertools.permutations(range(k))
    )


def clip_to_simplex(beta_hat: np.ndarray) -> np.ndarray:
    """Project estimated topics onto the simplex after the fact.

    Columns with a negative total are flipped, negatives are clipped to zero and each
    column is rescaled to unit l1 norm. This is a post-processing convenience, not
    part of the estimator.
    """
    beta_hat = np.array(beta_hat, dtype=np.float64, copy=True)
    flip = beta_hat.sum(axis=0) < 0
    beta_hat[:, flip] *= -1.0
    np.clip(beta_hat, 0.0, None, out=beta_hat)
    totals = beta_hat.sum(axis=0)
    if np.any(totals <= 0):
        raise DegenerateTopicError("degenerate topic: no positive mass left after clipping")
    return beta_hat / totals


# --------------------------------------------------------------------------- sweeps


class Simulation(NamedTuple):
    a: SparseMatrix
    z: np.ndarray
    delta: float


@dataclass(frozen=True)
class SweepFamily:
    """Model family with a size knob; ``center`` selects the matching pipeline."""

    name: str
    simulate: Callable[[int, int], Simulation]
    center: bool = False


def dcsbm_family(base: DcSbmSpec) -> SweepFamily:
    """DC-SBM family with the density of ``base`` and a variable number of nodes."""

    def simulate(size: int, seed: int) -> Simulation:
        spec = base.model_copy(update={"n": size})
        a, z = generate_dcsbm(spec, seed)
        delta = expected_density(z, spec.b_matrix, rho=spec.rho, include_max=False).delta
        return Simulation(a, z, delta)

    return SweepFamily(name="dcsbm", simulate=simulate, center=False)


class SweepRow(NamedTuple):
    size: int
    seed: int
    delta: float
    err: float


class SweepSummary(NamedTuple):
    size: int
    delta: float
    median_err: float


@dataclass(frozen=True)
class SweepResult:
    rows: list[SweepRow]
    table: list[SweepSummary]
    slope: float


def _run_cell(family: SweepFamily, config: VspConfig, size: int, seed: int) -> SweepRow:
    simulation = family.simulate(size, seed)
    cell_config = build_config(**{**config.model_dump(), "center": family.center, "seed": seed})
    result = run_vsp(simulation.a, cell_config)
    estimate = result.z_recentered if cell_config.recenter else result.z_hat
    mode: AlignMode = "exact" if cell_config.k <= MAX_EXACT_K else "greedy"
    alignment = align_factors(estimate, simulation.z, mode)
    logger.debug(
        f"{family.name} n={size} seed={seed}: delta={simulation.delta:.3f}, "
        f"err={alignment.err_two_inf:.4g}"
    )
    return SweepRow(size, seed, simulation.delta, alignment.err_two_inf)


def convergence_sweep(
    family: SweepFamily,
    sizes: Sequence[int],
    seeds: Sequence[int],
    config: VspConfig,
) -> SweepResult:
    """Estimate the 2->inf error across sizes and seeds.

    Cells run on a thread pool capped by ``VSP_THREADS``; rows are sorted by
    (size, seed) so the table does not depend on completion order.

    Returns:
        Every cell, the per-size medians, and the least-squares slope of
        ``log(median err)`` against ``log(delta)`` (NaN if an error is zero)

    Raises:
        ConfigurationError: With fewer than three sizes or three seeds

    """
    sizes = sorted(set(int(s) for s in sizes))
    seeds = sorted(set(int(s) for s in seeds))
    if len(sizes) < 3 or len(seeds) < 3:
        raise ConfigurationError("a convergence sweep needs at least 3 sizes and 3 seeds")
    cells = list(itertools.product(sizes, seeds))
    workers = max(1, min(get_thread_count(), len(cells)))
    logger.info(f"Running {family.name} sweep: {len(cells)} cells on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(lambda cell: _run_cell(family, config, *cell), cells))
    rows.sort(key=lambda row: (row.size, row.seed))

    table = []
    for size in sizes:
        cell_rows = [row for row in rows if row.size == size]
        table.append(
            SweepSummary(
                size,
                float(np.median([row.delta for row in cell_rows])),
                float(np.median([row.err for row in cell_rows])),
            )
        )
    deltas = np.array([row.delta for row in table])
    errs = np.array([row.median_err for row in table])
    if np.all(errs > 0) and np.all(deltas > 0):
        slope = float(np.polyfit(np.log(deltas), np.log(errs), 1)[0])
    else:
        slope = math.nan
    return SweepResult(rows, table, slope)


# --------------------------------------------------------------------------- diagnostics


def inclusion_probabilities(z_hat: np.ndarray) -> np.ndarray:
    """Sampling weights proportional to row l2 norms (uniform if all rows are zero)."""
    norms = np.linalg.norm(np.asarray(z_hat, dtype=np.float64), axis=1)
    total = norms.sum()
    if not total > 0:
        return np.full(norms.shape[0], 1.0 / norms.shape[0])
    return norms / total


def _pair_sample(z_hat: np.ndarray, size: int, seed: int) -> np.ndarray:
    n = z_hat.shape[0]
    m = min(size, n)
    rng = make_rng(seed, PAIRS_STREAM)
    probs = inclusion_probabilities(z_hat)
    positive = np.flatnonzero(probs > 0)
    if positive.size >= m:
        rows = rng.choice(n, size=m, replace=False, p=probs)
    else:
        zero_rows = np.flatnonzero(probs == 0)
        fill = rng.choice(zero_rows, size=m - positive.size, replace=False)
        rows = np.concatenate([positive, fill])
    return np.sort(rows)


def _safe_kurtosis(column: np.ndarray) -> tuple[float, bool]:
    try:
        return sample_kurtosis(column), False
    except DegenerateDistributionError:
        return math.nan, True


def participation_ratio(u: np.ndarray) -> np.ndarray:
    """``(sum u^2)^2 / (n sum u^4)`` per column; low values flag localized components."""
    u = np.asarray(u, dtype=np.float64)
    squared = u * u
    fourth = np.sum(squared * squared, axis=0)
    ratio = np.full(u.shape[1], math.nan)
    np.divide(np.sum(squared, axis=0) ** 2, u.shape[0] * fourth, out=ratio, where=fourth > 0)
    return ratio


@dataclass(frozen=True, eq=False)
class DiagnosticsBundle:
    """Exportable diagnostics of a set of factors.

    ``kurtosis_degenerate[j]`` is True when factor j is constant and its kurtosis is
    reported as NaN.
    """

    kurtosis: np.ndarray
    kurtosis_degenerate: np.ndarray
    participation: np.ndarray
    pair_rows: np.ndarray
    pair_values: np.ndarray
    scree: np.ndarray | None = None
    principal_kurtosis: np.ndarray | None = None

    @property
    def near_gaussian(self) -> bool:
        """True when every factor kurtosis lies inside the near-Gaussian band."""
        low, high = NEAR_GAUSSIAN_BAND
        finite = self.kurtosis[np.isfinite(self.kurtosis)]
        return bool(finite.size == self.kurtosis.size and np.all((finite >= low) & (finite <= high)))


def diagnostics(
    z_hat: np.ndarray,
    singular_values: np.ndarray | None = None,
    u_hat: np.ndarray | None = None,
    pairs_sample: int = DEFAULT_PAIRS_SAMPLE,
    seed: int = 0,
) -> DiagnosticsBundle:
    """Collect factor diagnostics.

    Args:
        z_hat: Rotated factors (n x k)
        singular_values: Singular values for the scree table, if available
        u_hat: Unrotated left singular vectors; participation ratios and principal
            component kurtosis use them when given, otherwise ``z_hat``
        pairs_sample: Rows in the pair-plot sample (``min(pairs_sample, n)`` are drawn)
        seed: Seed of the pair sample

    Returns:
        The diagnostics bundle; constant factors get NaN kurtosis instead of an error

    """
    z_hat = np.asarray(z_hat, dtype=np.float64)
    if z_hat.ndim != 2:
        raise DimensionMismatchError("factors", "2-D array", z_hat.shape)
    if pairs_sample < 1:
        raise ConfigurationError("pairs_sample must be positive")
    values = [_safe_kurtosis(z_hat[:, j]) for j in range(z_hat.shape[1])]
    kurtosis = np.array([v for v, _ in values])
    degenerate = np.array([flag for _, flag in values], dtype=bool)
    if np.any(degenerate):
        logger.warning(f"Constant factors {np.flatnonzero(degenerate).tolist()}: kurtosis is NaN")

    principal = None
    if u_hat is not None:
        signed, _ = apply_sign_convention(np.asarray(u_hat, dtype=np.float64))
        principal = np.array([_safe_kurtosis(signed[:, j])[0] for j in range(signed.shape[1])])

    rows = _pair_sample(z_hat, pairs_sample, seed)
    return DiagnosticsBundle(
        kurtosis=kurtosis,
        kurtosis_degenerate=degenerate,
        participation=participation_ratio(z_hat if u_hat is None else u_hat),
        pair_rows=rows,
        pair_values=z_hat[rows],
        scree=None if singular_values is None else np.asarray(singular_values, dtype=np.float64),
        principal_kurtosis=principal,
    )
