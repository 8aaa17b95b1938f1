"""End-to-end checks of the decomposition against oracles and planted models.

Most cases here sample large matrices and are marked slow; deselect them with
``-m "not slow"``.
"""

import math
from pathlib import Path

import numpy as np
import pytest
from vintage_sparse_pca.cli import main
from vintage_sparse_pca.constants import (
    BLOCK_RECOVERY_MIN_ACCURACY,
    CONVERGENCE_SLOPE_BAND,
    RECENTERED_MEAN_MAX_ERROR,
    ROTATION_RECOVERY_MAX_DISTANCE,
    TOPIC_L1_MAX_ERROR,
)
from vintage_sparse_pca.evaluation import (
    align_factors,
    convergence_sweep,
    dcsbm_family,
    estimate_topics,
    topic_l1_error,
)
from vintage_sparse_pca.models import (
    DcSbmSpec,
    DistributionSpec,
    FactorModelSpec,
    LdaSpec,
    generate_dcsbm,
    generate_factor_model,
    generate_lda,
    kurtosis_of_sparse,
    kurtosis_of_sum,
    sample_kurtosis,
)
from vintage_sparse_pca.pipeline import build_config, run_vsp
from vintage_sparse_pca.sparse_core import (
    SparseMatrix,
    build_operator,
    compute_centering_stats,
    compute_scaling_stats,
    scale_matrix,
)
from vintage_sparse_pca.svd import dense_svd_oracle, truncated_svd
from vintage_sparse_pca.varimax import (
    SignedPermutation,
    random_orthogonal,
    signed_permutation_distance,
    solve_varimax,
    varimax_objective,
)

from tests.helpers import kurtosis_standard_error, write_text

SPARSE_LAWS = [
    "point_mass(1.0)",
    "point_mass(-2.5)",
    "exponential(1.0)",
    "gamma(0.5, 2.0)",
    "gamma(5.0, 1.0)",
    "uniform(0.0, 1.0)",
    "uniform(-1.0, 3.0)",
    "normal(0.0, 1.0)",
    "normal(10.0, 0.1)",
    "bernoulli(0.9)",
]

# Within-block edges dominate so that blocks are separable at an average degree of ~40.
# Medians in the recovery criteria are taken over five seeds
ACCEPTANCE_SEEDS = range(5)

DCSBM_BASE = DcSbmSpec(
    n=2000,
    k=3,
    pi=(1 / 3, 1 / 3, 1 / 3),
    b=((0.018, 0.001, 0.001), (0.001, 0.018, 0.001), (0.001, 0.001, 0.018)),
)


def dense_processed(dense: np.ndarray, scale: bool, mode: str | None) -> np.ndarray:
    """Dense reference for the scaled and centered matrix."""
    out = dense
    if scale:
        row_w = dense.sum(axis=1) + dense.sum(axis=1).mean()
        col_w = dense.sum(axis=0) + dense.sum(axis=0).mean()
        out = dense / np.sqrt(row_w)[:, np.newaxis] / np.sqrt(col_w)[np.newaxis, :]
    if mode == "full":
        out = out - out.mean(axis=1, keepdims=True) - out.mean(axis=0, keepdims=True) + out.mean()
    elif mode == "column_only":
        out = out - out.mean(axis=0, keepdims=True)
    return out


def random_nonnegative(rng: np.random.Generator, n: int, d: int, density: float) -> np.ndarray:
    dense = rng.random((n, d)) * (rng.random((n, d)) < density)
    dense[0, 0] = 1.0
    return dense


@pytest.mark.unit()
class TestOperatorOracle:
    """Implicit operators agree with their dense counterparts."""

    def test_random_matrices(self) -> None:
        """Test 50 random matrices across every scaling and centering option."""
        rng = np.random.default_rng(100)
        options = [(False, None), (False, "full"), (False, "column_only"), (True, None), (True, "full")]
        for case in range(50):
            # Setup
            n, d = (int(v) for v in rng.integers(2, 101, size=2))
            dense = random_nonnegative(rng, n, d, float(rng.uniform(0.05, 0.5)))
            scale, mode = options[case % len(options)]
            a = SparseMatrix.from_dense(dense)
            scaling = compute_scaling_stats(a) if scale else None
            processed = scale_matrix(a, scaling) if scaling is not None else a
            centering = compute_centering_stats(processed) if mode else None
            op = build_operator(a, scaling, centering, mode or "full")
            reference = dense_processed(dense, scale, mode)
            x = rng.standard_normal((d, 3))
            y = rng.standard_normal((n, 3))

            # Execute / Verify
            np.testing.assert_allclose(op.matmat(x), reference @ x, rtol=0, atol=1e-12)
            np.testing.assert_allclose(op.rmatmat(y), reference.T @ y, rtol=0, atol=1e-12)
            np.testing.assert_allclose(op.matvec(x[:, 0]), reference @ x[:, 0], rtol=0, atol=1e-12)


@pytest.mark.unit()
class TestSvdOracle:
    """Truncated SVD against the dense oracle."""

    def test_planted_rank_five(self) -> None:
        """Test 20 noisy rank-5 matrices of size 100x80."""
        rng = np.random.default_rng(200)
        planted = np.array([50.0, 40.0, 30.0, 20.0, 10.0])
        for seed in range(20):
            left = np.linalg.qr(rng.standard_normal((100, 5)))[0]
            right = np.linalg.qr(rng.standard_normal((80, 5)))[0]
            dense = (left * planted) @ right.T + 1e-3 * rng.standard_normal((100, 80))

            result = truncated_svd(dense, 5, seed=seed)

            oracle = dense_svd_oracle(dense)
            np.testing.assert_allclose(result.singular_values, oracle.singular_values[:5], rtol=1e-8)

    @pytest.mark.parametrize(("center", "scale"), [(False, False), (True, False), (True, True)])
    def test_reconstruction_and_normalization(self, center: bool, scale: bool) -> None:
        """Test Z B Y^T against U D V^T and the sqrt(n) column norms of Z."""
        # Setup
        rng = np.random.default_rng(300)
        a = SparseMatrix.from_dense(random_nonnegative(rng, 70, 50, 0.2))

        # Execute
        result = run_vsp(a, build_config(k=4, center=center, scale=scale, restarts=2))

        # Verify
        rank_k = (result.u_hat * result.singular_values) @ result.v_hat.T
        assert np.linalg.norm(result.reconstruct() - rank_k) <= 1e-10 * np.linalg.norm(rank_k)
        np.testing.assert_allclose(np.linalg.norm(result.z_hat, axis=0), math.sqrt(70), rtol=1e-10)
        np.testing.assert_allclose(np.linalg.norm(result.y_hat, axis=0), math.sqrt(50), rtol=1e-10)


@pytest.mark.unit()
class TestVarimaxProperties:
    """Invariance and ascent of the rotation search."""

    def test_objective_invariance(self) -> None:
        """Test that right multiplication by a signed permutation keeps the objective."""
        rng = np.random.default_rng(400)
        for _ in range(100):
            k = int(rng.integers(2, 6))
            u = rng.standard_normal((int(rng.integers(k, 60)), k))
            r = random_orthogonal(k, rng)
            p = SignedPermutation(
                tuple(int(i) for i in rng.permutation(k)),
                tuple(int(s) for s in rng.choice([-1, 1], k)),
            )

            assert varimax_objective(p.apply(r), u) == pytest.approx(varimax_objective(r, u), rel=1e-12)

    def test_sweeps_never_decrease(self) -> None:
        """Test that the objective history is nondecreasing."""
        rng = np.random.default_rng(401)
        for _ in range(20):
            u = np.linalg.qr(rng.standard_exponential((200, 4)) - 1.0)[0]

            history = np.array(solve_varimax(u, restarts=2, seed=1).objective_history)

            assert np.all(np.diff(history) >= -1e-12 * abs(history[-1]))


@pytest.mark.slow()
@pytest.mark.parametrize("restarts", [1, 5])
def test_rotation_recovery(restarts: int) -> None:
    """Test that Varimax undoes a random rotation of whitened centered exponential factors."""
    successes = 0
    for seed in range(10):
        # Setup
        rng = np.random.default_rng(500 + seed)
        z = rng.standard_exponential((20000, 3)) - 1.0
        evals, evecs = np.linalg.eigh(z.T @ z / z.shape[0])
        z = z @ (evecs / np.sqrt(evals)) @ evecs.T
        rotation = random_orthogonal(3, rng)

        # Execute
        r_hat = solve_varimax(z @ rotation, restarts=restarts, seed=seed).r

        # Verify
        distance, _ = signed_permutation_distance(r_hat, rotation.T)
        successes += distance < ROTATION_RECOVERY_MAX_DISTANCE
    assert successes >= 9


@pytest.mark.unit()
class TestKurtosisSweeps:
    """Analytic kurtosis over grids of sparse and soft-sparse laws."""

    def test_sparse_laws_are_leptokurtic(self) -> None:
        """Test 200 (p, S) pairs with p below 1/6."""
        grid = np.linspace(1.0, 20.0, 20) / (6.0 * 21.0)
        for law in SPARSE_LAWS:
            dist = DistributionSpec.model_validate(law)
            for p in grid:
                check = kurtosis_of_sparse(float(p), dist)
                assert check.leptokurtic, (law, p)
                assert check.kurtosis > 3.0

    @pytest.mark.parametrize("p", [0.5 - 1 / math.sqrt(12), 0.5 + 1 / math.sqrt(12)])
    def test_bernoulli_boundary(self, p: float) -> None:
        """Test that Bernoulli kurtosis is exactly 3 at the two boundary points."""
        check = kurtosis_of_sparse(p, (1.0, 1.0, 1.0, 1.0))

        assert check.kurtosis == pytest.approx(3.0, abs=1e-12)

    def test_soft_sparse_grid(self) -> None:
        """Test 100 signal-plus-noise laws; flagged ones are leptokurtic."""
        signals = [
            DistributionSpec.model_validate(f"scaled_bernoulli({p}, {base})")
            for p in (0.02, 0.1)
            for base in (
                "exponential(1.0)",
                "normal(0.0, 1.0)",
                "point_mass(1.0)",
                "gamma(2.0, 1.0)",
                "uniform(0.0, 1.0)",
            )
        ]
        noise_laws = [f"normal(0.0, {sd})" for sd in (0.05, 0.3, 1.0, 3.0)] + [
            "uniform(-0.5, 0.5)",
            "uniform(-2.0, 2.0)",
            "exponential(4.0)",
            "gamma(0.5, 0.2)",
            "bernoulli(0.5)",
            "point_mass(0.3)",
        ]
        noises = [DistributionSpec.model_validate(law) for law in noise_laws]
        flagged = 0
        for signal in signals:
            _, eta2, eta3, eta4 = signal.central_moments
            x_central = (0.0, 1.0, eta3 / eta2**1.5, eta4 / eta2**2)
            for noise in noises:
                check = kurtosis_of_sum(x_central, noise.central_moments)
                if check.leptokurtic:
                    flagged += 1
                    assert check.kurtosis > 3.0, (signal, noise)
        assert len(signals) * len(noises) == 100
        assert flagged > 50

    def test_soft_sparse_monte_carlo(self) -> None:
        """Test one analytic kurtosis against a large sample, within three standard errors."""
        # Setup
        analytic = kurtosis_of_sum((0.0, 1.0, 2.0, 9.0), (0.0, 0.25, 0.0, 0.1875)).kurtosis
        rng = np.random.default_rng(600)
        x = rng.standard_exponential(2_000_000) - 1.0 + rng.normal(0.0, 0.5, 2_000_000)

        # Execute
        estimate = sample_kurtosis(x)
        standard_error = kurtosis_standard_error(x)

        # Verify
        assert analytic == pytest.approx(10.6875 / 1.5625)
        assert abs(estimate - analytic) < 3.0 * standard_error


def block_accuracy(z_hat: np.ndarray, z: np.ndarray) -> float:
    """Fraction of nodes whose largest estimated loading points at their true block."""
    p = align_factors(z_hat, z).best_p
    nearest = np.argmax(z_hat * np.asarray(p.signs, dtype=np.float64), axis=1)
    return float(np.mean(np.asarray(p.perm)[nearest] == np.argmax(z, axis=1)))


@pytest.mark.slow()
class TestBlockmodelRecovery:
    """Degree-corrected blockmodel end to end."""

    def test_block_accuracy(self) -> None:
        """Test that nearest-axis labels recover the blocks at an average degree near 40."""
        accuracies = []
        for seed in ACCEPTANCE_SEEDS:
            a, z = generate_dcsbm(DCSBM_BASE, seed)

            result = run_vsp(a, build_config(k=3, seed=seed, restarts=3))

            accuracies.append(block_accuracy(result.z_hat, z))
        assert float(np.median(accuracies)) > BLOCK_RECOVERY_MIN_ACCURACY

    def test_convergence_sweep(self) -> None:
        """Test that the error falls with n at a slope inside the registered band."""
        result = convergence_sweep(
            dcsbm_family(DCSBM_BASE), [500, 1000, 2000, 4000], range(5), build_config(k=3, restarts=3)
        )

        errors = [row.median_err for row in result.table]
        assert all(later < earlier for earlier, later in zip(errors, errors[1:], strict=False))
        assert CONVERGENCE_SLOPE_BAND[0] < result.slope < CONVERGENCE_SLOPE_BAND[1]


def lda_error(s: float, seed: int) -> float:
    sample = generate_lda(LdaSpec(n=2000, d=500, k=3, alpha=(0.5, 0.5, 0.5), s=s), seed)
    config = build_config(k=3, seed=seed, center=True, center_mode="column_only", restarts=3)
    result = run_vsp(sample.a, config)
    op = build_operator(sample.a, None, result.centering, "column_only")
    return topic_l1_error(estimate_topics(result.z_hat, op), sample.beta)


@pytest.mark.slow()
def test_topic_recovery() -> None:
    """Test topic error at an average degree near 50, and its drop when s doubles."""
    # s = 25/3 gives 3 * 0.5 * s / 500 * 2000 = 50 expected words per term
    base = [lda_error(25.0 / 3.0, seed) for seed in ACCEPTANCE_SEEDS]
    doubled = [lda_error(50.0 / 3.0, seed) for seed in ACCEPTANCE_SEEDS]

    assert float(np.median(base)) < TOPIC_L1_MAX_ERROR
    assert float(np.median(doubled)) < float(np.median(base))


@pytest.mark.slow()
def test_recentered_means() -> None:
    """Test that recentering recovers the means of shifted exponential factors."""
    # Setup
    spec = FactorModelSpec(
        n=4000,
        d=4000,
        k=3,
        b=((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)),
        z_dist=("exponential(1.0)",) * 3,
        y_dist=("exponential(1.0)",) * 3,
        rho=0.1,
    )
    a, z, _ = generate_factor_model(spec, seed=7)

    # Execute
    result = run_vsp(a, build_config(k=3, center=True, recenter=True, restarts=3, seed=7))

    # Verify
    assert result.mu_z is not None
    alignment = align_factors(result.z_recentered, z)
    expected = alignment.best_p.apply_vector(np.ones(3))
    assert np.max(np.abs(result.mu_z - expected)) < RECENTERED_MEAN_MAX_ERROR
    assert alignment.err_two_inf < align_factors(result.z_hat, z).err_two_inf


@pytest.mark.unit()
def test_pipeline_is_deterministic(tmp_path: Path, reset_logger: None) -> None:
    """Test that simulate and decompose reproduce their outputs byte for byte."""
    spec = write_text(
        tmp_path / "sbm.txt",
        "n = 120\nk = 3\npi = [0.3, 0.3, 0.4]\n"
        "b = [[0.5, 0.05, 0.05], [0.05, 0.5, 0.05], [0.05, 0.05, 0.5]]\n",
    )
    for run in ("first", "second"):
        truth, est = tmp_path / run / "truth", tmp_path / run / "est"
        simulate = ["simulate", "--model", "sbm", "--spec", str(spec), "--seed", "3", "--out", str(truth)]
        assert main(simulate) == 0
        decompose = ["decompose", "--input", str(truth / "A.mtx"), "--k", "3", "--center"]
        assert main([*decompose, "--restarts", "4", "--seed", "9", "--out", str(est)]) == 0

    outputs = ("truth/A.mtx", "est/Z.csv", "est/Y.csv", "est/B.csv", "est/singular_values.csv", "est/R_U.csv")
    for name in outputs:
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes(), name
