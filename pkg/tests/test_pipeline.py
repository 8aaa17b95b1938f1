"""Tests for the end-to-end decomposition."""

import math
from unittest import mock

import numpy as np
import pytest
from vintage_sparse_pca.exceptions import ConfigurationError, RecenteringError
from vintage_sparse_pca.models import FactorModelSpec, generate_factor_model
from vintage_sparse_pca.pipeline import VspConfig, build_config, recenter, run_vsp
from vintage_sparse_pca.sparse_core import SparseMatrix, scale_matrix
from vintage_sparse_pca.svd import truncated_svd
from vintage_sparse_pca.varimax import canonical_form, signed_permutation_distance, solve_varimax


@pytest.mark.unit()
class TestConfig:
    """Tests for VspConfig validation."""

    def test_defaults(self) -> None:
        """Test the documented defaults."""
        config = build_config(k=3)

        assert (config.seed, config.oversample, config.power_iters) == (0, 10, 5)
        assert config.center_mode == "full"
        assert not (config.center or config.scale)

    @pytest.mark.parametrize(
        ("values", "message"),
        [
            ({"k": 2, "recenter": True}, "--recenter requires --center"),
            ({"k": 2, "rescale": True}, "--rescale requires --scale"),
            ({"k": 2, "center_mode": "column_only"}, "--center-mode column requires --center"),
            ({"k": 0}, "k"),
            ({"k": 2, "seed": -1}, "seed"),
            ({"k": 2, "restarts": 0}, "restarts"),
        ],
    )
    def test_invalid(self, values: dict[str, object], message: str) -> None:
        """Test that invalid combinations raise ConfigurationError."""
        with pytest.raises(ConfigurationError, match=message):
            build_config(**values)

    def test_unknown_option(self) -> None:
        """Test that misspelled options are not silently ignored."""
        with pytest.raises(ConfigurationError):
            build_config(k=2, centre=True)

    def test_frozen(self) -> None:
        """Test that a config cannot be mutated after construction."""
        config = VspConfig(k=2)

        with pytest.raises(Exception):  # noqa: B017
            config.k = 3  # type: ignore[misc]


@pytest.mark.unit()
class TestRunVsp:
    """Tests for run_vsp."""

    def test_recovers_noiseless_blocks(self, noiseless_blocks: tuple[SparseMatrix, np.ndarray]) -> None:
        """Test that Z B Z^T with three blocks returns the membership matrix."""
        # Setup
        a, z = noiseless_blocks

        # Execute
        result = run_vsp(a, build_config(k=3, restarts=3))

        # Verify
        distance, p = signed_permutation_distance(result.z_hat / math.sqrt(3.0), z)
        assert distance < 1e-6
        assert all(s == 1 for s in p.signs)
        assert np.all(result.z_hat > -1e-8)

    def test_reconstruction_matches_input(self, noiseless_blocks: tuple[SparseMatrix, np.ndarray]) -> None:
        """Test that Z B Y^T reproduces a rank-k input."""
        a, _ = noiseless_blocks

        result = run_vsp(a, build_config(k=3))

        np.testing.assert_allclose(result.reconstruct(), a.to_dense(), atol=1e-8)

    def test_factor_normalization(self, random_sparse: tuple[SparseMatrix, np.ndarray]) -> None:
        """Test that Z^T Z = n I and Y^T Y = d I."""
        a, _ = random_sparse
        n, d = a.shape

        result = run_vsp(a, build_config(k=4, center=True))

        np.testing.assert_allclose(result.z_hat.T @ result.z_hat, n * np.eye(4), atol=1e-8)
        np.testing.assert_allclose(result.y_hat.T @ result.y_hat, d * np.eye(4), atol=1e-8)

    def test_deterministic(self, random_sparse: tuple[SparseMatrix, np.ndarray]) -> None:
        """Test that the same seed gives identical outputs."""
        a, _ = random_sparse
        config = build_config(k=3, center=True, seed=5, restarts=2)

        first = run_vsp(a, config)
        second = run_vsp(a, config)

        np.testing.assert_array_equal(first.z_hat, second.z_hat)
        np.testing.assert_array_equal(first.b_hat, second.b_hat)

    def test_row_permutation_equivariance(self, random_sparse: tuple[SparseMatrix, np.ndarray]) -> None:
        """Test that permuting the rows of A permutes the rows of Z and nothing else."""
        # Setup
        a, dense = random_sparse
        perm = np.random.default_rng(3).permutation(dense.shape[0])
        config = build_config(k=3, center=True, seed=9)

        # Execute
        result = run_vsp(a, config)
        permuted = run_vsp(SparseMatrix.from_dense(dense[perm]), config)

        # Verify
        np.testing.assert_allclose(permuted.z_hat, result.z_hat[perm], atol=1e-8)
        np.testing.assert_allclose(permuted.y_hat, result.y_hat, atol=1e-8)
        np.testing.assert_allclose(permuted.b_hat, result.b_hat, atol=1e-10)

    def test_uncentered_matches_hand_wired_composition(
        self, random_sparse: tuple[SparseMatrix, np.ndarray]
    ) -> None:
        """Test that without centering the pipeline is SVD and Varimax of the raw matrix."""
        # Setup
        a, dense = random_sparse
        n, d = dense.shape

        # Execute
        result = run_vsp(a, build_config(k=3, seed=4, restarts=2))
        svd = truncated_svd(dense, 3, 4)
        u_rot = svd.u @ solve_varimax(svd.u, restarts=2, seed=4).r
        v_rot = svd.v @ solve_varimax(svd.v, restarts=2, seed=4).r

        # Verify
        np.testing.assert_allclose(result.singular_values, svd.singular_values, rtol=1e-10)
        np.testing.assert_allclose(
            result.z_hat, math.sqrt(n) * canonical_form(u_rot).apply(u_rot), atol=1e-8
        )
        np.testing.assert_allclose(
            result.y_hat, math.sqrt(d) * canonical_form(v_rot).apply(v_rot), atol=1e-8
        )

    def test_scales_matrix_once(self, noiseless_blocks: tuple[SparseMatrix, np.ndarray]) -> None:
        """Test that degree scaling is applied a single time per run."""
        a, _ = noiseless_blocks

        with (
            mock.patch("vintage_sparse_pca.pipeline.scale_matrix", wraps=scale_matrix) as in_pipeline,
            mock.patch("vintage_sparse_pca.sparse_core.scale_matrix", wraps=scale_matrix) as in_operator,
        ):
            run_vsp(a, build_config(k=3, scale=True, center=True))

        assert in_pipeline.call_count + in_operator.call_count == 1

    def test_k_larger_than_matrix(self, small_matrix: SparseMatrix) -> None:
        """Test that k above min(n, d) is a configuration error."""
        with pytest.raises(ConfigurationError):
            run_vsp(small_matrix, build_config(k=3))

    def test_recentering_identity(self) -> None:
        """Test that Z + 1 mu_Z equals sqrt(n) A V D^-1 R_U under column-only centering."""
        # Setup
        rng = np.random.default_rng(12)
        dense = rng.poisson(1.0, size=(40, 30)).astype(np.float64)
        a = SparseMatrix.from_dense(dense)
        config = build_config(k=5, center=True, recenter=True, center_mode="column_only", oversample=25)

        # Execute
        result = run_vsp(a, config)

        # Verify
        assert result.mu_y is None
        expected = math.sqrt(40) * (dense @ result.v_hat / result.singular_values) @ result.rot_u.r
        np.testing.assert_allclose(result.z_recentered, expected, atol=1e-8)

    def test_full_recentering_returns_both_means(self, random_sparse: tuple[SparseMatrix, np.ndarray]) -> None:
        """Test that full centering estimates row and column factor means."""
        a, _ = random_sparse

        result = run_vsp(a, build_config(k=3, center=True, recenter=True))

        assert result.mu_z is not None and result.mu_z.shape == (3,)
        assert result.mu_y is not None and result.mu_y.shape == (3,)
        np.testing.assert_allclose(result.y_recentered, result.y_hat + result.mu_y)

    def test_rescaling(self, noiseless_blocks: tuple[SparseMatrix, np.ndarray]) -> None:
        """Test that rescaled factors are the factors times sqrt of the regularized degrees."""
        a, _ = noiseless_blocks

        result = run_vsp(a, build_config(k=3, scale=True, rescale=True))

        assert result.scaling is not None and result.z_rescaled is not None
        expected = np.sqrt(result.scaling.row_weights)[:, np.newaxis] * result.z_hat
        np.testing.assert_allclose(result.z_rescaled, expected)

    def test_without_recentering_properties_return_factors(self, small_matrix: SparseMatrix) -> None:
        """Test that z_recentered falls back to z_hat."""
        result = run_vsp(small_matrix, build_config(k=1))

        assert result.mu_z is None
        np.testing.assert_array_equal(result.z_recentered, result.z_hat)


@pytest.mark.unit()
class TestRecenter:
    """Tests for the recentering formula."""

    def test_zero_singular_value(self) -> None:
        """Test that a zero singular value makes recentering undefined."""
        with pytest.raises(RecenteringError, match="rank deficiency"):
            recenter(np.ones(2), np.eye(2), np.array([1.0, 0.0]), np.eye(2), np.eye(3, 2))

    def test_requires_right_rotation(self) -> None:
        """Test that row means need the right-hand rotation."""
        with pytest.raises(ConfigurationError):
            recenter(np.ones(2), np.eye(2), np.array([2.0, 1.0]), np.eye(2), np.eye(2), mu_r=np.ones(2))

    def test_formula(self) -> None:
        """Test the closed form on identity singular vectors."""
        mu_z, mu_y = recenter(
            np.array([1.0, 2.0]),
            np.eye(2),
            np.array([2.0, 1.0]),
            np.eye(2),
            np.eye(4, 2),
        )

        np.testing.assert_allclose(mu_z, math.sqrt(4) * np.array([0.5, 2.0]))
        assert mu_y is None

    def test_mean_zero_factors(self) -> None:
        """Test that factors with zero mean get recentered means near zero."""
        # Setup
        spec = FactorModelSpec(
            n=4000,
            d=400,
            k=3,
            b=((1.0, 0.2, 0.0), (0.0, 1.0, 0.2), (0.0, 0.0, 1.0)),
            z_dist="uniform(-1.0, 1.0)",
            y_dist="uniform(0.0, 1.0)",
            noise="gaussian(0.0)",
        )
        a, _, _ = generate_factor_model(spec, seed=21)

        # Execute
        result = run_vsp(
            a, build_config(k=3, center=True, center_mode="column_only", recenter=True, seed=21)
        )

        # Verify
        assert result.mu_z is not None
        assert np.max(np.abs(result.mu_z)) < 0.05
