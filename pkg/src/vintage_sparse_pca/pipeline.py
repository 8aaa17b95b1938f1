"""End-to-end Vintage Sparse PCA.

The pipeline scales, centers, decomposes and rotates:

1. optional degree normalization ``L = D_r^-1/2 A D_c^-1/2``
2. optional implicit centering of the (scaled) matrix
3. truncated SVD of the resulting operator
4. independent Varimax rotations of both singular-vector blocks
5. outputs ``Z = sqrt(n) U R_U``, ``Y = sqrt(d) V R_V``, ``B = R_U^T D R_V / sqrt(nd)``

followed by optional recentering and rescaling of the factors.
"""

import math
from dataclasses import dataclass
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic import ValidationError as PydanticValidationError

from .exceptions import ConfigurationError, RecenteringError
from .sparse_core import (
    CenteringStats,
    ScalingStats,
    SparseMatrix,
    build_operator,
    compute_centering_stats,
    compute_scaling_stats,
    scale_matrix,
)
from .svd import SvdResult, truncated_svd
from .utils import logger
from .varimax import RotationMatrix, canonical_form, compose_rotation, solve_varimax


class VspConfig(BaseModel):
    """Options of a single decomposition."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    k: int = Field(ge=1)
    center: bool = False
    scale: bool = False
    recenter: bool = False
    rescale: bool = False
    seed: int = Field(default=0, ge=0, lt=2**64)
    oversample: int = Field(default=10, ge=0)
    power_iters: int = Field(default=5, ge=0)
    varimax_tol: float = Field(default=1e-10, gt=0)
    max_sweeps: int = Field(default=100, ge=1)
    restarts: int = Field(default=1, ge=1)
    kaiser_normalize: bool = False
    center_mode: Literal["full", "column_only"] = "full"

    @model_validator(mode="after")
    def _check_flag_dependencies(self) -> "VspConfig":
        if self.recenter and not self.center:
            raise ValueError("--recenter requires --center")
        if self.rescale and not self.scale:
            raise ValueError("--rescale requires --scale")
        if self.center_mode == "column_only" and not self.center:
            raise ValueError("--center-mode column requires --center")
        return self


def build_config(**values: Any) -> VspConfig:
    """Construct a VspConfig, reporting invalid values as a ConfigurationError."""
    try:
        return VspConfig(**values)
    except PydanticValidationError as e:
        messages = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}"
            for err in e.errors()
        )
        raise ConfigurationError(f"Invalid configuration: {messages}", {"values": values}) from e


@dataclass(frozen=True, eq=False)
class VspResult:
    """Estimated factors and everything needed to interpret them.

    ``mu_z``/``mu_y`` are present only when recentering was requested (``mu_y`` is
    also absent under column-only centering). ``z_rescaled``/``y_rescaled`` hold the
    degree-rescaled factors, recentered first when both options are on.
    """

    z_hat: np.ndarray
    y_hat: np.ndarray
    b_hat: np.ndarray
    singular_values: np.ndarray
    rot_u: RotationMatrix
    rot_v: RotationMatrix
    u_hat: np.ndarray
    v_hat: np.ndarray
    config: VspConfig
    centering: CenteringStats | None = None
    scaling: ScalingStats | None = None
    mu_z: np.ndarray | None = None
    mu_y: np.ndarray | None = None
    z_rescaled: np.ndarray | None = None
    y_rescaled: np.ndarray | None = None

    @property
    def z_recentered(self) -> np.ndarray:
        if self.mu_z is None:
            return self.z_hat
        return self.z_hat + self.mu_z[np.newaxis, :]

    @property
    def y_recentered(self) -> np.ndarray:
        if self.mu_y is None:
            return self.y_hat
        return self.y_hat + self.mu_y[np.newaxis, :]

    def reconstruct(self) -> np.ndarray:
        """Dense ``Z B Y^T``; equals the rank-k SVD of the processed input."""
        return self.z_hat @ self.b_hat @ self.y_hat.T


def recenter(
    mu_c: np.ndarray,
    v_hat: np.ndarray,
    d_hat: np.ndarray,
    rot_u: RotationMatrix | np.ndarray,
    u_hat: np.ndarray,
    mu_r: np.ndarray | None = None,
    rot_v: RotationMatrix | np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Estimate the factor means removed by centering.

    ``mu_Z = sqrt(n) mu_c V D^-1 R_U`` and ``mu_Y = sqrt(d) mu_r^T U D^-1 R_V``. The
    rotations must be the final (ordered and sign-fixed) ones so that
    ``Z + 1 mu_Z`` is coherent.

    Args:
        mu_c: Column means of the centered matrix
        v_hat: Right singular vectors (d x k)
        d_hat: Singular values
        rot_u: Final rotation of the left block
        u_hat: Left singular vectors (n x k)
        mu_r: Row means; when omitted ``mu_Y`` is not computed
        rot_v: Final rotation of the right block, required with ``mu_r``

    Returns:
        ``(mu_z, mu_y)`` with ``mu_y`` None when ``mu_r`` is not given

    Raises:
        RecenteringError: If any singular value is numerically zero

    """
    d_hat = np.asarray(d_hat, dtype=np.float64)
    n, d = u_hat.shape[0], v_hat.shape[0]
    threshold = max(n, d) * np.finfo(np.float64).eps * (float(d_hat[0]) if d_hat.size else 0.0)
    if d_hat.size == 0 or np.any(d_hat <= threshold) or float(d_hat[0]) <= 0:
        raise RecenteringError("recentering undefined at rank deficiency")

    r_u = rot_u.r if isinstance(rot_u, RotationMatrix) else np.asarray(rot_u)
    mu_z = math.sqrt(n) * ((np.asarray(mu_c) @ v_hat) / d_hat) @ r_u
    mu_y = None
    if mu_r is not None:
        if rot_v is None:
            raise ConfigurationError("rot_v is required to recenter the right factors")
        r_v = rot_v.r if isinstance(rot_v, RotationMatrix) else np.asarray(rot_v)
        mu_y = math.sqrt(d) * ((np.asarray(mu_r) @ u_hat) / d_hat) @ r_v
    return mu_z, mu_y


def run_vsp(a: SparseMatrix, config: VspConfig) -> VspResult:
    """Run Vintage Sparse PCA on ``a``.

    Args:
        a: Observed matrix
        config: Decomposition options

    Returns:
        The estimated factors, rotations and intermediate statistics

    Raises:
        ConfigurationError: If k exceeds ``min(n, d)``
        ScalingError: If scaling is requested for a zero matrix
        RecenteringError: If recentering meets a zero singular value

    """
    n, d = a.shape
    if config.k > min(n, d):
        raise ConfigurationError(
            f"k={config.k} exceeds min(n, d) = {min(n, d)}", {"k": config.k, "shape": a.shape}
        )
    logger.info(
        f"Running vsp on {n}x{d} matrix ({a.nnz} stored entries), k={config.k}, "
        f"center={config.center}, scale={config.scale}"
    )

    scaling = compute_scaling_stats(a) if config.scale else None
    processed = scale_matrix(a, scaling) if scaling is not None else a
    centering = compute_centering_stats(processed) if config.center else None
    op = build_operator(
        a, scaling, centering, config.center_mode, scaled=processed if scaling is not None else None
    )

    svd: SvdResult = truncated_svd(
        op, config.k, config.seed, oversample=config.oversample, power_iters=config.power_iters
    )
    logger.info(f"Leading singular values: {np.array2string(svd.singular_values, precision=6)}")

    varimax_options = {
        "tol": config.varimax_tol,
        "max_sweeps": config.max_sweeps,
        "restarts": config.restarts,
        "seed": config.seed,
        "kaiser_normalize": config.kaiser_normalize,
    }
    rot_u = solve_varimax(svd.u, **varimax_options)
    rot_v = solve_varimax(svd.v, **varimax_options)

    rot_u = compose_rotation(rot_u, canonical_form(svd.u @ rot_u.r))
    rot_v = compose_rotation(rot_v, canonical_form(svd.v @ rot_v.r))
    z_hat = math.sqrt(n) * (svd.u @ rot_u.r)
    y_hat = math.sqrt(d) * (svd.v @ rot_v.r)
    b_hat = (rot_u.r.T * svd.singular_values) @ rot_v.r / math.sqrt(n * d)
    logger.info(
        f"Varimax objectives: left {rot_u.objective:.6g}, right {rot_v.objective:.6g}"
    )

    mu_z = mu_y = None
    if config.recenter:
        assert centering is not None
        full = config.center_mode == "full"
        mu_z, mu_y = recenter(
            centering.mu_c,
            svd.v,
            svd.singular_values,
            rot_u,
            svd.u,
            mu_r=centering.mu_r if full else None,
            rot_v=rot_v if full else None,
        )
        logger.info(f"Recentered factor means: {np.array2string(mu_z, precision=4)}")

    z_rescaled = y_rescaled = None
    if config.rescale:
        assert scaling is not None
        z_base = z_hat if mu_z is None else z_hat + mu_z
        y_base = y_hat if mu_y is None else y_hat + mu_y
        z_rescaled = np.sqrt(scaling.row_weights)[:, np.newaxis] * z_base
        y_rescaled = np.sqrt(scaling.col_weights)[:, np.newaxis] * y_base

    return VspResult(
        z_hat=z_hat,
        y_hat=y_hat,
        b_hat=b_hat,
        singular_values=svd.singular_values,
        rot_u=rot_u,
        rot_v=rot_v,
        u_hat=svd.u,
        v_hat=svd.v,
        config=config,
        centering=centering,
        scaling=scaling,
        mu_z=mu_z,
        mu_y=mu_y,
        z_rescaled=z_rescaled,
        y_rescaled=y_rescaled,
    )
