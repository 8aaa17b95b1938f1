"""Seeded generators for the factor-model families and their moment machinery.

The module is organized into the following functional areas:

Distributions:
  - DistributionSpec: Per-column law of a factor with closed-form raw moments
  - analytic_kurtosis: Kurtosis of a DistributionSpec
  - kurtosis_of_sparse: Kurtosis of ``S * Bernoulli(p)``
  - kurtosis_of_sum: Kurtosis of an independent sum ``X + W``
  - sample_kurtosis: Uncorrected moment ratio of a sample

Model Specifications:
  - FactorModelSpec: Semi-parametric factor model with a noise family
  - SbmSpec / DcSbmSpec / OverlappingSbmSpec / MixedMembershipSpec: Blockmodel variants
  - LdaSpec: Gamma-Poisson topic model
  - load_model_spec: Read a ``key = value`` spec file

Generators:
  - generate_factor_model, generate_sbm, generate_dcsbm,
    generate_overlapping, generate_mixed_membership, generate_lda
  - generate: Dispatch on the spec type

Summaries:
  - compute_density / expected_density: Mean, max and average degree
  - column_distributions / identifiability_flags: Per-column laws and kurtosis flags
"""

import ast
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal, NamedTuple, TypeAlias

import numpy as np
import scipy.linalg
import scipy.stats
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic import ValidationError as PydanticValidationError
from scipy import sparse

from .exceptions import (
    DegenerateDistributionError,
    EdgeProbabilityError,
    ModelSpecError,
    ValidationError,
)
from .sparse_core import SparseMatrix
from .utils import PathLike, logger, make_rng

Family: TypeAlias = Literal[
    "point_mass",
    "bernoulli",
    "scaled_bernoulli",
    "exponential",
    "gamma",
    "uniform",
    "normal",
    "dirichlet",
    "shifted",
]
NoiseFamily: TypeAlias = Literal["gaussian", "poisson", "bernoulli"]

BLOCK_ROWS = 512
BETA_STREAM = 1
MOMENT_RTOL = 1e-10
FULL_RANK_TOL = 1e-10

_PARAM_COUNTS: dict[str, int] = {
    "point_mass": 1,
    "bernoulli": 1,
    "scaled_bernoulli": 1,
    "exponential": 1,
    "gamma": 2,
    "uniform": 2,
    "normal": 2,
    "shifted": 1,
}


# --------------------------------------------------------------------------- distributions


def _literal(node: ast.expr, text: str) -> Any:
    """Evaluate the numeric or list literal of a distribution argument."""
    if isinstance(node, ast.Call):
        return _call_to_dict(node, text)
    try:
        return ast.literal_eval(node)
    except ValueError:
        raise ModelSpecError(f"Cannot parse distribution argument in {text!r}") from None


def _call_to_dict(node: ast.expr, text: str) -> dict[str, Any]:
    if isinstance(node, ast.Name):
        return {"family": node.id}
    if not isinstance(node, ast.Call) or not isinstance(node.func, ast.Name) or node.keywords:
        raise ModelSpecError(f"Expected a call such as 'gamma(2, 0.5)', got {text!r}")
    family = node.func.id
    args = [_literal(arg, text) for arg in node.args]
    if family == "scaled_bernoulli":
        if len(args) != 2 or not isinstance(args[1], dict):
            raise ModelSpecError(f"scaled_bernoulli takes (p, distribution): {text!r}")
        return {"family": family, "params": (args[0],), "base": args[1]}
    if family == "shifted":
        if len(args) != 2 or not isinstance(args[0], dict):
            raise ModelSpecError(f"shifted takes (distribution, c): {text!r}")
        return {"family": family, "params": (args[1],), "base": args[0]}
    if family == "dirichlet":
        if len(args) != 2 or not isinstance(args[0], list | tuple):
            raise ModelSpecError(f"dirichlet takes ([alpha...], component): {text!r}")
        return {"family": family, "params": tuple(args[0]), "component": args[1]}
    return {"family": family, "params": tuple(args)}


def _parse_expression(text: str) -> ast.expr:
    try:
        return ast.parse(text.strip(), mode="eval").body
    except SyntaxError as e:
        raise ModelSpecError(f"Cannot parse distribution {text!r}: {e.msg}") from e


def _binomial_shift(moments: Sequence[float], c: float) -> tuple[float, float, float, float]:
    """Raw moments of ``Y + c`` from raw moments of ``Y``."""
    full = (1.0, *moments)
    return tuple(  # type: ignore[return-value]
        sum(math.comb(m, i) * c ** (m - i) * full[i] for i in range(m + 1)) for m in range(1, 5)
    )


class DistributionSpec(BaseModel):
    """Law of one factor column.

    Strings such as ``"gamma(2.0, 0.5)"`` or ``"scaled_bernoulli(0.1, exponential(1.0))"``
    are accepted wherever a DistributionSpec is expected.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    family: Family
    params: tuple[float, ...] = ()
    base: "DistributionSpec | None" = None
    component: int | None = None

    @model_validator(mode="before")
    @classmethod
    def _coerce_text(cls, data: Any) -> Any:
        if isinstance(data, str):
            return _call_to_dict(_parse_expression(data), data)
        return data

    @model_validator(mode="after")
    def _check_parameters(self) -> "DistributionSpec":
        family, params = self.family, self.params
        if family in _PARAM_COUNTS and len(params) != _PARAM_COUNTS[family]:
            raise ValueError(f"{family} takes {_PARAM_COUNTS[family]} numeric parameter(s)")
        if family in ("scaled_bernoulli", "shifted") and self.base is None:
            raise ValueError(f"{family} needs a base distribution")
        if not all(math.isfinite(p) for p in params):
            raise ValueError("distribution parameters must be finite")
        match family:
            case "bernoulli" | "scaled_bernoulli":
                if not 0.0 <= params[0] <= 1.0:
                    raise ValueError("Bernoulli probability must lie in [0, 1]")
            case "exponential":
                if params[0] <= 0:
                    raise ValueError("exponential rate must be positive")
            case "gamma":
                if params[0] <= 0 or params[1] <= 0:
                    raise ValueError("gamma shape and scale must be positive")
            case "uniform":
                if params[0] >= params[1]:
                    raise ValueError("uniform(a, b) needs a < b")
            case "normal":
                if params[1] < 0:
                    raise ValueError("normal standard deviation must be non-negative")
            case "dirichlet":
                if len(params) < 2 or any(a <= 0 for a in params):
                    raise ValueError("dirichlet needs at least two positive concentrations")
                if self.component is None or not 0 <= self.component < len(params):
                    raise ValueError("dirichlet component index out of range")
        self._self_check()
        return self

    def _self_check(self) -> None:
        reference = self._scipy_reference()
        if reference is None:
            return
        for order, value in enumerate(self.raw_moments, start=1):
            expected = float(reference.moment(order))
            if not math.isclose(value, expected, rel_tol=MOMENT_RTOL, abs_tol=1e-12):
                raise ValueError(
                    f"{self.to_text()}: raw moment {order} is {value!r}, scipy gives {expected!r}"
                )

    def _scipy_reference(self) -> Any:
        p = self.params
        match self.family:
            case "bernoulli" if 0 < p[0] < 1:
                return scipy.stats.bernoulli(p[0])
            case "exponential":
                return scipy.stats.expon(scale=1.0 / p[0])
            case "gamma":
                return scipy.stats.gamma(p[0], scale=p[1])
            case "normal" if p[1] > 0:
                return scipy.stats.norm(p[0], p[1])
            case "dirichlet":
                assert self.component is not None
                a = p[self.component]
                return scipy.stats.beta(a, sum(p) - a)
        return None

    @property
    def raw_moments(self) -> tuple[float, float, float, float]:
        """``(E X, E X^2, E X^3, E X^4)`` in closed form."""
        p = self.params
        match self.family:
            case "point_mass":
                return (p[0], p[0] ** 2, p[0] ** 3, p[0] ** 4)
            case "bernoulli":
                return (p[0],) * 4
            case "scaled_bernoulli":
                assert self.base is not None
                m = self.base.raw_moments
                return (p[0] * m[0], p[0] * m[1], p[0] * m[2], p[0] * m[3])
            case "exponential":
                rate = p[0]
                return tuple(math.factorial(m) / rate**m for m in range(1, 5))  # type: ignore[return-value]
            case "gamma":
                shape, scale = p
                out = []
                rising = 1.0
                for m in range(1, 5):
                    rising *= shape + m - 1
                    out.append(rising * scale**m)
                return tuple(out)  # type: ignore[return-value]
            case "uniform":
                a, b = p
                return tuple(  # type: ignore[return-value]
                    (b ** (m + 1) - a ** (m + 1)) / ((m + 1) * (b - a)) for m in range(1, 5)
                )
            case "normal":
                mu, sd = p
                var = sd * sd
                return (
                    mu,
                    mu * mu + var,
                    mu**3 + 3 * mu * var,
                    mu**4 + 6 * mu * mu * var + 3 * var * var,
                )
            case "dirichlet":
                assert self.component is not None
                a = p[self.component]
                total = sum(p)
                out = []
                ratio = 1.0
                for r in range(4):
                    ratio *= (a + r) / (total + r)
                    out.append(ratio)
                return tuple(out)  # type: ignore[return-value]
            case "shifted":
                assert self.base is not None
                return _binomial_shift(self.base.raw_moments, p[0])
        raise ModelSpecError(f"Unknown family {self.family}")

    @property
    def central_moments(self) -> tuple[float, float, float, float]:
        """``(0, eta_2, eta_3, eta_4)`` from the raw moments."""
        m1, m2, m3, m4 = self.raw_moments
        return (
            0.0,
            m2 - m1 * m1,
            m3 - 3 * m1 * m2 + 2 * m1**3,
            m4 - 4 * m1 * m3 + 6 * m1 * m1 * m2 - 3 * m1**4,
        )

    @property
    def mean(self) -> float:
        return self.raw_moments[0]

    def to_text(self) -> str:
        """Inverse of the string form accepted at construction."""
        numbers = ", ".join(repr(float(p)) for p in self.params)
        match self.family:
            case "scaled_bernoulli":
                assert self.base is not None
                return f"scaled_bernoulli({numbers}, {self.base.to_text()})"
            case "shifted":
                assert self.base is not None
                return f"shifted({self.base.to_text()}, {numbers})"
            case "dirichlet":
                return f"dirichlet([{numbers}], {self.component})"
        return f"{self.family}({numbers})"

    def scaled(self, factor: float) -> "DistributionSpec":
        """Law of ``factor * X`` for positive bounded families."""
        if factor <= 0:
            raise ModelSpecError("scale factor must be positive")
        match self.family:
            case "point_mass":
                return DistributionSpec(family="point_mass", params=(self.params[0] * factor,))
            case "uniform":
                return DistributionSpec(
                    family="uniform", params=(self.params[0] * factor, self.params[1] * factor)
                )
        raise ModelSpecError(f"Cannot rescale a {self.family} distribution")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` iid values."""
        p = self.params
        match self.family:
            case "point_mass":
                return np.full(size, p[0], dtype=np.float64)
            case "bernoulli":
                return (rng.random(size) < p[0]).astype(np.float64)
            case "scaled_bernoulli":
                assert self.base is not None
                mask = rng.random(size) < p[0]
                return self.base.sample(rng, size) * mask
            case "exponential":
                return rng.exponential(1.0 / p[0], size)
            case "gamma":
                return rng.gamma(p[0], p[1], size)
            case "uniform":
                return rng.uniform(p[0], p[1], size)
            case "normal":
                return rng.normal(p[0], p[1], size)
            case "dirichlet":
                assert self.component is not None
                return rng.dirichlet(np.asarray(p), size)[:, self.component]
            case "shifted":
                assert self.base is not None
                return self.base.sample(rng, size) + p[0]
        raise ModelSpecError(f"Unknown family {self.family}")


DistributionSpec.model_rebuild()


def parse_distribution(text: str) -> DistributionSpec:
    """Parse the text form of a distribution, reporting problems as ModelSpecError."""
    try:
        return DistributionSpec.model_validate(text)
    except PydanticValidationError as e:
        raise ModelSpecError(f"Invalid distribution {text!r}: {_summarize(e)}") from e


def parse_distribution_list(text: str) -> list[DistributionSpec]:
    """Parse a single distribution or a bracketed list of distributions."""
    node = _parse_expression(text)
    if isinstance(node, ast.List | ast.Tuple):
        return [parse_distribution(ast.unparse(item)) for item in node.elts]
    return [parse_distribution(text)]


def _kurtosis_from_central(eta2: float, eta4: float, what: str) -> float:
    if not eta2 > 0:
        raise DegenerateDistributionError(f"{what} has zero variance; kurtosis is undefined")
    return eta4 / (eta2 * eta2)


def analytic_kurtosis(dist: DistributionSpec) -> float:
    """Kurtosis ``eta_4 / eta_2^2`` of a distribution.

    Raises:
        DegenerateDistributionError: If the variance is zero

    """
    _, eta2, _, eta4 = dist.central_moments
    return _kurtosis_from_central(eta2, eta4, dist.to_text())


class KurtosisCheck(NamedTuple):
    kurtosis: float
    leptokurtic: bool


def kurtosis_of_sparse(
    p: float, s_moments: Sequence[float] | DistributionSpec
) -> KurtosisCheck:
    """Kurtosis of ``X = S * B`` with ``B ~ Bernoulli(p)`` independent of S.

    Every raw moment of X is ``p`` times the corresponding raw moment of S. Whenever
    ``p < 1/6`` the result exceeds 3 for any nondegenerate S with four moments.

    Args:
        p: Probability of a nonzero entry, in (0, 1)
        s_moments: Raw moments 1..4 of S, or its distribution

    Returns:
        The kurtosis and whether it exceeds 3

    """
    if not 0.0 < p < 1.0:
        raise ModelSpecError(f"p must lie in (0, 1), got {p}")
    moments = s_moments.raw_moments if isinstance(s_moments, DistributionSpec) else s_moments
    if len(moments) != 4:
        raise ModelSpecError("s_moments must hold raw moments 1 through 4")
    if not moments[1] > 0:
        raise DegenerateDistributionError("S is almost surely zero")
    m1, m2, m3, m4 = (p * float(m) for m in moments)
    eta2 = m2 - m1 * m1
    eta4 = m4 - 4 * m1 * m3 + 6 * m1 * m1 * m2 - 3 * m1**4
    kurtosis = _kurtosis_from_central(eta2, eta4, "S * Bernoulli(p)")
    return KurtosisCheck(kurtosis, kurtosis > 3.0)


def kurtosis_of_sum(
    x_central: Sequence[float],
    w_central: Sequence[float],
    epsilon: float | None = None,
) -> KurtosisCheck:
    """Kurtosis of ``X + W`` for independent X (unit variance) and W.

    Central moments add as ``eta_2 = 1 + eta_w2`` and
    ``eta_4 = eta_x4 + 6 eta_w2 + eta_w4``. The flag is the sufficient condition for
    leptokurtosis: ``eta_x4 > 3 (1 + eta_w2)^2``, or, with ``epsilon``,
    ``eta_w2 < epsilon`` and ``eta_x4 >= 3 (1 + epsilon)^2``.

    Args:
        x_central: Central moments 1..4 of X, with ``eta_x2 = 1``
        w_central: Central moments 1..4 of W
        epsilon: Optional noise-variance bound

    Raises:
        ModelSpecError: If ``eta_x2`` is not 1

    """
    if len(x_central) != 4 or len(w_central) != 4:
        raise ModelSpecError("central moments 1 through 4 are required")
    _, x2, _, x4 = (float(m) for m in x_central)
    _, w2, _, w4 = (float(m) for m in w_central)
    if not math.isclose(x2, 1.0, rel_tol=1e-12, abs_tol=1e-12):
        raise ModelSpecError(f"X must be scaled to unit variance, got eta_x2={x2}")
    if w2 < 0 or w4 < 0:
        raise ModelSpecError("even central moments of W must be non-negative")
    kurtosis = (x4 + 6.0 * x2 * w2 + w4) / (x2 + w2) ** 2
    if epsilon is None:
        flag = x4 > 3.0 * (1.0 + w2) ** 2
    else:
        flag = w2 < epsilon and x4 >= 3.0 * (1.0 + epsilon) ** 2
    return KurtosisCheck(kurtosis, flag)


def sample_kurtosis(x: np.ndarray) -> float:
    """Uncorrected sample kurtosis ``m_4 / m_2^2``.

    Raises:
        ValidationError: If fewer than four values are given
        DegenerateDistributionError: If the sample is constant

    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size < 4:
        raise ValidationError(f"sample kurtosis needs at least 4 values, got {x.size}")
    centered = x - x.mean()
    m2 = float(np.mean(centered**2))
    scale = 64 * np.finfo(np.float64).eps * float(np.max(np.abs(x)))
    if m2 <= scale * scale:
        raise DegenerateDistributionError("constant sample; kurtosis is undefined")
    return float(np.mean(centered**4)) / (m2 * m2)


# --------------------------------------------------------------------------- specs


def _check_square(b: np.ndarray, k: int) -> None:
    if b.shape != (k, k):
        raise ValueError(f"b must be {k}x{k}, got {b.shape}")


def _check_probability_vector(pi: Sequence[float], k: int) -> None:
    if len(pi) != k:
        raise ValueError(f"pi must have {k} entries")
    if any(p <= 0 for p in pi) or not math.isclose(sum(pi), 1.0, abs_tol=1e-9):
        raise ValueError("pi must be a positive probability vector summing to 1")


class _SpecBase(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    @property
    def b_matrix(self) -> np.ndarray:
        return np.asarray(getattr(self, "b"), dtype=np.float64)


class FactorModelSpec(_SpecBase):
    """Semi-parametric factor model ``E(A | Z, Y) = rho Z B Y^T``."""

    n: int = Field(ge=1)
    d: int = Field(ge=1)
    k: int = Field(ge=1)
    b: tuple[tuple[float, ...], ...]
    z_dist: tuple[DistributionSpec, ...]
    y_dist: tuple[DistributionSpec, ...]
    noise: NoiseFamily = "poisson"
    noise_sd: float = Field(default=0.0, ge=0)
    rho: float = Field(default=1.0, gt=0)

    @model_validator(mode="before")
    @classmethod
    def _expand_shorthand(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        k = data.get("k")
        for key in ("z_dist", "y_dist"):
            value = data.get(key)
            if isinstance(value, str):
                value = parse_distribution_list(value)
            if isinstance(value, DistributionSpec | dict):
                value = [value]
            if isinstance(value, list | tuple) and len(value) == 1 and isinstance(k, int):
                value = list(value) * k
            if value is not None:
                data[key] = value
        noise = data.get("noise")
        if isinstance(noise, str) and "(" in noise:
            node = _parse_expression(noise)
            if (
                not isinstance(node, ast.Call)
                or not isinstance(node.func, ast.Name)
                or node.func.id != "gaussian"
                or len(node.args) != 1
            ):
                raise ValueError(f"noise must be gaussian(sd), poisson or bernoulli: {noise!r}")
            data["noise"] = "gaussian"
            data["noise_sd"] = ast.literal_eval(node.args[0])
        return data

    @model_validator(mode="after")
    def _check_shapes(self) -> "FactorModelSpec":
        _check_square(self.b_matrix, self.k)
        if len(self.z_dist) != self.k or len(self.y_dist) != self.k:
            raise ValueError(f"z_dist and y_dist need one distribution per factor ({self.k})")
        if scipy.linalg.svdvals(self.b_matrix).min() <= FULL_RANK_TOL:
            raise ValueError("b must have full rank")
        return self


class SbmSpec(_SpecBase):
    """Stochastic blockmodel with one-hot memberships."""

    n: int = Field(ge=2)
    k: int = Field(ge=1)
    pi: tuple[float, ...]
    b: tuple[tuple[float, ...], ...]
    rho: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _check_shapes(self) -> "SbmSpec":
        _check_probability_vector(self.pi, self.k)
        _check_square(self.b_matrix, self.k)
        if np.any(self.b_matrix < 0):
            raise ValueError("b must be nonnegative")
        return self


class DcSbmSpec(SbmSpec):
    """Degree-corrected blockmodel; theta is rescaled so that ``E(Z_ij^2) = 1``."""

    theta_dist: DistributionSpec = Field(
        default_factory=lambda: DistributionSpec(family="point_mass", params=(1.0,))
    )

    @field_validator("theta_dist")
    @classmethod
    def _check_theta(cls, value: DistributionSpec) -> DistributionSpec:
        positive_bounded = (value.family == "point_mass" and value.params[0] > 0) or (
            value.family == "uniform" and value.params[0] > 0
        )
        if not positive_bounded:
            raise ValueError("theta_dist must be a positive bounded law (point_mass or uniform)")
        return value

    def theta_scale(self, block: int) -> float:
        """Divisor ``sqrt(pi_j E theta^2)`` applied to theta in block j."""
        return math.sqrt(self.pi[block] * self.theta_dist.raw_moments[1])


class OverlappingSbmSpec(_SpecBase):
    """Overlapping blockmodel: ``Z_ij ~ Bernoulli(p_j)`` independently."""

    n: int = Field(ge=2)
    k: int = Field(ge=1)
    p: tuple[float, ...]
    b: tuple[tuple[float, ...], ...]
    rho: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _check_shapes(self) -> "OverlappingSbmSpec":
        if len(self.p) != self.k or any(not 0 < q < 1 for q in self.p):
            raise ValueError(f"p must hold {self.k} probabilities in (0, 1)")
        _check_square(self.b_matrix, self.k)
        return self


class MixedMembershipSpec(_SpecBase):
    """Mixed-membership blockmodel: rows of Z are Dirichlet(alpha)."""

    n: int = Field(ge=2)
    k: int = Field(ge=2)
    alpha: tuple[float, ...]
    b: tuple[tuple[float, ...], ...]
    rho: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _check_shapes(self) -> "MixedMembershipSpec":
        if len(self.alpha) != self.k or any(a <= 0 for a in self.alpha):
            raise ValueError(f"alpha must hold {self.k} positive concentrations")
        _check_square(self.b_matrix, self.k)
        return self


class LdaSpec(BaseModel):
    """Gamma-Poisson topic model.

    ``beta`` is a d x k column-stochastic topic matrix; when omitted it is drawn from
    Dirichlet(``beta_concentration``) columns by :func:`resolve_beta`.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(ge=1)
    d: int = Field(ge=1)
    k: int = Field(ge=1)
    alpha: tuple[float, ...]
    s: float = Field(gt=0)
    beta: tuple[tuple[float, ...], ...] | None = None
    beta_concentration: float = Field(default=0.1, gt=0)

    @model_validator(mode="after")
    def _check_shapes(self) -> "LdaSpec":
        if len(self.alpha) != self.k or any(a <= 0 for a in self.alpha):
            raise ValueError(f"alpha must hold {self.k} positive values")
        if self.beta is not None:
            beta = np.asarray(self.beta, dtype=np.float64)
            if beta.shape != (self.d, self.k):
                raise ValueError(f"beta must be {self.d}x{self.k}, got {beta.shape}")
            if np.any(beta < 0) or not np.allclose(beta.sum(axis=0), 1.0, atol=1e-9):
                raise ValueError("beta columns must be nonnegative and sum to 1")
        return self


ModelSpec: TypeAlias = (
    FactorModelSpec | SbmSpec | DcSbmSpec | OverlappingSbmSpec | MixedMembershipSpec | LdaSpec
)

MODEL_SPECS: dict[str, type[BaseModel]] = {
    "factor": FactorModelSpec,
    "sbm": SbmSpec,
    "dcsbm": DcSbmSpec,
    "overlap": OverlappingSbmSpec,
    "mixed": MixedMembershipSpec,
    "lda": LdaSpec,
}

_RAW_TEXT_KEYS = {"z_dist", "y_dist", "theta_dist", "noise"}


def _summarize(error: PydanticValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(p) for p in err['loc']) or 'spec'}: {err['msg']}" for err in error.errors()
    )


def parse_spec_text(text: str, source: str = "<spec>") -> dict[str, Any]:
    """Parse ``key = value`` lines; values are YAML flow literals except distributions."""
    values: dict[str, Any] = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(" #", 1)[0].strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ModelSpecError(f"{source}:{line_number}: expected 'key = value'")
        if key in values:
            raise ModelSpecError(f"{source}:{line_number}: duplicate key '{key}'")
        if key in _RAW_TEXT_KEYS:
            values[key] = value
            continue
        try:
            values[key] = yaml.safe_load(value)
        except yaml.YAMLError as e:
            raise ModelSpecError(f"{source}:{line_number}: cannot parse value of '{key}'") from e
    return values


def build_model_spec(model: str, values: dict[str, Any]) -> ModelSpec:
    """Validate parsed values against the spec class of ``model``."""
    if model not in MODEL_SPECS:
        raise ModelSpecError(f"Unknown model '{model}'; choose from {sorted(MODEL_SPECS)}")
    try:
        return MODEL_SPECS[model].model_validate(values)  # type: ignore[return-value]
    except PydanticValidationError as e:
        raise ModelSpecError(f"Invalid {model} spec: {_summarize(e)}") from e
    except ValueError as e:
        raise ModelSpecError(f"Invalid {model} spec: {e}") from e


def load_model_spec(path: PathLike, model: str) -> ModelSpec:
    """Read and validate a spec file for ``model``.

    Raises:
        ModelSpecError: If the file cannot be read, parsed or validated

    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise ModelSpecError(f"Cannot read spec file {path}: {e}") from e
    return build_model_spec(model, parse_spec_text(text, str(path)))


# --------------------------------------------------------------------------- generators


@dataclass(frozen=True, eq=False)
class GeneratedData:
    """Sampled matrix with its true factors; ``extras`` holds model-specific arrays."""

    a: SparseMatrix
    z: np.ndarray
    y: np.ndarray | None = None
    extras: dict[str, np.ndarray] = field(default_factory=dict)


def _first_violation(
    probs: np.ndarray, valid: np.ndarray, row_offset: int
) -> tuple[int, int, float] | None:
    bad = valid & ((probs < 0) | (probs > 1))
    if not np.any(bad):
        return None
    i, j = np.argwhere(bad)[0]
    return int(i) + row_offset, int(j), float(probs[i, j])


def _sample_symmetric_bernoulli(
    z: np.ndarray, b: np.ndarray, rho: float, rng: np.random.Generator
) -> SparseMatrix:
    """Sample the upper triangle of a graph with mean ``rho Z B Z^T`` and mirror it."""
    n = z.shape[0]
    zb = rho * (z @ b)
    cols = np.arange(n)
    rows_out: list[np.ndarray] = []
    cols_out: list[np.ndarray] = []
    for start in range(0, n, BLOCK_ROWS):
        stop = min(start + BLOCK_ROWS, n)
        probs = zb[start:stop] @ z.T
        upper = cols[np.newaxis, :] > np.arange(start, stop)[:, np.newaxis]
        violation = _first_violation(probs, upper, start)
        if violation is not None:
            raise EdgeProbabilityError(*violation)
        edges = (rng.random(probs.shape) < probs) & upper
        r, c = np.nonzero(edges)
        rows_out.append(r + start)
        cols_out.append(c)
    r = np.concatenate(rows_out) if rows_out else np.empty(0, dtype=np.int64)
    c = np.concatenate(cols_out) if cols_out else np.empty(0, dtype=np.int64)
    both_r = np.concatenate([r, c])
    both_c = np.concatenate([c, r])
    logger.debug(f"Sampled symmetric graph on {n} nodes with {r.size} edges")
    adjacency = sparse.coo_matrix((np.ones(both_r.size), (both_r, both_c)), shape=(n, n))
    return SparseMatrix.from_scipy(adjacency)


def _one_hot(labels: np.ndarray, k: int, weights: np.ndarray | None = None) -> np.ndarray:
    z = np.zeros((labels.shape[0], k))
    z[np.arange(labels.shape[0]), labels] = 1.0 if weights is None else weights
    return z


def generate_factor_model(
    spec: FactorModelSpec, seed: int
) -> tuple[SparseMatrix, np.ndarray, np.ndarray]:
    """Sample ``(A, Z, Y)`` with ``E(A | Z, Y) = rho Z B Y^T``.

    Raises:
        EdgeProbabilityError: Bernoulli noise with a mean outside [0, 1]
        ModelSpecError: Poisson noise with a negative mean

    """
    rng = make_rng(seed)
    z = np.column_stack([dist.sample(rng, spec.n) for dist in spec.z_dist])
    y = np.column_stack([dist.sample(rng, spec.d) for dist in spec.y_dist])
    zb = spec.rho * (z @ spec.b_matrix)
    blocks = []
    for start in range(0, spec.n, BLOCK_ROWS):
        stop = min(start + BLOCK_ROWS, spec.n)
        mean = zb[start:stop] @ y.T
        if spec.noise == "gaussian":
            block = mean + spec.noise_sd * rng.standard_normal(mean.shape) if spec.noise_sd else mean
        elif spec.noise == "poisson":
            if np.any(mean < 0):
                i, j = np.argwhere(mean < 0)[0]
                raise ModelSpecError(
                    f"Poisson mean {mean[i, j]:.6g} at ({int(i) + start}, {int(j)}) is negative"
                )
            block = rng.poisson(mean).astype(np.float64)
        else:
            violation = _first_violation(mean, np.ones(mean.shape, dtype=bool), start)
            if violation is not None:
                raise EdgeProbabilityError(*violation)
            block = (rng.random(mean.shape) < mean).astype(np.float64)
        blocks.append(sparse.csr_matrix(block))
    a = SparseMatrix.from_scipy(sparse.vstack(blocks, format="csr"))
    logger.info(f"Generated factor model {spec.n}x{spec.d} with {a.nnz} stored entries")
    return a, z, y


def generate_sbm(spec: SbmSpec, seed: int) -> tuple[SparseMatrix, np.ndarray]:
    """Sample a blockmodel graph with one-hot memberships drawn from ``pi``."""
    rng = make_rng(seed)
    labels = rng.choice(spec.k, size=spec.n, p=np.asarray(spec.pi))
    z = _one_hot(labels, spec.k)
    return _sample_symmetric_bernoulli(z, spec.b_matrix, spec.rho, rng), z


def generate_dcsbm(spec: DcSbmSpec, seed: int) -> tuple[SparseMatrix, np.ndarray]:
    """Sample a degree-corrected blockmodel graph.

    ``Z[i, z(i)] = theta_i / sqrt(pi_z(i) E theta^2)`` so every column has unit second
    moment in distribution.
    """
    rng = make_rng(seed)
    labels = rng.choice(spec.k, size=spec.n, p=np.asarray(spec.pi))
    theta = spec.theta_dist.sample(rng, spec.n)
    scales = np.array([spec.theta_scale(j) for j in range(spec.k)])
    z = _one_hot(labels, spec.k, theta / scales[labels])
    return _sample_symmetric_bernoulli(z, spec.b_matrix, spec.rho, rng), z


def generate_overlapping(spec: OverlappingSbmSpec, seed: int) -> tuple[SparseMatrix, np.ndarray]:
    """Sample an overlapping blockmodel graph with ``Z_ij ~ Bernoulli(p_j)``."""
    rng = make_rng(seed)
    z = (rng.random((spec.n, spec.k)) < np.asarray(spec.p)).astype(np.float64)
    return _sample_symmetric_bernoulli(z, spec.b_matrix, spec.rho, rng), z


def generate_mixed_membership(
    spec: MixedMembershipSpec, seed: int
) -> tuple[SparseMatrix, np.ndarray]:
    """Sample a mixed-membership graph with Dirichlet(alpha) rows of Z."""
    rng = make_rng(seed)
    z = rng.dirichlet(np.asarray(spec.alpha), size=spec.n)
    z /= z.sum(axis=1, keepdims=True)
    return _sample_symmetric_bernoulli(z, spec.b_matrix, spec.rho, rng), z


def resolve_beta(spec: LdaSpec, seed: int) -> np.ndarray:
    """Topic matrix of ``spec``, drawn from a dedicated stream when not given."""
    if spec.beta is not None:
        return np.asarray(spec.beta, dtype=np.float64)
    rng = make_rng(seed, BETA_STREAM)
    beta = rng.dirichlet(np.full(spec.d, spec.beta_concentration), size=spec.k).T
    return beta / beta.sum(axis=0, keepdims=True)


class LdaSample(NamedTuple):
    a: SparseMatrix
    z_star: np.ndarray
    xi: np.ndarray
    z: np.ndarray
    beta: np.ndarray


def generate_lda(spec: LdaSpec, seed: int) -> LdaSample:
    """Sample documents from the Gamma-Poisson topic model.

    ``X_ij ~ Gamma(alpha_j, s)`` independently, ``xi_i = sum_j X_ij``,
    ``Z_i = X_i / xi_i`` and ``A_ij ~ Poisson((X beta^T)_ij)``. The whitened factors are
    ``z_star = X Sigma^-1/2`` with ``Sigma_jj = alpha_j s^2``.
    """
    beta = resolve_beta(spec, seed)
    sigma_min = float(scipy.linalg.svdvals(beta).min())
    if sigma_min < 1e-8:
        logger.warning(f"Topic matrix is nearly rank deficient (sigma_min={sigma_min:.3g})")
    rng = make_rng(seed)
    alpha = np.asarray(spec.alpha, dtype=np.float64)
    x = rng.gamma(alpha, spec.s, size=(spec.n, spec.k))
    xi = x.sum(axis=1)
    z = x / xi[:, np.newaxis]
    blocks = []
    for start in range(0, spec.n, BLOCK_ROWS):
        stop = min(start + BLOCK_ROWS, spec.n)
        blocks.append(sparse.csr_matrix(rng.poisson(x[start:stop] @ beta.T).astype(np.float64)))
    a = SparseMatrix.from_scipy(sparse.vstack(blocks, format="csr"))
    z_star = x / np.sqrt(alpha * spec.s**2)
    logger.info(f"Generated {spec.n} documents over {spec.d} terms ({a.nnz} stored entries)")
    return LdaSample(a=a, z_star=z_star, xi=xi, z=z, beta=beta)


def generate(spec: ModelSpec, seed: int) -> GeneratedData:
    """Run the generator that matches the type of ``spec``."""
    if isinstance(spec, FactorModelSpec):
        a, z, y = generate_factor_model(spec, seed)
        return GeneratedData(a, z, y)
    if isinstance(spec, DcSbmSpec):
        return GeneratedData(*generate_dcsbm(spec, seed))
    if isinstance(spec, SbmSpec):
        return GeneratedData(*generate_sbm(spec, seed))
    if isinstance(spec, OverlappingSbmSpec):
        return GeneratedData(*generate_overlapping(spec, seed))
    if isinstance(spec, MixedMembershipSpec):
        return GeneratedData(*generate_mixed_membership(spec, seed))
    sample = generate_lda(spec, seed)
    return GeneratedData(
        sample.a,
        sample.z_star - sample.z_star.mean(axis=0),
        None,
        {"z_star": sample.z_star, "xi": sample.xi, "z_mixture": sample.z, "beta": sample.beta},
    )


# --------------------------------------------------------------------------- summaries


class DensitySummary(NamedTuple):
    rho: float
    rho_bar: float
    delta: float


def compute_density(m: SparseMatrix | np.ndarray | sparse.spmatrix) -> DensitySummary:
    """Grand mean, maximum absolute entry and ``n_rows * mean`` of a matrix."""
    if isinstance(m, SparseMatrix):
        n, d = m.shape
        values = m.values
    elif sparse.issparse(m):
        n, d = m.shape
        values = sparse.csr_matrix(m).data
    else:
        dense = np.asarray(m, dtype=np.float64)
        n, d = dense.shape
        values = dense.ravel()
    if n * d == 0:
        return DensitySummary(0.0, 0.0, 0.0)
    rho = float(values.sum()) / (n * d)
    rho_bar = float(np.max(np.abs(values))) if values.size else 0.0
    return DensitySummary(rho, rho_bar, n * rho)


def expected_density(
    z: np.ndarray, b: np.ndarray, y: np.ndarray | None = None, rho: float = 1.0,
    include_max: bool = True,
) -> DensitySummary:
    """Density of the expectation ``rho Z B Y^T`` without forming it for the mean.

    The mean is ``rho (1^T Z) B (Y^T 1) / (n d)``; the maximum, when requested, is
    taken over row blocks of the expectation.
    """
    y = z if y is None else y
    n, d = z.shape[0], y.shape[0]
    mean = rho * float(z.sum(axis=0) @ b @ y.sum(axis=0)) / (n * d)
    rho_bar = 0.0
    if include_max:
        zb = rho * (z @ b)
        for start in range(0, n, BLOCK_ROWS):
            block = zb[start : start + BLOCK_ROWS] @ y.T
            rho_bar = max(rho_bar, float(np.max(np.abs(block))))
    return DensitySummary(mean, rho_bar, n * mean)


def column_distributions(spec: ModelSpec) -> list[DistributionSpec]:
    """Marginal law of every column of the true factor matrix Z."""
    if isinstance(spec, FactorModelSpec):
        return list(spec.z_dist)
    if isinstance(spec, DcSbmSpec):
        return [
            DistributionSpec(
                family="scaled_bernoulli",
                params=(spec.pi[j],),
                base=spec.theta_dist.scaled(1.0 / spec.theta_scale(j)),
            )
            for j in range(spec.k)
        ]
    if isinstance(spec, SbmSpec):
        return [DistributionSpec(family="bernoulli", params=(p,)) for p in spec.pi]
    if isinstance(spec, OverlappingSbmSpec):
        return [DistributionSpec(family="bernoulli", params=(p,)) for p in spec.p]
    if isinstance(spec, MixedMembershipSpec):
        return [
            DistributionSpec(family="dirichlet", params=spec.alpha, component=j)
            for j in range(spec.k)
        ]
    return [DistributionSpec(family="gamma", params=(a, spec.s)) for a in spec.alpha]


class ColumnIdentifiability(NamedTuple):
    distribution: str
    kurtosis: float
    identifiable: bool


def identifiability_flags(spec: ModelSpec) -> list[ColumnIdentifiability]:
    """Analytic kurtosis of every factor column and whether it exceeds 3."""
    flags = []
    for dist in column_distributions(spec):
        try:
            kurtosis = analytic_kurtosis(dist)
        except DegenerateDistributionError:
            kurtosis = math.nan
        flags.append(ColumnIdentifiability(dist.to_text(), kurtosis, bool(kurtosis > 3.0)))
    return flags
