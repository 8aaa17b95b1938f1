"""Sparse matrix storage, file I/O and implicit linear operators.

The observed data matrix is held in compressed sparse row form and is never
densified by the decomposition: centering and degree scaling are applied lazily
through the operators defined here.

The module is organized into the following functional areas:

Type Definitions:
  - SparseMatrix: Immutable CSR matrix with validated structure
  - CenteringStats: Row, column and grand means of a matrix
  - ScalingStats: Row and column degrees plus their mean regularizers
  - ImplicitOperator: scipy LinearOperator composing a matrix with optional centering

File I/O:
  - load_matrix_market: Read a MatrixMarket coordinate file
  - load_triplets: Read 0-indexed TSV triplets with a ``#rows cols`` header
  - load_matrix: Dispatch on the file suffix
  - write_matrix_market: Write a MatrixMarket coordinate file
  - write_triplets: Write 0-indexed TSV triplets

Statistics and Operators:
  - compute_centering_stats: Means used by the implicit centering
  - compute_scaling_stats: Degrees used by the regularized normalization
  - scale_matrix: Build the degree-normalized matrix
  - centered_matvec / centered_rmatvec: Products with the centered matrix
  - build_operator: Compose scaling and centering into one operator
  - materialize_dense: Dense copy of a small operator (test oracle)
"""

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Literal, TypeAlias

import numpy as np
import scipy.io
from scipy import sparse
from scipy.sparse.linalg import LinearOperator

from .exceptions import (
    ConfigurationError,
    DimensionMismatchError,
    MatrixFormatError,
    ScalingError,
    SizeGuardError,
    ValidationError,
)
from .utils import PathLike, logger

CenterMode: TypeAlias = Literal["full", "column_only"]

DENSE_GUARD = 10**6
MATRIX_MARKET_SUFFIXES = {".mtx", ".mm"}
TRIPLET_SUFFIXES = {".tsv", ".txt", ".triplets"}


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """A real matrix in compressed sparse row layout.

    Attributes:
        n_rows: Number of rows
        n_cols: Number of columns
        row_offsets: Offsets into ``col_indices``/``values`` (length ``n_rows + 1``)
        col_indices: Column of each stored entry, strictly increasing within a row
        values: Finite value of each stored entry

    """

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        """Coerce the arrays to 64-bit types and check the CSR invariants."""
        offsets = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        cols = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        object.__setattr__(self, "row_offsets", offsets)
        object.__setattr__(self, "col_indices", cols)
        object.__setattr__(self, "values", vals)

        if self.n_rows < 0 or self.n_cols < 0:
            raise ValidationError("matrix dimensions must be non-negative")
        if offsets.shape != (self.n_rows + 1,):
            raise ValidationError(
                f"row_offsets must have length {self.n_rows + 1}, got {offsets.shape[0]}"
            )
        nnz = cols.shape[0]
        if vals.shape != (nnz,):
            raise ValidationError("col_indices and values must have the same length")
        if offsets[0] != 0 or offsets[-1] != nnz:
            raise ValidationError("row_offsets must start at 0 and end at nnz")
        if np.any(np.diff(offsets) < 0):
            raise ValidationError("row_offsets must be nondecreasing")
        if nnz:
            if cols.min() < 0 or cols.max() >= self.n_cols:
                raise ValidationError("column index out of range")
            row_ids = np.repeat(np.arange(self.n_rows), np.diff(offsets))
            same_row = row_ids[1:] == row_ids[:-1]
            if np.any(np.diff(cols)[same_row] <= 0):
                raise ValidationError("column indices must be strictly increasing within a row")
            if not np.all(np.isfinite(vals)):
                raise ValidationError("matrix values must be finite")

    @classmethod
    def from_scipy(cls, m: sparse.spmatrix) -> "SparseMatrix":
        """Build from any scipy sparse matrix, summing duplicate entries."""
        csr = sparse.csr_matrix(m, dtype=np.float64, copy=True)
        csr.sum_duplicates()
        csr.sort_indices()
        n_rows, n_cols = csr.shape
        return cls(n_rows, n_cols, csr.indptr, csr.indices, csr.data)

    @classmethod
    def from_dense(cls, m: np.ndarray) -> "SparseMatrix":
        """Build from a dense 2-D array; zeros are not stored."""
        dense = np.asarray(m, dtype=np.float64)
        if dense.ndim != 2:
            raise DimensionMismatchError("dense matrix", "2-D array", f"{dense.ndim}-D array")
        return cls.from_scipy(sparse.csr_matrix(dense))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return int(self.values.shape[0])

    @cached_property
    def row_ids(self) -> np.ndarray:
        """Row index of every stored entry."""
        return np.repeat(np.arange(self.n_rows, dtype=np.int64), np.diff(self.row_offsets))

    @cached_property
    def csr(self) -> sparse.csr_matrix:
        """scipy view of the matrix, built once."""
        return sparse.csr_matrix(
            (self.values, self.col_indices, self.row_offsets), shape=self.shape
        )

    def to_scipy(self) -> sparse.csr_matrix:
        return self.csr

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Return ``A @ x`` for a vector or a block of column vectors."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.n_cols:
            raise DimensionMismatchError("matvec input", self.n_cols, x.shape[0])
        return np.asarray(self.csr @ x)

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        """Return ``A.T @ y`` by scattering the CSR rows; no CSC copy is kept."""
        y = np.asarray(y, dtype=np.float64)
        if y.shape[0] != self.n_rows:
            raise DimensionMismatchError("rmatvec input", self.n_rows, y.shape[0])
        return np.asarray(self.csr.T @ y)


@dataclass(frozen=True, eq=False)
class CenteringStats:
    """Row, column and grand means of a matrix."""

    mu_r: np.ndarray
    mu_c: np.ndarray
    mu_grand: float

    def __post_init__(self) -> None:
        mu_r = np.asarray(self.mu_r, dtype=np.float64)
        mu_c = np.asarray(self.mu_c, dtype=np.float64)
        object.__setattr__(self, "mu_r", mu_r)
        object.__setattr__(self, "mu_c", mu_c)
        object.__setattr__(self, "mu_grand", float(self.mu_grand))
        if mu_r.size == 0 or mu_c.size == 0:
            raise ValidationError("centering statistics need at least one row and one column")
        magnitude = max(float(np.mean(np.abs(mu_r))), float(np.mean(np.abs(mu_c))))
        tolerance = 1e-12 * magnitude + 1e-300
        if (
            abs(float(mu_r.mean()) - self.mu_grand) > tolerance
            or abs(float(mu_c.mean()) - self.mu_grand) > tolerance
        ):
            raise ValidationError(
                "row, column and grand means are inconsistent",
                {"mean_mu_r": float(mu_r.mean()), "mean_mu_c": float(mu_c.mean())},
            )

    @property
    def n_rows(self) -> int:
        return int(self.mu_r.shape[0])

    @property
    def n_cols(self) -> int:
        return int(self.mu_c.shape[0])


@dataclass(frozen=True, eq=False)
class ScalingStats:
    """Degrees and regularizers of the normalization ``D_r^-1/2 A D_c^-1/2``.

    ``D_r = diag(deg_r + tau_r)`` and ``D_c = diag(deg_c + tau_c)`` where each tau is
    the mean degree on its side.
    """

    deg_r: np.ndarray
    deg_c: np.ndarray
    tau_r: float
    tau_c: float

    def __post_init__(self) -> None:
        deg_r = np.asarray(self.deg_r, dtype=np.float64)
        deg_c = np.asarray(self.deg_c, dtype=np.float64)
        object.__setattr__(self, "deg_r", deg_r)
        object.__setattr__(self, "deg_c", deg_c)
        object.__setattr__(self, "tau_r", float(self.tau_r))
        object.__setattr__(self, "tau_c", float(self.tau_c))
        if not math.isclose(self.tau_r, float(deg_r.mean()), rel_tol=1e-12, abs_tol=1e-300):
            raise ValidationError("tau_r must equal the mean row degree")
        if not math.isclose(self.tau_c, float(deg_c.mean()), rel_tol=1e-12, abs_tol=1e-300):
            raise ValidationError("tau_c must equal the mean column degree")

    @property
    def row_weights(self) -> np.ndarray:
        """Regularized row degrees ``deg_r + tau_r``."""
        return self.deg_r + self.tau_r

    @property
    def col_weights(self) -> np.ndarray:
        """Regularized column degrees ``deg_c + tau_c``."""
        return self.deg_c + self.tau_c


# --------------------------------------------------------------------------- file I/O


def _read_lines(path: Path) -> list[str]:
    try:
        return path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise MatrixFormatError(str(path), None, f"cannot read file: {e}") from e


def _parse_index(token: str, limit: int, path: Path, line_number: int, base: int) -> int:
    try:
        index = int(token)
    except ValueError:
        raise MatrixFormatError(str(path), line_number, f"invalid index {token!r}") from None
    if not base <= index < limit + base:
        raise MatrixFormatError(
            str(path),
            line_number,
            f"index {index} out of range [{base}, {limit + base - 1}]",
        )
    return index - base


def _parse_value(token: str, path: Path, line_number: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise MatrixFormatError(str(path), line_number, f"invalid value {token!r}") from None
    if not math.isfinite(value):
        raise MatrixFormatError(str(path), line_number, f"non-finite value {token!r}")
    return value


def load_matrix_market(path: PathLike) -> SparseMatrix:
    """Read a MatrixMarket coordinate file.

    Supports ``real``, ``integer`` and ``pattern`` fields with ``general`` or
    ``symmetric`` storage. Symmetric files are expanded to full storage and
    duplicate coordinates are summed.

    Args:
        path: Path of the ``.mtx`` file

    Returns:
        The parsed matrix

    Raises:
        MatrixFormatError: If the header, the size line or an entry is malformed,
            an index is out of range, or the entry count disagrees with the header

    """
    path = Path(path)
    lines = _read_lines(path)
    if not lines:
        raise MatrixFormatError(str(path), None, "empty file")

    header = lines[0].strip().split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket":
        raise MatrixFormatError(str(path), 1, "missing %%MatrixMarket header")
    obj, fmt, field, symmetry = (token.lower() for token in header[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise MatrixFormatError(str(path), 1, f"unsupported format '{obj} {fmt}'")
    if field not in {"real", "integer", "pattern"}:
        raise MatrixFormatError(str(path), 1, f"unsupported field '{field}'")
    if symmetry not in {"general", "symmetric"}:
        raise MatrixFormatError(str(path), 1, f"unsupported symmetry '{symmetry}'")

    line_iter = iter(enumerate(lines[1:], start=2))
    size_line: tuple[int, list[str]] | None = None
    for line_number, line in line_iter:
        stripped = line.strip()
        if stripped and not stripped.startswith("%"):
            size_line = (line_number, stripped.split())
            break
    if size_line is None:
        raise MatrixFormatError(str(path), None, "missing size line")
    size_number, size_tokens = size_line
    if len(size_tokens) != 3:
        raise MatrixFormatError(str(path), size_number, "size line must be 'rows cols entries'")
    try:
        n_rows, n_cols, declared = (int(token) for token in size_tokens)
    except ValueError:
        raise MatrixFormatError(str(path), size_number, "non-integer size line") from None
    if n_rows < 0 or n_cols < 0 or declared < 0:
        raise MatrixFormatError(str(path), size_number, "negative size")
    if symmetry == "symmetric" and n_rows != n_cols:
        raise MatrixFormatError(str(path), size_number, "symmetric matrix must be square")

    expected_tokens = 2 if field == "pattern" else 3
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for line_number, line in line_iter:
        stripped = line.strip()
        if not stripped or stripped.startswith("%"):
            continue
        if len(rows) == declared:
            raise MatrixFormatError(
                str(path), line_number, f"more entries than the {declared} declared"
            )
        tokens = stripped.split()
        if len(tokens) != expected_tokens:
            raise MatrixFormatError(
                str(path), line_number, f"expected {expected_tokens} fields, got {len(tokens)}"
            )
        rows.append(_parse_index(tokens[0], n_rows, path, line_number, base=1))
        cols.append(_parse_index(tokens[1], n_cols, path, line_number, base=1))
        vals.append(1.0 if field == "pattern" else _parse_value(tokens[2], path, line_number))

    if len(rows) != declared:
        raise MatrixFormatError(
            str(path), None, f"header declares {declared} entries but {len(rows)} were found"
        )

    r = np.asarray(rows, dtype=np.int64)
    c = np.asarray(cols, dtype=np.int64)
    v = np.asarray(vals, dtype=np.float64)
    if symmetry == "symmetric":
        off_diagonal = r != c
        logger.warning(
            f"{path}: expanding symmetric storage ({int(off_diagonal.sum())} mirrored entries)"
        )
        r, c, v = (
            np.concatenate([r, c[off_diagonal]]),
            np.concatenate([c, r[off_diagonal]]),
            np.concatenate([v, v[off_diagonal]]),
        )

    matrix = SparseMatrix.from_scipy(sparse.coo_matrix((v, (r, c)), shape=(n_rows, n_cols)))
    logger.debug(f"Loaded {path}: {n_rows}x{n_cols}, {matrix.nnz} stored entries")
    return matrix


def load_triplets(path: PathLike) -> SparseMatrix:
    """Read 0-indexed ``row<TAB>col<TAB>value`` lines preceded by a ``#rows cols`` header.

    Raises:
        MatrixFormatError: On a missing header, malformed lines or out-of-range indices

    """
    path = Path(path)
    lines = _read_lines(path)
    shape: tuple[int, int] | None = None
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for line_number, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if shape is None:
            if not stripped.startswith("#"):
                raise MatrixFormatError(str(path), line_number, "missing '#rows cols' header")
            tokens = stripped.lstrip("#").split()
            try:
                n_rows, n_cols = (int(token) for token in tokens)
            except ValueError:
                raise MatrixFormatError(
                    str(path), line_number, "header must be '#rows cols'"
                ) from None
            shape = (n_rows, n_cols)
            continue
        if stripped.startswith("#"):
            continue
        tokens = stripped.split()
        if len(tokens) != 3:
            raise MatrixFormatError(str(path), line_number, f"expected 3 fields, got {len(tokens)}")
        rows.append(_parse_index(tokens[0], shape[0], path, line_number, base=0))
        cols.append(_parse_index(tokens[1], shape[1], path, line_number, base=0))
        vals.append(_parse_value(tokens[2], path, line_number))
    if shape is None:
        raise MatrixFormatError(str(path), None, "missing '#rows cols' header")
    coo = sparse.coo_matrix(
        (np.asarray(vals, dtype=np.float64), (np.asarray(rows), np.asarray(cols))), shape=shape
    )
    return SparseMatrix.from_scipy(coo)


def load_matrix(path: PathLike) -> SparseMatrix:
    """Load a matrix, choosing the reader from the suffix or the first line."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in MATRIX_MARKET_SUFFIXES:
        return load_matrix_market(path)
    if suffix in TRIPLET_SUFFIXES:
        return load_triplets(path)
    lines = _read_lines(path)
    if lines and lines[0].lower().startswith("%%matrixmarket"):
        return load_matrix_market(path)
    return load_triplets(path)


def write_matrix_market(a: SparseMatrix, path: PathLike, comment: str = "") -> Path:
    """Write ``a`` as a general real MatrixMarket coordinate file (17 significant digits)."""
    path = Path(path)
    # mmwrite appends ".mtx" to string targets without that suffix; a file object keeps the name.
    with path.open("wb") as f:
        scipy.io.mmwrite(
            f, a.to_scipy().tocoo(), comment=comment, field="real", precision=17,
            symmetry="general",
        )
    return path


def write_triplets(a: SparseMatrix, path: PathLike) -> Path:
    """Write ``a`` as 0-indexed TSV triplets readable by :func:`load_triplets`."""
    path = Path(path)
    lines = [f"#{a.n_rows} {a.n_cols}"]
    lines.extend(
        f"{r}\t{c}\t{v:.17g}"
        for r, c, v in zip(a.row_ids.tolist(), a.col_indices.tolist(), a.values.tolist())
    )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# --------------------------------------------------------------------------- statistics


def compute_centering_stats(a: SparseMatrix) -> CenteringStats:
    """Compute row, column and grand means in one pass over the stored entries.

    Args:
        a: Input matrix with at least one row and one column

    Returns:
        ``mu_r = A 1 / d``, ``mu_c = 1^T A / n`` and ``mu_grand = 1^T A 1 / (n d)``

    """
    if a.n_rows < 1 or a.n_cols < 1:
        raise ValidationError("centering needs at least one row and one column")
    row_sums = np.bincount(a.row_ids, weights=a.values, minlength=a.n_rows)
    col_sums = np.bincount(a.col_indices, weights=a.values, minlength=a.n_cols)
    grand = float(a.values.sum()) / (a.n_rows * a.n_cols)
    return CenteringStats(mu_r=row_sums / a.n_cols, mu_c=col_sums / a.n_rows, mu_grand=grand)


def compute_scaling_stats(a: SparseMatrix) -> ScalingStats:
    """Compute degrees and their mean regularizers.

    Raises:
        ScalingError: If the matrix is all zero or a regularized degree is not positive

    """
    if a.nnz == 0 or not np.any(a.values):
        raise ScalingError("cannot scale zero matrix")
    if np.any(a.values < 0):
        logger.warning(
            f"Scaling a matrix with {int(np.sum(a.values < 0))} negative entries; "
            "degree normalization assumes nonnegative data"
        )
    deg_r = np.bincount(a.row_ids, weights=a.values, minlength=a.n_rows)
    deg_c = np.bincount(a.col_indices, weights=a.values, minlength=a.n_cols)
    stats = ScalingStats(deg_r=deg_r, deg_c=deg_c, tau_r=deg_r.mean(), tau_c=deg_c.mean())
    if np.any(stats.row_weights <= 0) or np.any(stats.col_weights <= 0):
        raise ScalingError("regularized degrees must be positive; check for negative entries")
    empty_rows = int(np.sum(deg_r == 0))
    if empty_rows:
        logger.debug(f"{empty_rows} empty rows are kept with regularized degree tau_r")
    return stats


def scale_matrix(a: SparseMatrix, stats: ScalingStats) -> SparseMatrix:
    """Return ``L = D_r^-1/2 A D_c^-1/2`` with the regularized degree matrices."""
    _check_scaling_dims(a, stats)
    row_factor = 1.0 / np.sqrt(stats.row_weights)
    col_factor = 1.0 / np.sqrt(stats.col_weights)
    values = a.values * row_factor[a.row_ids] * col_factor[a.col_indices]
    return SparseMatrix(a.n_rows, a.n_cols, a.row_offsets, a.col_indices, values)


def _check_scaling_dims(a: SparseMatrix, stats: ScalingStats) -> None:
    if stats.deg_r.shape[0] != a.n_rows:
        raise DimensionMismatchError("row degrees", a.n_rows, stats.deg_r.shape[0])
    if stats.deg_c.shape[0] != a.n_cols:
        raise DimensionMismatchError("column degrees", a.n_cols, stats.deg_c.shape[0])


def _check_centering_dims(a: SparseMatrix, stats: CenteringStats) -> None:
    if stats.n_rows != a.n_rows:
        raise DimensionMismatchError("row means", a.n_rows, stats.n_rows)
    if stats.n_cols != a.n_cols:
        raise DimensionMismatchError("column means", a.n_cols, stats.n_cols)


# --------------------------------------------------------------------------- products


def centered_matvec(
    a: SparseMatrix, stats: CenteringStats, x: np.ndarray, mode: CenterMode = "full"
) -> np.ndarray:
    """Multiply the implicitly centered matrix by ``x``.

    Full centering computes ``A x - mu_r (1^T x) - 1 (mu_c x) + mu 1 (1^T x)``;
    column-only centering computes ``A x - 1 (mu_c x)``. ``x`` may be a vector or
    a ``d x l`` block.
    """
    _check_centering_dims(a, stats)
    x = np.asarray(x, dtype=np.float64)
    out = a.matvec(x)
    col_term = stats.mu_c @ x
    out -= col_term[np.newaxis, ...] if x.ndim == 2 else col_term
    if mode == "full":
        total = x.sum(axis=0)
        out -= np.multiply.outer(stats.mu_r, total) - stats.mu_grand * total
    return out


def centered_rmatvec(
    a: SparseMatrix, stats: CenteringStats, y: np.ndarray, mode: CenterMode = "full"
) -> np.ndarray:
    """Multiply the transpose of the implicitly centered matrix by ``y``.

    Full centering computes ``A^T y - mu_c^T (1^T y) - 1 (mu_r^T y) + mu 1 (1^T y)``;
    column-only centering computes ``A^T y - mu_c^T (1^T y)``.
    """
    _check_centering_dims(a, stats)
    y = np.asarray(y, dtype=np.float64)
    out = a.rmatvec(y)
    total = y.sum(axis=0)
    out -= np.multiply.outer(stats.mu_c, total)
    if mode == "full":
        row_term = stats.mu_r @ y
        out -= (row_term[np.newaxis, ...] if y.ndim == 2 else row_term) - stats.mu_grand * total
    return out


class ImplicitOperator(LinearOperator):
    """Linear operator for a sparse matrix with optional implicit centering.

    Scaling, when requested, is baked into ``matrix`` by :func:`build_operator`, so
    the operator only needs the centering statistics of that matrix.
    """

    def __init__(
        self,
        matrix: SparseMatrix,
        centering: CenteringStats | None = None,
        mode: CenterMode = "full",
        scaling: ScalingStats | None = None,
    ) -> None:
        super().__init__(dtype=np.float64, shape=matrix.shape)
        self.matrix = matrix
        self.centering = centering
        self.mode: CenterMode = mode
        self.scaling = scaling

    def _matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        if self.centering is None:
            return self.matrix.matvec(x)
        return centered_matvec(self.matrix, self.centering, x, self.mode)

    def _rmatvec(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if self.centering is None:
            return self.matrix.rmatvec(y)
        return centered_rmatvec(self.matrix, self.centering, y, self.mode)

    def _matmat(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.centering is None:
            return self.matrix.matvec(x)
        return centered_matvec(self.matrix, self.centering, x, self.mode)

    def _rmatmat(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if self.centering is None:
            return self.matrix.rmatvec(y)
        return centered_rmatvec(self.matrix, self.centering, y, self.mode)

    def __repr__(self) -> str:
        center = "none" if self.centering is None else self.mode
        scaled = "scaled" if self.scaling is not None else "raw"
        return f"<ImplicitOperator {self.shape[0]}x{self.shape[1]} {scaled} center={center}>"


def build_operator(
    a: SparseMatrix,
    scale: ScalingStats | None = None,
    center: CenteringStats | None = None,
    mode: CenterMode = "full",
    *,
    scaled: SparseMatrix | None = None,
) -> ImplicitOperator:
    """Compose a matrix with optional degree scaling and optional centering.

    Args:
        a: The observed matrix
        scale: Degrees of ``a``; when given the operator acts on ``L``
        center: Means of the matrix being centered (``L`` when scaling)
        mode: ``"full"`` for double centering, ``"column_only"`` for ``A - 1 mu_c``
        scaled: ``L`` already built from ``a`` and ``scale``, used as is

    Returns:
        The composed operator

    Raises:
        ConfigurationError: On an unknown mode, column-only mode without centering,
            or a prescaled matrix without its statistics
        DimensionMismatchError: If the statistics do not fit the matrix
        ValidationError: If the centering statistics were computed from another matrix

    """
    if mode not in ("full", "column_only"):
        raise ConfigurationError(f"Unknown centering mode: {mode}")
    if mode == "column_only" and center is None:
        raise ConfigurationError("column_only centering needs centering statistics")

    matrix = a
    if scaled is not None:
        if scale is None:
            raise ConfigurationError("a prescaled matrix needs its scaling statistics")
        if scaled.shape != a.shape:
            raise DimensionMismatchError("scaled matrix shape", a.shape, scaled.shape)
        matrix = scaled
    elif scale is not None:
        matrix = scale_matrix(a, scale)
    if center is not None:
        _check_centering_dims(matrix, center)
        grand = float(matrix.values.sum()) / (matrix.n_rows * matrix.n_cols)
        magnitude = float(np.abs(matrix.values).sum()) / (matrix.n_rows * matrix.n_cols)
        if abs(grand - center.mu_grand) > 1e-9 * max(magnitude, abs(center.mu_grand)) + 1e-300:
            raise ValidationError(
                "centering statistics were not computed from the matrix being centered",
                {"expected_grand_mean": grand, "stats_grand_mean": center.mu_grand},
            )
    return ImplicitOperator(matrix, center, mode, scale)


def materialize_dense(op: LinearOperator) -> np.ndarray:
    """Apply ``op`` to every basis vector; only for small operators.

    Raises:
        SizeGuardError: If ``n_rows * n_cols`` exceeds one million

    """
    n_rows, n_cols = op.shape
    if n_rows * n_cols > DENSE_GUARD:
        raise SizeGuardError("materialize_dense", n_rows * n_cols, DENSE_GUARD)
    return np.asarray(op.matmat(np.eye(n_cols)))
