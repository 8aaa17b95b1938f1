"""Reporting module for decomposition runs.

This module writes everything a run leaves on disk and reads it back for evaluation
and re-runs.

The module is organized into the following functional areas:

Run Manifests:
  - RunManifest: Inputs, seed, configuration, versions and wall time of one run
  - read_manifest: Load and validate a manifest written by a previous run

Reports:
  - write_report: Write a dictionary as JSON or YAML depending on the file extension

Matrix Files:
  - write_matrix_csv: Headerless CSV with round-trip precision
  - read_matrix_csv: Parse a headerless numeric CSV (ragged rows are rejected)

Diagnostics:
  - write_diagnostics: kurtosis.csv, pairs.csv, scree.csv and participation.csv
  - print_kurtosis_table: Terminal table of factor kurtosis with identifiability advice
"""

import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, TypedDict

import numpy as np
import scipy
import yaml
from rich.console import Console
from rich.table import Table

from ._version import __version__
from .constants import NEAR_GAUSSIAN_BAND
from .evaluation import DiagnosticsBundle
from .exceptions import ReportError
from .utils import PathLike, ensure_directory, logger

NEAR_GAUSSIAN_ADVISORY = "near-Gaussian: rotation not identifiable"


class ManifestData(TypedDict):
    """Serialized form of a run manifest."""

    command: str
    inputs: dict[str, str]
    seed: int | None
    config: dict[str, Any]
    versions: dict[str, str]
    start_time: str
    end_time: str | None
    wall_time_seconds: float | None
    success: bool
    outputs: list[str]
    errors: list[str]
    warnings: list[str]


def collect_versions() -> dict[str, str]:
    """Versions of the package and the numerical stack."""
    return {
        "vintage_sparse_pca": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


@dataclass
class RunManifest:
    """Record of a single command invocation, written as ``run.json``."""

    command: str
    inputs: dict[str, str] = field(default_factory=dict)
    seed: int | None = None
    config: dict[str, Any] = field(default_factory=dict)
    versions: dict[str, str] = field(default_factory=collect_versions)
    start_time: datetime = field(default_factory=datetime.now)
    end_time: datetime | None = None
    wall_time_seconds: float | None = None
    success: bool = False
    outputs: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    _started: float = field(default_factory=time.perf_counter, repr=False)

    @classmethod
    def create(
        cls,
        command: str,
        inputs: dict[str, PathLike] | None = None,
        seed: int | None = None,
        config: dict[str, Any] | None = None,
    ) -> "RunManifest":
        """Start a manifest for ``command``."""
        return cls(
            command=command,
            inputs={key: str(value) for key, value in (inputs or {}).items()},
            seed=seed,
            config=dict(config or {}),
        )

    def add_output(self, path: PathLike) -> None:
        self.outputs.append(Path(path).name)

    def add_error(self, error: str) -> None:
        """Add an error to the manifest."""
        self.errors.append(error)
        logger.error(error)

    def add_warning(self, warning: str) -> None:
        """Add a warning to the manifest."""
        self.warnings.append(warning)
        logger.warning(warning)

    def complete(self, success: bool = True) -> None:
        """Mark the run as finished and record the wall time."""
        self.end_time = datetime.now()
        self.wall_time_seconds = time.perf_counter() - self._started
        self.success = success

    def to_dict(self) -> ManifestData:
        data = asdict(self)
        data.pop("_started")
        data["start_time"] = self.start_time.isoformat()
        data["end_time"] = self.end_time.isoformat() if self.end_time else None
        return ManifestData(**data)

    def write(self, out_dir: PathLike) -> Path:
        """Write the manifest as ``run.json`` in ``out_dir``."""
        return write_report(self.to_dict(), Path(out_dir) / "run.json")


_MANIFEST_FIELDS: dict[str, type | tuple[type, ...]] = {
    "command": str,
    "inputs": dict,
    "config": dict,
    "versions": dict,
    "start_time": str,
    "success": bool,
}


def _load_structured(path: Path) -> Any:
    with path.open("r", encoding="utf-8") as f:
        if path.suffix.lower() in (".yml", ".yaml"):
            return yaml.safe_load(f)
        return json.load(f)


def read_manifest(path: PathLike) -> RunManifest:
    """Read a manifest written by :meth:`RunManifest.write`.

    Raises:
        ReportError: If the file cannot be read or lacks required fields

    """
    path = Path(path)
    try:
        data = _load_structured(path)
    except (OSError, json.JSONDecodeError, yaml.YAMLError) as e:
        raise ReportError(f"Failed to read manifest {path}: {e}") from e
    if not isinstance(data, dict):
        raise ReportError(f"Invalid manifest {path}: expected a mapping")
    for name, expected in _MANIFEST_FIELDS.items():
        if name not in data:
            raise ReportError(f"Invalid manifest {path}: missing required field '{name}'")
        if not isinstance(data[name], expected):
            raise ReportError(f"Invalid manifest {path}: field '{name}' has the wrong type")
    try:
        return RunManifest(
            command=data["command"],
            inputs={str(k): str(v) for k, v in data["inputs"].items()},
            seed=data.get("seed"),
            config=data["config"],
            versions=data["versions"],
            start_time=datetime.fromisoformat(data["start_time"]),
            end_time=datetime.fromisoformat(data["end_time"]) if data.get("end_time") else None,
            wall_time_seconds=data.get("wall_time_seconds"),
            success=data["success"],
            outputs=list(data.get("outputs", [])),
            errors=list(data.get("errors", [])),
            warnings=list(data.get("warnings", [])),
        )
    except (TypeError, ValueError) as e:
        raise ReportError(f"Invalid manifest {path}: {e}") from e


def _plain(value: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into JSON-friendly values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return _plain(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_report(data: dict[str, Any] | ManifestData, output_file: PathLike) -> Path:
    """Write ``data`` as YAML for ``.yml``/``.yaml`` files and as JSON otherwise.

    Non-finite numbers are written as null.
    """
    output_path = Path(output_file)
    ensure_directory(output_path.parent)
    payload = _plain(dict(data))
    with output_path.open("w", encoding="utf-8") as f:
        if output_path.suffix.lower() in (".yml", ".yaml"):
            yaml.safe_dump(payload, f, sort_keys=False)
        else:
            json.dump(payload, f, indent=2)
            f.write("\n")
    logger.info(f"Report written to {output_path}")
    return output_path


def write_matrix_csv(matrix: np.ndarray, path: PathLike) -> Path:
    """Write a headerless CSV; 17 significant digits make values round-trip exactly."""
    path = Path(path)
    ensure_directory(path.parent)
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix[np.newaxis, :]
    np.savetxt(path, matrix, fmt="%.17g", delimiter=",")
    return path


def read_matrix_csv(path: PathLike) -> np.ndarray:
    """Read a headerless numeric CSV into a 2-D array.

    Raises:
        ReportError: On unreadable files, ragged rows or non-numeric cells

    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise ReportError(f"Failed to read {path}: {e}") from e
    rows: list[list[float]] = []
    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            row = [float(cell) for cell in line.split(",")]
        except ValueError as e:
            raise ReportError(f"{path}:{line_number}: non-numeric value") from e
        if rows and len(row) != len(rows[0]):
            raise ReportError(
                f"{path}:{line_number}: ragged row with {len(row)} columns, "
                f"expected {len(rows[0])}"
            )
        rows.append(row)
    if not rows:
        raise ReportError(f"{path} contains no data")
    return np.array(rows, dtype=np.float64)


def _write_rows(path: Path, header: list[str], rows: list[list[Any]]) -> Path:
    with path.open("w", encoding="utf-8") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_format_cell(cell) for cell in row) + "\n")
    return path


def _format_cell(cell: Any) -> str:
    if isinstance(cell, bool | np.bool_):
        return "true" if cell else "false"
    if isinstance(cell, int | np.integer):
        return str(int(cell))
    value = float(cell)
    return "nan" if math.isnan(value) else f"{value:.17g}"


def write_diagnostics(bundle: DiagnosticsBundle, out_dir: PathLike) -> list[Path]:
    """Write the diagnostics bundle; ``scree.csv`` only when singular values are known."""
    out = ensure_directory(out_dir)
    k = bundle.kurtosis.size
    kurtosis_rows: list[list[Any]] = [
        [j, bundle.kurtosis[j], bool(bundle.kurtosis_degenerate[j])]
        + ([] if bundle.principal_kurtosis is None else [bundle.principal_kurtosis[j]])
        for j in range(k)
    ]
    kurtosis_header = ["factor", "kurtosis", "degenerate"]
    if bundle.principal_kurtosis is not None:
        kurtosis_header.append("principal_kurtosis")
    written = [_write_rows(out / "kurtosis.csv", kurtosis_header, kurtosis_rows)]

    pair_header = ["row"] + [f"z{j}" for j in range(k)]
    pair_rows = [
        [int(row), *values] for row, values in zip(bundle.pair_rows, bundle.pair_values)
    ]
    written.append(_write_rows(out / "pairs.csv", pair_header, pair_rows))

    if bundle.scree is not None:
        scree = bundle.scree
        gaps = np.append(scree[:-1] - scree[1:], np.nan) if scree.size else scree
        scree_rows = [[i, scree[i], gaps[i]] for i in range(scree.size)]
        written.append(
            _write_rows(out / "scree.csv", ["index", "singular_value", "gap"], scree_rows)
        )

    participation_rows = [[j, bundle.participation[j]] for j in range(bundle.participation.size)]
    written.append(
        _write_rows(out / "participation.csv", ["factor", "participation_ratio"], participation_rows)
    )
    logger.info(f"Diagnostics written to {out}")
    return written


def print_kurtosis_table(bundle: DiagnosticsBundle, console: Console | None = None) -> None:
    """Print per-factor kurtosis, adding the near-Gaussian advisory when it applies."""
    console = console or Console()
    table = Table(title="Factor kurtosis")
    table.add_column("factor", justify="right")
    table.add_column("kurtosis", justify="right")
    table.add_column("participation", justify="right")
    for j, value in enumerate(bundle.kurtosis):
        label = "nan (constant)" if bundle.kurtosis_degenerate[j] else f"{value:.3f}"
        table.add_row(str(j), label, f"{bundle.participation[j]:.3f}")
    console.print(table)
    if bundle.near_gaussian:
        low, high = NEAR_GAUSSIAN_BAND
        console.print(f"{NEAR_GAUSSIAN_ADVISORY} (all kurtosis values in [{low}, {high}])")
