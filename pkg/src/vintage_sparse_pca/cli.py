"""Command-line interface for the vintage-sparse-pca package.

This module provides the ``vsp`` batch tool. It parses arguments, runs the library
and writes every result to disk, always leaving a ``run.json`` manifest next to the
outputs.

The CLI module is organized into the following functional areas:

Command-Line Parsing:
  - parse_args: Parse command-line arguments for the vsp tool

Commands:
  - decompose: Vintage Sparse PCA of a matrix file
  - simulate: Sample a matrix and its true factors from a model spec file
  - evaluate: Compare estimated factors (and topics) with the truth
  - diagnose: Kurtosis, scree, pair-sample and participation diagnostics
  - ingest: Document-term matrix from a directory of text files

Main Entry Point:
  - main: Dispatch a command and translate errors into exit codes

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical error.
"""

import argparse
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import NoReturn

import numpy as np
from pydantic import ValidationError as PydanticValidationError
from rich.console import Console
from rich.table import Table

from .constants import DEFAULT_PAIRS_SAMPLE
from .evaluation import align_factors, clip_to_simplex, diagnostics, estimate_topics, topic_l1_error
from .exceptions import ConfigurationError, ReportError, VspError
from .ingest import build_document_term_matrix, write_corpus
from .models import (
    MODEL_SPECS,
    LdaSpec,
    compute_density,
    expected_density,
    generate,
    identifiability_flags,
    load_model_spec,
)
from .pipeline import VspConfig, build_config, run_vsp
from .reporting import (
    RunManifest,
    print_kurtosis_table,
    read_manifest,
    read_matrix_csv,
    write_diagnostics,
    write_matrix_csv,
    write_report,
)
from .sparse_core import build_operator, load_matrix, write_matrix_market
from .utils import ensure_directory, logger, setup_logging

CENTER_MODES = {"full": "full", "column": "column_only"}

console = Console()


class VspArgumentParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors as ConfigurationError (exit code 1)."""

    def error(self, message: str) -> NoReturn:
        raise ConfigurationError(f"{self.prog}: {message}")


def _seed(value: str) -> int:
    seed = int(value)
    if seed < 0:
        raise argparse.ArgumentTypeError(f"seed must be non-negative, got {seed}")
    return seed


def _add_decompose_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("decompose", help="Run Vintage Sparse PCA on a matrix file")
    parser.add_argument("--input", help="MatrixMarket (.mtx) or 0-indexed TSV triplet file")
    parser.add_argument("--k", type=int, help="Number of factors")
    parser.add_argument("--center", action="store_true", help="Center the matrix implicitly")
    parser.add_argument("--scale", action="store_true", help="Degree-normalize the matrix")
    parser.add_argument(
        "--recenter", action="store_true", help="Estimate the factor means (requires --center)"
    )
    parser.add_argument(
        "--rescale", action="store_true", help="Undo the degree scaling (requires --scale)"
    )
    parser.add_argument(
        "--center-mode",
        choices=sorted(CENTER_MODES),
        default="full",
        help="Full double centering or column-only centering (topic models)",
    )
    parser.add_argument("--seed", type=_seed, default=0, help="Random seed (default: 0)")
    parser.add_argument("--out", default="vsp_out", help="Output directory (default: vsp_out)")
    parser.add_argument("--oversample", type=int, default=10, help="SVD oversampling (default: 10)")
    parser.add_argument(
        "--power-iters", type=int, default=5, help="SVD power iterations (default: 5)"
    )
    parser.add_argument(
        "--varimax-tol", type=float, default=1e-10, help="Varimax relative tolerance"
    )
    parser.add_argument("--max-sweeps", type=int, default=100, help="Varimax sweep cap")
    parser.add_argument(
        "--restarts", type=int, default=1, help="Varimax starts, the identity first (default: 1)"
    )
    parser.add_argument(
        "--kaiser-normalize", action="store_true", help="Row-normalize before Varimax"
    )
    parser.add_argument(
        "--clip-simplex",
        action="store_true",
        help="Also write topics projected onto the simplex (requires --center-mode column)",
    )
    parser.add_argument(
        "--pairs-sample",
        type=int,
        default=DEFAULT_PAIRS_SAMPLE,
        help=f"Rows in the pair-plot sample (default: {DEFAULT_PAIRS_SAMPLE})",
    )
    parser.add_argument(
        "--from-manifest",
        metavar="RUN_JSON",
        help="Re-run with the input and configuration recorded in a run.json",
    )


def parse_args(args: Sequence[str] | None = None) -> argparse.Namespace:
    """Parse command-line arguments.

    Args:
    ----
        args: Command-line arguments to parse. If None, sys.argv[1:] is used.

    Returns:
    -------
        Parsed arguments as a Namespace object.

    Raises:
    ------
        ConfigurationError: On usage errors.

    """
    parser = VspArgumentParser(
        prog="vsp",
        description="Vintage Sparse PCA: sparse factor estimation with PCA and Varimax",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Enable verbose logging")
    parser.add_argument("--log-file", help="Path to log file")
    subparsers = parser.add_subparsers(dest="command", required=True, help="Commands")

    _add_decompose_parser(subparsers)

    simulate_parser = subparsers.add_parser("simulate", help="Sample data from a model spec file")
    simulate_parser.add_argument("--model", required=True, choices=sorted(MODEL_SPECS))
    simulate_parser.add_argument("--spec", required=True, help="Spec file of key = value lines")
    simulate_parser.add_argument("--seed", type=_seed, default=0, help="Random seed (default: 0)")
    simulate_parser.add_argument("--out", required=True, help="Output directory")

    evaluate_parser = subparsers.add_parser("evaluate", help="Compare estimates with the truth")
    evaluate_parser.add_argument("--est", required=True, help="Directory written by decompose")
    evaluate_parser.add_argument("--truth", required=True, help="Directory written by simulate")
    evaluate_parser.add_argument("--mode", choices=["exact", "greedy"], default="exact")
    evaluate_parser.add_argument(
        "--topics", action="store_true", help="Also compare beta_hat.csv with beta.csv"
    )
    evaluate_parser.add_argument(
        "--recentered", action="store_true", help="Compare Z + mu_Z with the uncentered truth"
    )
    evaluate_parser.add_argument(
        "--out", default="vsp_eval", help="Directory for run.json (default: vsp_eval)"
    )
    evaluate_parser.add_argument(
        "--report", help="Report path, JSON or YAML by extension (default: OUT/report.json)"
    )

    diagnose_parser = subparsers.add_parser("diagnose", help="Diagnostics for a factor matrix")
    diagnose_parser.add_argument("--factors", required=True, help="Headerless CSV of factors")
    diagnose_parser.add_argument("--svals", help="Headerless CSV of singular values")
    diagnose_parser.add_argument(
        "--pairs-sample", type=int, default=DEFAULT_PAIRS_SAMPLE, help="Rows in the pair sample"
    )
    diagnose_parser.add_argument("--seed", type=_seed, default=0, help="Random seed (default: 0)")
    diagnose_parser.add_argument("--out", required=True, help="Output directory")

    ingest_parser = subparsers.add_parser("ingest", help="Build a document-term matrix")
    ingest_parser.add_argument("--corpus", required=True, help="Directory of text documents")
    ingest_parser.add_argument(
        "--min-count", type=int, default=1, help="Minimum document frequency (default: 1)"
    )
    ingest_parser.add_argument("--out", required=True, help="Output MatrixMarket file")
    ingest_parser.add_argument(
        "--binary", action="store_true", help="Write 0/1 indicators instead of counts"
    )

    return parser.parse_args(args)


# --------------------------------------------------------------------------- decompose


def _decompose_inputs(args: argparse.Namespace) -> tuple[Path, VspConfig]:
    if args.from_manifest:
        manifest = read_manifest(args.from_manifest)
        if manifest.command != "decompose" or "input" not in manifest.inputs:
            raise ReportError(f"{args.from_manifest} is not a decompose manifest")
        logger.info(f"Re-running decompose recorded in {args.from_manifest}")
        return Path(manifest.inputs["input"]), build_config(**manifest.config)
    if args.input is None or args.k is None:
        raise ConfigurationError("decompose requires --input and --k (or --from-manifest)")
    config = build_config(
        k=args.k,
        center=args.center,
        scale=args.scale,
        recenter=args.recenter,
        rescale=args.rescale,
        seed=args.seed,
        oversample=args.oversample,
        power_iters=args.power_iters,
        varimax_tol=args.varimax_tol,
        max_sweeps=args.max_sweeps,
        restarts=args.restarts,
        kaiser_normalize=args.kaiser_normalize,
        center_mode=CENTER_MODES[args.center_mode],
    )
    return Path(args.input).resolve(), config


def decompose(args: argparse.Namespace, manifest: RunManifest) -> int:
    """Run the pipeline and write factors, topics and diagnostics."""
    input_path, config = _decompose_inputs(args)
    if args.clip_simplex and config.center_mode != "column_only":
        raise ConfigurationError("--clip-simplex requires --center-mode column")
    manifest.inputs["input"] = str(input_path)
    manifest.seed = config.seed
    manifest.config = config.model_dump()

    a = load_matrix(input_path)
    result = run_vsp(a, config)
    out = ensure_directory(args.out)

    outputs = {
        "Z.csv": result.z_hat,
        "Y.csv": result.y_hat,
        "B.csv": result.b_hat,
        "singular_values.csv": result.singular_values[:, np.newaxis],
        "R_U.csv": result.rot_u.r,
        "R_V.csv": result.rot_v.r,
    }
    if result.mu_z is not None:
        outputs["mu_Z.csv"] = result.mu_z
    if result.mu_y is not None:
        outputs["mu_Y.csv"] = result.mu_y
    if result.z_rescaled is not None and result.y_rescaled is not None:
        outputs["Z_rescaled.csv"] = result.z_rescaled
        outputs["Y_rescaled.csv"] = result.y_rescaled
    if config.center_mode == "column_only":
        op = build_operator(a, result.scaling, result.centering, "column_only")
        beta_hat = estimate_topics(result.z_hat, op)
        outputs["beta_hat.csv"] = beta_hat
        if args.clip_simplex:
            outputs["beta_hat_simplex.csv"] = clip_to_simplex(beta_hat)
    for name, matrix in outputs.items():
        manifest.add_output(write_matrix_csv(matrix, out / name))

    bundle = diagnostics(
        result.z_hat, result.singular_values, result.u_hat, args.pairs_sample, config.seed
    )
    for path in write_diagnostics(bundle, out):
        manifest.add_output(path)
    print_kurtosis_table(bundle, console)
    logger.info(f"Decomposition written to {out}")
    return 0


# --------------------------------------------------------------------------- simulate


def simulate(args: argparse.Namespace, manifest: RunManifest) -> int:
    """Sample a matrix with its true factors and write ``truth.json``."""
    spec = load_model_spec(args.spec, args.model)
    manifest.inputs["spec"] = str(Path(args.spec).resolve())
    manifest.config = {"model": args.model, **spec.model_dump(mode="json")}
    data = generate(spec, args.seed)
    out = ensure_directory(args.out)

    manifest.add_output(write_matrix_market(data.a, out / "A.mtx", comment=f"{args.model} sample"))
    manifest.add_output(write_matrix_csv(data.z, out / "Z.csv"))
    if data.y is not None:
        manifest.add_output(write_matrix_csv(data.y, out / "Y.csv"))
    extra_names = {"z_star": "Z_star.csv", "beta": "beta.csv", "z_mixture": "Z_mixture.csv"}
    for key, name in extra_names.items():
        if key in data.extras:
            manifest.add_output(write_matrix_csv(data.extras[key], out / name))
    if "xi" in data.extras:
        manifest.add_output(write_matrix_csv(data.extras["xi"][:, np.newaxis], out / "xi.csv"))

    observed = compute_density(data.a)
    truth: dict[str, object] = {
        "model": args.model,
        "seed": args.seed,
        "shape": list(data.a.shape),
        "k": int(data.z.shape[1]),
        "observed_density": observed._asdict(),
    }
    if not isinstance(spec, LdaSpec):
        expected = expected_density(data.z, spec.b_matrix, data.y, rho=spec.rho)
        truth.update({"rho": expected.rho, "rho_bar": expected.rho_bar, "delta": expected.delta})
    else:
        truth.update({"rho": observed.rho, "rho_bar": observed.rho_bar, "delta": observed.delta})
    flags = identifiability_flags(spec)
    truth["identifiability"] = [
        {"column": j, **flag._asdict()} for j, flag in enumerate(flags)
    ]
    truth["identifiable"] = all(flag.identifiable for flag in flags)
    manifest.add_output(write_report(truth, out / "truth.json"))
    if not truth["identifiable"]:
        manifest.add_warning("Some factor columns have kurtosis <= 3; Varimax may not identify them")
    return 0


# --------------------------------------------------------------------------- evaluate


def _read_factors(directory: Path, name: str) -> np.ndarray:
    path = directory / name
    if not path.exists():
        raise ReportError(f"{path} does not exist")
    return read_matrix_csv(path)


def evaluate(args: argparse.Namespace, manifest: RunManifest) -> int:
    """Align estimated factors with the truth and report the errors."""
    est_dir, truth_dir = Path(args.est), Path(args.truth)
    manifest.inputs.update({"est": str(est_dir.resolve()), "truth": str(truth_dir.resolve())})
    manifest.config = {"mode": args.mode, "topics": args.topics, "recentered": args.recentered}

    est = _read_factors(est_dir, "Z.csv")
    truth_name = "Z.csv"
    if args.recentered:
        est = est + _read_factors(est_dir, "mu_Z.csv").ravel()[np.newaxis, :]
        if (truth_dir / "Z_star.csv").exists():
            truth_name = "Z_star.csv"
    truth = _read_factors(truth_dir, truth_name)
    alignment = align_factors(est, truth, args.mode)
    report: dict[str, object] = {"truth_file": truth_name, **alignment.to_dict()}
    if args.topics:
        beta_hat = _read_factors(est_dir, "beta_hat.csv")
        beta = _read_factors(truth_dir, "beta.csv")
        report["topic_l1_error"] = topic_l1_error(beta_hat, beta)

    table = Table(title="Evaluation")
    table.add_column("metric")
    table.add_column("value", justify="right")
    for key, value in report.items():
        table.add_row(key, f"{value:.6g}" if isinstance(value, float) else str(value))
    console.print(table)

    out = ensure_directory(args.out)
    report_path = Path(args.report) if args.report else out / "report.json"
    manifest.add_output(write_report(report, report_path))
    return 0


# --------------------------------------------------------------------------- diagnose


def diagnose(args: argparse.Namespace, manifest: RunManifest) -> int:
    """Write diagnostics of a factor matrix and print the kurtosis table."""
    manifest.inputs["factors"] = str(Path(args.factors).resolve())
    manifest.seed = args.seed
    manifest.config = {"pairs_sample": args.pairs_sample}
    factors = read_matrix_csv(args.factors)
    singular_values = None
    if args.svals:
        manifest.inputs["svals"] = str(Path(args.svals).resolve())
        singular_values = read_matrix_csv(args.svals).ravel()
    else:
        logger.info("No singular values given; scree.csv is not written")
    bundle = diagnostics(factors, singular_values, None, args.pairs_sample, args.seed)
    for path in write_diagnostics(bundle, args.out):
        manifest.add_output(path)
    print_kurtosis_table(bundle, console)
    return 0


# --------------------------------------------------------------------------- ingest


def ingest(args: argparse.Namespace, manifest: RunManifest) -> int:
    """Build the document-term matrix of a corpus directory."""
    manifest.inputs["corpus"] = str(Path(args.corpus).resolve())
    manifest.config = {"min_count": args.min_count, "binary": args.binary}
    corpus = build_document_term_matrix(args.corpus, args.min_count, args.binary)
    for path in write_corpus(corpus, args.out):
        manifest.add_output(path)
    return 0


COMMANDS: dict[str, Callable[[argparse.Namespace, RunManifest], int]] = {
    "decompose": decompose,
    "simulate": simulate,
    "evaluate": evaluate,
    "diagnose": diagnose,
    "ingest": ingest,
}


def _manifest_dir(args: argparse.Namespace) -> Path:
    if args.command == "ingest":
        return Path(args.out).parent
    return Path(args.out)


def main(args: Sequence[str] | None = None) -> int:
    """Main entry point for the vsp command-line interface.

    Args:
    ----
        args: Command-line arguments to parse. If None, sys.argv[1:] is used.

    Returns:
    -------
        Exit code: 0 on success, 1 on usage or configuration errors, 2 on data
        errors and 3 on numerical errors.

    Examples:
    --------
        >>> exit_code = main(["decompose", "--input", "A.mtx", "--k", "3"])

    """
    try:
        parsed_args = parse_args(args)
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code

    setup_logging(parsed_args.log_file, parsed_args.verbose)
    manifest = RunManifest.create(parsed_args.command, seed=getattr(parsed_args, "seed", None))
    try:
        exit_code = COMMANDS[parsed_args.command](parsed_args, manifest)
        manifest.complete(success=exit_code == 0)
    except VspError as e:
        logger.error(str(e))
        manifest.add_error(str(e))
        manifest.complete(success=False)
        exit_code = e.exit_code
    except PydanticValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        manifest.add_error(str(e))
        manifest.complete(success=False)
        exit_code = ConfigurationError.exit_code

    run_dir = _manifest_dir(parsed_args)
    if exit_code == 0 or run_dir.is_dir():
        manifest.write(ensure_directory(run_dir))
    return exit_code
