"""Vintage Sparse PCA.

Estimate sparse latent factors of large sparse matrices with PCA followed by Varimax
rotation, together with the generative models, evaluation harness and batch command
line used to check the estimates.

Key features:
- Implicit centering and degree scaling of sparse matrices without densifying
- Randomized truncated SVD over linear operators
- Varimax rotation with canonical column order and signs
- Simulators for factor models, blockmodels and topic models
- Alignment, topic recovery and diagnostic reports
"""

from vintage_sparse_pca._version import __version__

from .cli import main
from .evaluation import align_factors, convergence_sweep, diagnostics, estimate_topics
from .models import generate, load_model_spec
from .pipeline import VspConfig, VspResult, build_config, run_vsp
from .sparse_core import SparseMatrix, build_operator, load_matrix
from .svd import truncated_svd
from .utils import setup_logging
from .varimax import solve_varimax

__all__ = [
    "SparseMatrix",
    "VspConfig",
    "VspResult",
    "__version__",
    "align_factors",
    "build_config",
    "build_operator",
    "convergence_sweep",
    "diagnostics",
    "estimate_topics",
    "generate",
    "load_matrix",
    "load_model_spec",
    "main",
    "run_vsp",
    "setup_logging",
    "solve_varimax",
    "truncated_svd",
]
