"""Entry point module for the vintage-sparse-pca package.

This module allows the package to be run as a script using
`python -m vintage_sparse_pca`.
"""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
