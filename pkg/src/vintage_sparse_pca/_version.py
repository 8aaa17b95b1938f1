"""Version information for vintage-sparse-pca."""

__all__ = ["__version__", "__version_tuple__"]

__version__ = "0.1.0"

__version_tuple__ = tuple(int(part) for part in __version__.split("."))
