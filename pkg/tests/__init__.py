"""Tests for vintage-sparse-pca."""
