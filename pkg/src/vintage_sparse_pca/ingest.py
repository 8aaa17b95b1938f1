"""Document-term matrices from a directory of plain-text documents.

Each file is one document. Text is lowercased and split on anything that is not a
letter or digit; the vocabulary keeps tokens that occur in at least ``min_count``
documents, in sorted order.
"""

import re
from collections import Counter
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy import sparse

from .exceptions import ConfigurationError, DataError
from .sparse_core import SparseMatrix, write_matrix_market
from .utils import PathLike, ensure_directory, logger

TOKEN_PATTERN = re.compile(r"[^\W_]+")


class Corpus(NamedTuple):
    matrix: SparseMatrix
    vocabulary: list[str]
    documents: list[str]


def tokenize(text: str) -> list[str]:
    """Lowercase ``text`` and split it on non-alphanumeric characters."""
    return TOKEN_PATTERN.findall(text.lower())


def _read_documents(corpus_dir: Path) -> list[tuple[str, list[str]]]:
    if not corpus_dir.is_dir():
        raise DataError(f"Corpus directory {corpus_dir} does not exist")
    files = sorted(p for p in corpus_dir.iterdir() if p.is_file() and not p.name.startswith("."))
    if not files:
        raise DataError(f"Corpus directory {corpus_dir} contains no documents")
    documents = []
    for path in files:
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise DataError(f"Cannot read document {path}: {e}") from e
        documents.append((path.name, tokenize(text)))
    return documents


def build_document_term_matrix(
    corpus_dir: PathLike, min_count: int = 1, binary: bool = False
) -> Corpus:
    """Count words per document.

    Args:
        corpus_dir: Directory with one UTF-8 text file per document
        min_count: Minimum number of documents a token must appear in
        binary: Record presence (0/1) instead of counts

    Returns:
        The n_docs x n_terms matrix with its column and row labels

    Raises:
        ConfigurationError: If ``min_count`` is below 1
        DataError: On an empty corpus, an unreadable file or an empty vocabulary

    """
    if min_count < 1:
        raise ConfigurationError(f"min_count must be at least 1, got {min_count}")
    documents = _read_documents(Path(corpus_dir))
    counts = [Counter(tokens) for _, tokens in documents]
    document_frequency = Counter(token for c in counts for token in c)
    vocabulary = sorted(t for t, df in document_frequency.items() if df >= min_count)
    if not vocabulary:
        raise DataError(f"No token appears in {min_count} or more documents")
    column = {token: j for j, token in enumerate(vocabulary)}

    rows, cols, values = [], [], []
    for i, c in enumerate(counts):
        for token, count in c.items():
            if token in column:
                rows.append(i)
                cols.append(column[token])
                values.append(1.0 if binary else float(count))
    matrix = sparse.coo_matrix(
        (np.array(values), (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))),
        shape=(len(documents), len(vocabulary)),
    )
    logger.info(
        f"Built {len(documents)}x{len(vocabulary)} document-term matrix "
        f"({len(values)} stored entries, binary={binary})"
    )
    return Corpus(SparseMatrix.from_scipy(matrix), vocabulary, [name for name, _ in documents])


def write_corpus(corpus: Corpus, out: PathLike) -> list[Path]:
    """Write the matrix to ``out`` and ``vocab.txt``/``docs.txt`` next to it."""
    out = Path(out)
    directory = ensure_directory(out.parent)
    matrix_path = write_matrix_market(corpus.matrix, out, comment="document-term matrix")
    vocab_path = directory / "vocab.txt"
    docs_path = directory / "docs.txt"
    vocab_path.write_text("".join(f"{t}\n" for t in corpus.vocabulary), encoding="utf-8")
    docs_path.write_text("".join(f"{d}\n" for d in corpus.documents), encoding="utf-8")
    return [matrix_path, vocab_path, docs_path]
