"""Sparse dataset ingestion in the LIBSVM text format.

Each nonempty line is a label followed by whitespace-separated
``index:value`` pairs with 1-based, strictly increasing indices.  Lines
starting with ``#`` are comments; blank lines and trailing whitespace are
tolerated.  Anything malformed raises :class:`LibsvmParseError` carrying the
offending line number and token, so a caller can distinguish bad data from
bugs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = ["Dataset", "LibsvmParseError", "parse_libsvm", "write_libsvm"]


class LibsvmParseError(ValueError):
    """Malformed LIBSVM input, with the 1-based line and token position."""

    def __init__(self, line_no: int, token_no: int, detail: str):
        super().__init__(f"line {line_no}, token {token_no}: {detail}")
        self.line_no = line_no
        self.token_no = token_no
        self.detail = detail


@dataclass
class Dataset:
    """A sparse design matrix with labels; column indices are 0-based."""

    features: sp.csr_matrix
    labels: np.ndarray
    n: int
    d: int
    source_path: str

    def validate(self) -> None:
        if self.features.shape != (self.n, self.d):
            raise ValueError("feature shape does not match (n, d)")
        if self.labels.shape != (self.n,):
            raise ValueError("label count does not match n")
        indptr, indices = self.features.indptr, self.features.indices
        for row in range(self.n):
            cols = indices[indptr[row]:indptr[row + 1]]
            if cols.size and (np.any(np.diff(cols) <= 0) or cols[0] < 0
                              or cols[-1] >= self.d):
                raise ValueError(f"row {row} violates the column-index invariant")


def parse_libsvm(path: str, n_features: int | None = None) -> Dataset:
    """Parse a LIBSVM-format text file into a :class:`Dataset`.

    ``n_features`` overrides the inferred dimension (1 + the largest column
    index seen), which matters for test splits whose max index is smaller
    than the training dimension; data exceeding the override is an error.
    """
    labels: list[float] = []
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    max_col = -1

    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            try:
                label = float(tokens[0])
            except ValueError:
                raise LibsvmParseError(line_no, 1,
                                       f"label {tokens[0]!r} is not numeric") from None
            row = len(labels)
            labels.append(label)
            prev_idx = 0
            for token_no, tok in enumerate(tokens[1:], start=2):
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise LibsvmParseError(line_no, token_no,
                                           f"feature {tok!r} is missing ':'")
                try:
                    idx = int(idx_s)
                except ValueError:
                    raise LibsvmParseError(line_no, token_no,
                                           f"index {idx_s!r} is not an integer") from None
                if idx < 1:
                    raise LibsvmParseError(line_no, token_no,
                                           f"index {idx} is not 1-based positive")
                if idx <= prev_idx:
                    raise LibsvmParseError(
                        line_no, token_no,
                        f"index {idx} repeats or decreases (previous {prev_idx})")
                try:
                    val = float(val_s)
                except ValueError:
                    raise LibsvmParseError(line_no, token_no,
                                           f"value {val_s!r} is not numeric") from None
                if not np.isfinite(val):
                    raise LibsvmParseError(line_no, token_no,
                                           f"value {val_s!r} is not finite")
                prev_idx = idx
                rows.append(row)
                cols.append(idx - 1)
                vals.append(val)
                max_col = max(max_col, idx - 1)

    n = len(labels)
    d = max_col + 1
    if n_features is not None:
        if d > n_features:
            raise LibsvmParseError(
                0, 0, f"column index {d} exceeds the requested dimension {n_features}")
        d = n_features
    features = sp.csr_matrix(
        (np.asarray(vals, dtype=float), (rows, cols)), shape=(n, d))
    return Dataset(features, np.asarray(labels, dtype=float), n, d, str(path))


def write_libsvm(features, labels, path: str) -> None:
    """Write features/labels in the LIBSVM text format (1-based indices).

    Exact zeros are dropped; values are serialized with full precision so a
    write-parse round trip reproduces every stored entry.
    """
    mat = sp.csr_matrix(features)
    labels = np.asarray(labels, dtype=float)
    if labels.shape[0] != mat.shape[0]:
        raise ValueError("label count does not match row count")
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(mat.shape[0]):
            s, e = mat.indptr[i], mat.indptr[i + 1]
            pairs = " ".join(f"{j + 1}:{v:.17g}"
                             for j, v in zip(mat.indices[s:e], mat.data[s:e])
                             if v != 0.0)
            fh.write(f"{labels[i]:.17g} {pairs}".rstrip() + "\n")
