"""LIBSVM ingestion, CSR storage, 1D column partitioning and synthetic data."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import FormatError, LabelError, ParseError


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Immutable CSR matrix with 0-based column indices.

    Parameters
    ----------
    rows, cols : int
        Logical shape ``(m, n)``.
    row_offsets : ndarray of int64, shape (m + 1,)
    col_indices : ndarray of int64, shape (nnz,)
        Strictly increasing within each row.
    values : ndarray of float64, shape (nnz,)
    """

    rows: int
    cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    _blocks: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        offsets = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        indices = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        for arr in (offsets, indices, values):
            arr.setflags(write=False)
        object.__setattr__(self, "row_offsets", offsets)
        object.__setattr__(self, "col_indices", indices)
        object.__setattr__(self, "values", values)
        self._validate()

    def _validate(self):
        m, n = self.rows, self.cols
        if m < 0 or n < 0:
            raise ValueError("negative shape")
        offsets = self.row_offsets
        if offsets.shape != (m + 1,) or offsets[0] != 0:
            raise ValueError("row_offsets must have length rows + 1 and start at 0")
        if np.any(np.diff(offsets) < 0):
            raise ValueError("row_offsets must be nondecreasing")
        nnz = int(offsets[-1])
        if self.col_indices.shape != (nnz,) or self.values.shape != (nnz,):
            raise ValueError("last row offset must equal the number of stored values")
        if nnz:
            if self.col_indices.min() < 0 or self.col_indices.max() >= n:
                raise ValueError("column index out of range")
            # strictly increasing within a row: every non-row-start step must rise
            steps = np.diff(self.col_indices)
            starts = offsets[1:-1]
            starts = starts[(starts > 0) & (starts < nnz)] - 1
            rising = steps > 0
            rising[starts] = True
            if not rising.all():
                raise ValueError("column indices must be strictly increasing within each row")

    @property
    def shape(self):
        return (self.rows, self.cols)

    @property
    def nnz(self):
        return int(self.row_offsets[-1])

    @property
    def density(self):
        if self.rows == 0 or self.cols == 0:
            return 0.0
        return self.nnz / (self.rows * self.cols)

    @classmethod
    def from_scipy(cls, mat):
        mat = sp.csr_matrix(mat)
        mat.sort_indices()
        mat.sum_duplicates()
        return cls(mat.shape[0], mat.shape[1], mat.indptr, mat.indices, mat.data)

    @classmethod
    def from_dense(cls, dense):
        return cls.from_scipy(sp.csr_matrix(np.atleast_2d(np.asarray(dense, dtype=np.float64))))

    @cached_property
    def csr(self) -> sp.csr_matrix:
        """Read-only scipy view, used for the sparse GEMM kernels."""
        return sp.csr_matrix((self.values, self.col_indices, self.row_offsets),
                             shape=self.shape)

    def to_dense(self):
        return self.csr.toarray()

    def row(self, i):
        lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
        return self.col_indices[lo:hi], self.values[lo:hi]

    @cached_property
    def row_sq_norms(self):
        """Squared Euclidean norm of each row, computed once per matrix."""
        return np.asarray(self.csr.multiply(self.csr).sum(axis=1)).ravel()

    def column_block(self, lo, hi) -> sp.csr_matrix:
        """Rows restricted to columns ``[lo, hi)``; cached per interval."""
        key = (lo, hi)
        if key not in self._blocks:
            self._blocks[key] = self.csr[:, lo:hi].tocsr()
        return self._blocks[key]

    def scale_rows(self, factors):
        factors = np.asarray(factors, dtype=np.float64)
        if factors.shape != (self.rows,):
            raise ValueError("need one factor per row")
        per_entry = np.repeat(factors, np.diff(self.row_offsets))
        return SparseMatrix(self.rows, self.cols, self.row_offsets,
                            self.col_indices, self.values * per_entry)

    def equals(self, other):
        return (self.shape == other.shape
                and np.array_equal(self.row_offsets, other.row_offsets)
                and np.array_equal(self.col_indices, other.col_indices)
                and np.array_equal(self.values, other.values))


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    features: SparseMatrix
    labels: np.ndarray

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.float64)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        if labels.shape != (self.features.rows,):
            raise ValueError("need exactly one label per row")

    @property
    def m(self):
        return self.features.rows

    @property
    def n(self):
        return self.features.cols

    def equals(self, other):
        return self.features.equals(other.features) and np.array_equal(self.labels, other.labels)


@dataclass(frozen=True)
class ColumnPartition:
    num_shards: int
    shard_ranges: tuple

    def __post_init__(self):
        if self.num_shards != len(self.shard_ranges):
            raise ValueError("one range per shard required")

    def sizes(self):
        return [hi - lo for lo, hi in self.shard_ranges]


def _parse_float(token, lineno):
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"malformed number {token!r}", lineno) from None


def parse_libsvm(text, expected_features=None) -> LabeledDataset:
    """Parse LIBSVM/svmlight text into a CSR dataset.

    Each line is ``label idx:val idx:val ...`` with 1-based, strictly
    increasing indices. Blank lines and ``#`` comments are ignored, LF and
    CRLF endings are both accepted. Labels are kept exactly as written.

    Parameters
    ----------
    text : bytes or str
    expected_features : int, optional
        Number of columns. Defaults to the largest index seen.

    Raises
    ------
    ParseError
        A token is not a number or not of the form ``idx:val``.
    FormatError
        An index is zero, non-increasing within its line, or exceeds
        ``expected_features``.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not UTF-8: {exc}") from None

    labels = []
    offsets = [0]
    indices = []
    values = []
    max_index = 0
    for lineno, line in enumerate(io.StringIO(text, newline=None), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        labels.append(_parse_float(tokens[0], lineno))
        prev = 0
        for token in tokens[1:]:
            idx_str, sep, val_str = token.partition(":")
            if not sep:
                raise ParseError(f"expected idx:val, got {token!r}", lineno)
            try:
                idx = int(idx_str)
            except ValueError:
                raise ParseError(f"malformed index {idx_str!r}", lineno) from None
            if idx <= 0:
                raise FormatError(f"index {idx} is not 1-based positive", lineno)
            if idx <= prev:
                raise FormatError(f"index {idx} does not increase after {prev}", lineno)
            prev = idx
            indices.append(idx - 1)
            values.append(_parse_float(val_str, lineno))
        max_index = max(max_index, prev)
        offsets.append(len(indices))

    n = max_index
    if expected_features is not None:
        if max_index > expected_features:
            raise FormatError(
                f"index {max_index} exceeds expected feature count {expected_features}")
        n = expected_features
    features = SparseMatrix(len(labels), n, np.array(offsets, dtype=np.int64),
                            np.array(indices, dtype=np.int64),
                            np.array(values, dtype=np.float64))
    return LabeledDataset(features, np.array(labels, dtype=np.float64))


def load_libsvm(path, expected_features=None) -> LabeledDataset:
    with open(path, "rb") as fh:
        return parse_libsvm(fh.read(), expected_features)


def serialize_libsvm(dataset: LabeledDataset) -> str:
    """Inverse of :func:`parse_libsvm`; floats use 17 significant digits."""
    A = dataset.features
    out = []
    for i, label in enumerate(dataset.labels):
        cols, vals = A.row(i)
        parts = [f"{label:.17g}"]
        parts.extend(f"{c + 1}:{v:.17g}" for c, v in zip(cols.tolist(), vals.tolist()))
        out.append(" ".join(parts))
    return "".join(line + "\n" for line in out)


def write_libsvm(dataset, path):
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_libsvm(dataset))
    os.replace(tmp, path)


def normalize_labels(raw, task="classification"):
    """Map two-class labels onto {-1, +1} by order; regression is a no-op."""
    raw = np.asarray(raw, dtype=np.float64)
    if task == "regression":
        return raw.copy()
    if task != "classification":
        raise ValueError(f"unknown task {task!r}")
    classes = np.unique(raw)
    if len(classes) != 2:
        raise LabelError(f"expected exactly two distinct labels, found {len(classes)}")
    return np.where(raw == classes[0], -1.0, 1.0)


def partition_columns(n, P) -> ColumnPartition:
    """Split ``[0, n)`` into ``P`` contiguous intervals whose sizes differ by at most 1.

    The first ``n % P`` shards receive the extra column.
    """
    if P < 1:
        raise ValueError("number of shards must be at least 1")
    if n < 0:
        raise ValueError("number of columns must be nonnegative")
    base, extra = divmod(n, P)
    ranges = []
    lo = 0
    for p in range(P):
        hi = lo + base + (1 if p < extra else 0)
        ranges.append((lo, hi))
        lo = hi
    return ColumnPartition(P, tuple(ranges))


def generate_synthetic(m, n, nnz_per_row, seed, task="classification") -> LabeledDataset:
    """Load-balanced random sparse data: every row has exactly ``nnz_per_row`` nonzeros.

    Column positions are uniform without replacement within a row and
    values are standard normal. Classification labels are the sign of a
    hidden linear model; regression targets add unit-variance noise to it.
    """
    if nnz_per_row > n:
        raise ValueError(f"nnz_per_row={nnz_per_row} exceeds n={n}")
    if min(m, n, nnz_per_row) < 0:
        raise ValueError("sizes must be nonnegative")
    if task not in ("classification", "regression"):
        raise ValueError(f"unknown task {task!r}")
    rng = np.random.default_rng(seed)
    indices = np.empty(m * nnz_per_row, dtype=np.int64)
    for i in range(m):
        cols = rng.choice(n, size=nnz_per_row, replace=False)
        cols.sort()
        indices[i * nnz_per_row:(i + 1) * nnz_per_row] = cols
    values = rng.standard_normal(m * nnz_per_row)
    offsets = np.arange(m + 1, dtype=np.int64) * nnz_per_row
    A = SparseMatrix(m, n, offsets, indices, values)

    w = rng.standard_normal(n)
    score = A.csr @ w
    if task == "classification":
        labels = np.where(score >= 0, 1.0, -1.0)
    else:
        labels = score + rng.standard_normal(m)
    return LabeledDataset(A, labels)
