"""Kernel functions and sampled kernel panels ``K(A, A[rows])``.

Panels are formed the way a distributed implementation would: a sparse
GEMM produces inner products, which are reduced across column shards
before the nonlinearity is applied. RBF distances use the expansion
``|a - b|^2 = a.a - 2 a.b + b.b`` with row norms cached per matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .costmodel import CostLedger, charge_allreduce
from .data import ColumnPartition, SparseMatrix

KINDS = ("linear", "polynomial", "rbf")
_ALIASES = {"poly": "polynomial", "gauss": "rbf", "gaussian": "rbf"}


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice plus the hyperparameters relevant to it.

    ``c`` and ``d`` belong to the polynomial kernel ``(c + a.b)**d`` and
    ``sigma`` to ``exp(-sigma * |a - b|^2)``. Unset relevant parameters take
    the defaults ``c=0, d=3, sigma=1``; setting an irrelevant one is an error.
    """

    kind: str = "linear"
    c: float | None = None
    d: int | None = None
    sigma: float | None = None

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise ValueError(f"unknown kernel {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        poly_set = self.c is not None or self.d is not None
        if kind == "polynomial":
            c = 0.0 if self.c is None else float(self.c)
            d = 3 if self.d is None else self.d
            if c < 0:
                raise ValueError("polynomial kernel needs c >= 0")
            if int(d) != d or d < 2:
                raise ValueError("polynomial kernel needs integer d >= 2")
            object.__setattr__(self, "c", c)
            object.__setattr__(self, "d", int(d))
        elif poly_set:
            raise ValueError(f"c and d do not apply to the {kind} kernel")
        if kind == "rbf":
            sigma = 1.0 if self.sigma is None else float(self.sigma)
            if not sigma > 0:
                raise ValueError("rbf kernel needs sigma > 0")
            object.__setattr__(self, "sigma", sigma)
        elif self.sigma is not None:
            raise ValueError(f"sigma does not apply to the {kind} kernel")

    @classmethod
    def linear(cls):
        return cls("linear")

    @classmethod
    def polynomial(cls, c=0.0, d=3):
        return cls("polynomial", c=c, d=d)

    @classmethod
    def rbf(cls, sigma=1.0):
        return cls("rbf", sigma=sigma)

    @property
    def nonlinear(self):
        return self.kind != "linear"

    def apply(self, inner, left_sq=None, right_sq=None, self_pairs=None):
        """Map reduced inner products to kernel values (vectorised).

        ``left_sq``/``right_sq`` are the squared norms broadcast along rows
        and columns of ``inner``; only the RBF kernel reads them, together
        with ``self_pairs``, an index pair of entries that compare a row with
        itself and therefore have distance exactly zero.
        """
        if self.kind == "linear":
            return inner
        if self.kind == "polynomial":
            base = inner + self.c
            out = base.copy()
            for _ in range(self.d - 1):
                out *= base
            return out
        dist = np.add.outer(left_sq, right_sq) if np.ndim(inner) == 2 else left_sq + right_sq
        # cancellation can leave tiny negatives
        dist = np.maximum(dist - 2.0 * inner, 0.0)
        if self_pairs is not None:
            dist[self_pairs] = 0.0
        return np.exp(-self.sigma * dist)


@dataclass(frozen=True, eq=False)
class KernelPanel:
    """Dense ``m x k`` slice of the kernel matrix; column j is ``K(A, A[sampled_rows[j]])``."""

    values: np.ndarray
    sampled_rows: np.ndarray

    @property
    def shape(self):
        return self.values.shape


def _dense_row(a):
    if sp.issparse(a):
        return np.asarray(a.toarray(), dtype=np.float64).ravel()
    if isinstance(a, tuple) and len(a) == 3:
        # (indices, values, dim)
        idx, vals, dim = a
        out = np.zeros(dim)
        out[np.asarray(idx, dtype=np.int64)] = vals
        return out
    return np.asarray(a, dtype=np.float64).ravel()


def kernel_scalar(spec: KernelSpec, a, b) -> float:
    """Kernel value of two rows (dense arrays, scipy sparse rows, or ``(idx, val, dim)``)."""
    a = _dense_row(a)
    b = _dense_row(b)
    if a.shape != b.shape:
        raise ValueError("rows must have the same dimension")
    return float(spec.apply(np.float64(a @ b), np.float64(a @ a), np.float64(b @ b)))


def _check_rows(A: SparseMatrix, rows):
    rows = np.asarray(rows, dtype=np.int64).ravel()
    if rows.size and (rows.min() < 0 or rows.max() >= A.rows):
        raise IndexError(f"sampled row out of range for a matrix with {A.rows} rows")
    return rows


def _partial_gram(block: sp.csr_matrix, rows):
    # m x k inner products over the columns held in ``block``
    return np.asarray((block @ block[rows].T).toarray(), dtype=np.float64)


def _finish(spec, A, inner, rows):
    if spec.kind == "rbf":
        norms = A.row_sq_norms
        values = spec.apply(inner, norms, norms[rows], (rows, np.arange(len(rows))))
    else:
        values = spec.apply(inner)
    return KernelPanel(np.asfortranarray(values), rows)


def sampled_panel(spec: KernelSpec, A: SparseMatrix, rows) -> KernelPanel:
    """Kernel of every row of ``A`` against the sampled rows, as a dense panel.

    Repeated indices are allowed and yield repeated columns.
    """
    rows = _check_rows(A, rows)
    return _finish(spec, A, _partial_gram(A.csr, rows), rows)


def sharded_panel(spec: KernelSpec, A: SparseMatrix, rows, partition: ColumnPartition,
                  ledger: CostLedger | None = None) -> KernelPanel:
    """Panel computed from per-shard partial Gram blocks under a 1D column layout.

    Every shard multiplies its own column slice, the partial panels are
    summed in shard-index order (the allreduce), and only then is the
    nonlinearity applied. The ledger is charged one allreduce of
    ``len(rows) * m`` words, the critical-path GEMM flops and ``mu`` per
    nonlinear entry.
    """
    rows = _check_rows(A, rows)
    k, m = len(rows), A.rows
    if partition.num_shards == 1:
        blocks = [A.csr]
    else:
        blocks = [A.column_block(lo, hi) for lo, hi in partition.shard_ranges]
    inner = None
    shard_flops = []
    for block in blocks:
        partial = _partial_gram(block, rows)
        shard_flops.append(float(k * block.nnz))
        if inner is None:
            inner = partial
        else:
            inner += partial
    if ledger is not None:
        ledger.charge_shards(shard_flops)
        ledger.charge("kernel", flops=max(shard_flops))
        charge_allreduce(ledger, k * m, partition.num_shards)
        if spec.nonlinear:
            ledger.charge("kernel", flops=ledger.mu * k * m)
    return _finish(spec, A, inner, rows)


def full_panel(spec, A):
    """``K(A, A)``; test-scale helper for symmetry and PSD checks."""
    return sampled_panel(spec, A, np.arange(A.rows)).values
