"""Block dual coordinate descent for kernel ridge regression, classical and s-step.

The dual solved here is

    min 1/2 a'((1/lam) K + m I)a - a'y,

whose minimiser satisfies ``((1/lam) K + m I) a* = y``. Each BDCD iteration
picks ``b`` distinct coordinates and solves the ``b x b`` subproblem
exactly. The s-step variant draws ``s`` blocks at once, forms the
``m x sb`` panel with one allreduce, and corrects every block's
right-hand side for the updates of earlier blocks in the same group.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import SparseMatrix
from .dcd import DualSolution, _runner
from .errors import NumericalError
from .kernel import KernelPanel, KernelSpec


@dataclass(frozen=True)
class KrrConfig:
    lam: float = 1.0
    b: int = 1
    H: int = 100
    s: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.b < 1 or self.s < 1 or self.H < 0:
            raise ValueError("need b >= 1, s >= 1, H >= 0")


@dataclass(frozen=True, eq=False)
class BlockSelection:
    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        if len(np.unique(idx)) != len(idx):
            raise ValueError("block indices must be distinct")
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True, eq=False)
class BlockSystem:
    G: np.ndarray
    rhs: np.ndarray
    delta: np.ndarray
    min_pivot: float


class BlockStream:
    """Blocks of ``b`` distinct coordinates, sampled independently per index.

    Like :class:`~cakcd.dcd.CoordinateStream` the draws are cached, so the
    classical and s-step solvers see identical blocks. A plain sequence of
    index arrays works as a stream too (e.g. to force overlaps).
    """

    def __init__(self, m, b, seed=0):
        if not 1 <= b <= m:
            raise ValueError(f"block size must lie in [1, m={m}]")
        self.m = m
        self.b = b
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._blocks = []

    def __getitem__(self, k):
        while len(self._blocks) <= k:
            self._blocks.append(self._rng.choice(self.m, size=self.b, replace=False))
        return self._blocks[k]


def _selection(block, m, b):
    sel = block if isinstance(block, BlockSelection) else BlockSelection(block)
    if len(sel) != b:
        raise ValueError(f"block has {len(sel)} indices, expected {b}")
    if sel.indices.min() < 0 or sel.indices.max() >= m:
        raise IndexError("block index out of range")
    return sel


def solve_block_system(G, rhs) -> BlockSystem:
    """Cholesky solve of one SPD block system."""
    try:
        factor, lower = scipy.linalg.cho_factor(G, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"block system is not positive definite: {exc}") from None
    delta = scipy.linalg.cho_solve((factor, lower), rhs)
    return BlockSystem(G, rhs, delta, float(np.min(np.diag(factor))))


def block_system(alpha, sel: BlockSelection, U, y, lam) -> BlockSystem:
    idx = sel.indices
    m = len(alpha)
    G = U[idx, :] / lam + m * np.eye(len(idx))
    rhs = y[idx] - m * alpha[idx] - (U.T @ alpha) / lam
    return solve_block_system(G, rhs)


def bdcd_step(alpha, sel, panel, y, config: KrrConfig) -> np.ndarray:
    """One classical BDCD update of ``alpha`` in place; returns the block step."""
    U = panel.values if isinstance(panel, KernelPanel) else np.asarray(panel)
    sel = _selection(sel, len(alpha), config.b)
    delta = block_system(alpha, sel, U, np.asarray(y, dtype=np.float64), config.lam).delta
    alpha[sel.indices] += delta
    return delta


def _check_targets(A, y):
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (A.rows,):
        raise ValueError("need one target per row")
    return y


def _charge_block(run, m, b):
    run.charge("correction", b * m)
    run.charge("solve", b ** 3)


def solve_bdcd(A: SparseMatrix, y, config: KrrConfig, kernel: KernelSpec, stream=None, *,
               shards=1, ledger=None, monitor=None, trace_every=None, tol=None,
               alpha0=None) -> DualSolution:
    """Classical BDCD: ``config.H`` exact block minimisations.

    Keyword arguments behave as in :func:`cakcd.dcd.solve_dcd`; a typical
    monitor is the relative error against :func:`cakcd.oracle.krr_closed_form`.
    """
    y = _check_targets(A, y)
    m, b = A.rows, config.b
    if b > m:
        raise ValueError("block size exceeds number of samples")
    stream = BlockStream(m, b, config.seed) if stream is None else stream
    run = _runner(A, y, kernel, shards, ledger, monitor, trace_every, tol, signed=False)
    alpha = np.zeros(m) if alpha0 is None else np.array(alpha0, dtype=np.float64)
    it = 0
    while it < config.H:
        sel = _selection(stream[it], m, b)
        U = run.panel(sel.indices)
        delta = block_system(alpha, sel, U, y, config.lam).delta
        alpha[sel.indices] += delta
        _charge_block(run, m, b)
        it += 1
        if run.checkpoint(it, alpha):
            break
    run.checkpoint(it, alpha, final=True)
    return DualSolution(alpha, it, run.trace, ledger)


def solve_sstep_bdcd(A: SparseMatrix, y, config: KrrConfig, kernel: KernelSpec, stream=None, *,
                     shards=1, ledger=None, monitor=None, trace_every=None, tol=None,
                     alpha0=None) -> DualSolution:
    """s-step BDCD: ``H // s`` groups of ``s`` deferred block updates, then ``H % s`` classical ones.

    Within a group, block ``j`` sees the earlier steps ``t < j`` through two
    corrections to its right-hand side: ``m * V_j'V_t d_t`` (nonzero only
    where the blocks share coordinates) and ``(1/lam) U_j'V_t d_t``.
    """
    y = _check_targets(A, y)
    m, b, s, lam = A.rows, config.b, config.s, config.lam
    if b > m:
        raise ValueError("block size exceeds number of samples")
    stream = BlockStream(m, b, config.seed) if stream is None else stream
    run = _runner(A, y, kernel, shards, ledger, monitor, trace_every, tol, signed=False)
    alpha = np.zeros(m) if alpha0 is None else np.array(alpha0, dtype=np.float64)
    eye = np.eye(b)
    it = 0
    stopped = False
    for _ in range(config.H // s):
        sels = [_selection(stream[it + j], m, b) for j in range(s)]
        omega = np.concatenate([sel.indices for sel in sels])
        Q = run.panel(omega)
        base = Q.T @ alpha
        steps = np.zeros(s * b)
        # sum_{t<j} V_t d_t, kept as a dense m-vector
        carried = np.zeros(m)
        correction_flops = 0
        for j, sel in enumerate(sels):
            idx = sel.indices
            cols = slice(j * b, (j + 1) * b)
            U = Q[:, cols]
            G = U[idx, :] / lam + m * eye
            # sum_t U_j' V_t d_t: per-pair gather (j b^2) or one product with carried (b m)
            if j * b <= m:
                gram_corr = U[omega[:j * b], :].T @ steps[:j * b]
                correction_flops += j * b * b
            else:
                gram_corr = U.T @ carried
                correction_flops += b * m
            rhs = (y[idx] - m * alpha[idx] - base[cols] / lam
                   - m * carried[idx] - gram_corr / lam)
            delta = solve_block_system(G, rhs).delta
            steps[cols] = delta
            carried[idx] += delta
        for j, sel in enumerate(sels):
            alpha[sel.indices] += steps[j * b:(j + 1) * b]
        run.charge("correction", s * b * m + correction_flops)
        run.charge("solve", s * b ** 3)
        it += s
        if run.checkpoint(it, alpha):
            stopped = True
            break
    while not stopped and it < config.H:
        sel = _selection(stream[it], m, b)
        U = run.panel(sel.indices)
        delta = block_system(alpha, sel, U, y, lam).delta
        alpha[sel.indices] += delta
        _charge_block(run, m, b)
        it += 1
        stopped = run.checkpoint(it, alpha)
    run.checkpoint(it, alpha, final=True)
    return DualSolution(alpha, it, run.trace, ledger)
