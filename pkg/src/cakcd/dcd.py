"""Dual coordinate descent for kernel SVM, classical and s-step.

Both solvers minimise the L1 or L2 (smoothed) hinge-loss dual

    1/2 a'Qa - sum(a) + omega * |a|^2 / 2,   0 <= a_i <= nu,

with ``Q = diag(y) K diag(y)``, ``nu = C, omega = 0`` for L1 and
``nu = inf, omega = 1/(2C)`` for L2. No bias term is modelled.

The s-step solver computes the ``m x s`` panel of an entire block of
coordinates with one (simulated) allreduce, then replays the ``s``
coordinate updates against the block-start iterate using the unrolled
gradient corrections. Given the same coordinate stream it reproduces the
classical iterates up to roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .costmodel import CostLedger
from .data import SparseMatrix, partition_columns
from .errors import LabelError, NumericalError
from .kernel import KernelSpec, sharded_panel


@dataclass(frozen=True)
class SvmConfig:
    variant: str = "L1"
    C: float = 1.0
    H: int = 1000
    s: int = 1
    seed: int = 0

    def __post_init__(self):
        variant = self.variant.upper()
        if variant not in ("L1", "L2"):
            raise ValueError(f"unknown SVM variant {self.variant!r}")
        object.__setattr__(self, "variant", variant)
        if not self.C > 0:
            raise ValueError("C must be positive")
        if self.H < 0 or self.s < 1:
            raise ValueError("need H >= 0 and s >= 1")

    @property
    def nu(self):
        return self.C if self.variant == "L1" else math.inf

    @property
    def omega(self):
        return 0.0 if self.variant == "L1" else 1.0 / (2.0 * self.C)


@dataclass
class DualSolution:
    alpha: np.ndarray
    iterations_run: int = 0
    trace: list = field(default_factory=list)  # (iteration, value) pairs
    ledger: CostLedger | None = None


class CoordinateStream:
    """Uniform coordinate draws in ``[0, m)``, indexed by iteration.

    Draws are generated sequentially from one seeded generator and cached,
    so ``stream[t]`` is the same no matter which solver asks or in which
    grouping. Any integer sequence can stand in for a stream.
    """

    def __init__(self, m, seed=0):
        if m < 1:
            raise ValueError("need at least one coordinate")
        self.m = m
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._draws = []

    def __getitem__(self, t):
        while len(self._draws) <= t:
            self._draws.append(int(self._rng.integers(self.m)))
        return self._draws[t]

    def take(self, start, count):
        return np.array([self[start + j] for j in range(count)], dtype=np.int64)


def _take(stream, start, count):
    return np.array([int(stream[start + j]) for j in range(count)], dtype=np.int64)


def signed_rows(A: SparseMatrix, y) -> SparseMatrix:
    """``diag(y) @ A`` without touching the sparsity pattern."""
    return A.scale_rows(y)


def _check_labels(A, y):
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (A.rows,):
        raise ValueError("need one label per row")
    if not np.all((y == 1.0) | (y == -1.0)):
        raise LabelError("SVM labels must be -1 or +1")
    return y


def _clip(x, nu):
    return min(max(x, 0.0), nu)


def _coordinate_update(current, g, eta, nu):
    """Step length for one coordinate, zero at a projected-gradient fixed point."""
    if _clip(current - g, nu) - current == 0.0:
        return 0.0
    if not eta > 0:
        raise NumericalError(f"nonpositive curvature eta={eta}")
    return _clip(current - g / eta, nu) - current


def dcd_step(alpha, i, column, config: SvmConfig) -> float:
    """One classical DCD update of ``alpha[i]`` in place; returns the step taken.

    ``column`` is the dual Hessian column ``Q[:, i]``.
    """
    omega = config.omega
    eta = column[i] + omega
    g = column @ alpha - 1.0 + omega * alpha[i]
    theta = _coordinate_update(alpha[i], g, eta, config.nu)
    alpha[i] += theta
    return theta


class _Runner:
    """Shared bookkeeping: panels through the sharded executor, tracing, early stop."""

    def __init__(self, A, y, kernel, shards, ledger, monitor, trace_every, tol, signed):
        self.A = A
        self.y = y
        self.kernel = kernel
        self.partition = partition_columns(A.cols, shards)
        self.ledger = ledger
        self.monitor = monitor
        self.trace_every = trace_every
        self.tol = tol
        self.signed = signed
        self.trace = []
        self._last_traced = 0

    def panel(self, rows):
        values = sharded_panel(self.kernel, self.A, rows, self.partition, self.ledger).values
        if self.signed:
            values = values * self.y[:, None] * self.y[rows][None, :]
        return values

    def charge(self, phase, flops):
        if self.ledger is not None:
            self.ledger.charge(phase, flops=flops)

    def checkpoint(self, iteration, alpha, final=False):
        """Record the monitor at trace boundaries; True means stop early."""
        if self.monitor is None or self.trace_every is None:
            return False
        crossed = iteration // self.trace_every > self._last_traced // self.trace_every
        if not crossed and not (final and iteration != self._last_traced):
            return False
        value = float(self.monitor(alpha))
        self.trace.append((iteration, value))
        self._last_traced = iteration
        return self.tol is not None and value <= self.tol


def _runner(A, y, kernel, shards, ledger, monitor, trace_every, tol, signed):
    if trace_every is not None and trace_every < 1:
        raise ValueError("trace interval must be at least 1")
    return _Runner(A, y, kernel, shards, ledger, monitor, trace_every, tol, signed)


def solve_dcd(A: SparseMatrix, y, config: SvmConfig, kernel: KernelSpec, stream=None, *,
              shards=1, ledger=None, monitor: Callable | None = None,
              trace_every=None, tol=None, alpha0=None) -> DualSolution:
    """Classical DCD: ``config.H`` single-coordinate updates.

    Parameters
    ----------
    stream : indexable of int, optional
        Coordinate for each iteration; defaults to ``CoordinateStream(m, config.seed)``.
    shards : int
        Column shards used to form each kernel column (affects only the ledger).
    monitor : callable, optional
        ``monitor(alpha) -> float`` evaluated every ``trace_every``
        iterations and at the end; results land in ``DualSolution.trace``.
    tol : float, optional
        Stop once a monitored value is ``<= tol``.
    """
    y = _check_labels(A, y)
    stream = CoordinateStream(A.rows, config.seed) if stream is None else stream
    run = _runner(A, y, kernel, shards, ledger, monitor, trace_every, tol, signed=True)
    alpha = np.zeros(A.rows) if alpha0 is None else np.array(alpha0, dtype=np.float64)
    m = A.rows
    it = 0
    while it < config.H:
        i = int(stream[it])
        column = run.panel(np.array([i]))[:, 0]
        dcd_step(alpha, i, column, config)
        run.charge("correction", m)
        run.charge("solve", 1)
        it += 1
        if run.checkpoint(it, alpha):
            break
    run.checkpoint(it, alpha, final=True)
    return DualSolution(alpha, it, run.trace, ledger)


def solve_sstep_dcd(A: SparseMatrix, y, config: SvmConfig, kernel: KernelSpec, stream=None, *,
                    shards=1, ledger=None, monitor=None, trace_every=None, tol=None,
                    alpha0=None) -> DualSolution:
    """s-step DCD: ``H // s`` blocks of ``s`` deferred updates, then ``H % s`` classical steps.

    Each block draws ``s`` coordinates (duplicates allowed) in the same
    order the classical solver would, forms the ``m x s`` panel once, and
    evaluates every gradient against the block-start iterate plus the
    corrections from earlier steps of the block. ``alpha`` is written once
    per block. Tracing and early stopping happen at block boundaries.
    """
    y = _check_labels(A, y)
    stream = CoordinateStream(A.rows, config.seed) if stream is None else stream
    run = _runner(A, y, kernel, shards, ledger, monitor, trace_every, tol, signed=True)
    alpha = np.zeros(A.rows) if alpha0 is None else np.array(alpha0, dtype=np.float64)
    s, nu, omega = config.s, config.nu, config.omega
    m = A.rows
    it = 0
    stopped = False
    for _ in range(config.H // s):
        idx = _take(stream, it, s)
        U = run.panel(idx)
        eta = U[idx, np.arange(s)] + omega
        theta = np.zeros(s)
        for j in range(s):
            i = idx[j]
            same = idx[:j] == i
            # alpha_{sk+j-1}[i] without forming alpha_{sk+j-1}
            carried = theta[:j][same].sum()
            rho = alpha[i] + carried
            g = (U[:, j] @ alpha - 1.0 + omega * alpha[i]
                 + U[idx[:j], j] @ theta[:j] + omega * carried)
            theta[j] = _coordinate_update(rho, g, eta[j], nu)
        np.add.at(alpha, idx, theta)
        run.charge("correction", s * m + math.comb(s, 2))
        run.charge("solve", s)
        it += s
        if run.checkpoint(it, alpha):
            stopped = True
            break
    while not stopped and it < config.H:
        i = int(stream[it])
        column = run.panel(np.array([i]))[:, 0]
        dcd_step(alpha, i, column, config)
        run.charge("correction", m)
        run.charge("solve", 1)
        it += 1
        stopped = run.checkpoint(it, alpha)
    run.checkpoint(it, alpha, final=True)
    return DualSolution(alpha, it, run.trace, ledger)
