"""Dense ground-truth computations used to check the iterative solvers.

Everything here materialises the full ``m x m`` kernel through a dense,
direct evaluation (pairwise differences for RBF, a ``**`` power for the
polynomial kernel) that shares no code with :mod:`cakcd.kernel`. Inputs
larger than ``cap`` samples are refused.

Duality gap convention: the dual is stated as a minimisation ``D_min``,
so the nonnegative gap is ``P + D_min`` (primal minus the max-form dual).
For L2 the primal is ``1/2 |x|^2 + C sum(max(1 - f_i, 0)**2)``, whose
Lagrangian dual carries the ``|alpha|^2 / (4C)`` term, so the gap closes
to zero at the optimum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import SparseMatrix
from .errors import DomainError, NumericalError, ResourceError

DEFAULT_CAP = 4096


@dataclass(frozen=True)
class ConvergenceMetric:
    kind: str
    value: float
    iteration: int = 0

    def __post_init__(self):
        if self.kind not in ("duality_gap", "relative_error", "dual_objective"):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.kind == "relative_error" and self.value < 0:
            raise ValueError("relative error cannot be negative")


def _dense(A, cap):
    if A.rows > cap:
        raise ResourceError(f"refusing to materialise a {A.rows}x{A.rows} kernel (cap {cap})")
    return A.to_dense() if isinstance(A, SparseMatrix) else np.asarray(A, dtype=np.float64)


def kernel_matrix(A, kernel, cap=DEFAULT_CAP):
    D = _dense(A, cap)
    if kernel.kind == "linear":
        return D @ D.T
    if kernel.kind == "polynomial":
        return (kernel.c + D @ D.T) ** kernel.d
    dist = np.empty((len(D), len(D)))
    for i, row in enumerate(D):
        diff = D - row
        dist[i] = np.einsum("ij,ij->i", diff, diff)
    return np.exp(-kernel.sigma * dist)


def svm_hessian(A, y, kernel, cap=DEFAULT_CAP):
    """``Q = diag(y) K diag(y)``."""
    y = np.asarray(y, dtype=np.float64)
    return y[:, None] * kernel_matrix(A, kernel, cap) * y[None, :]


def krr_closed_form(A, y, lam, kernel, cap=DEFAULT_CAP):
    """Solve ``((1/lam) K + m I) alpha = y`` by dense Cholesky."""
    y = np.asarray(y, dtype=np.float64)
    m = len(y)
    system = kernel_matrix(A, kernel, cap) / lam + m * np.eye(m)
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(system, lower=True), y)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(str(exc)) from None


def krr_dual_objective(alpha, A, y, lam, kernel, cap=DEFAULT_CAP):
    alpha = np.asarray(alpha, dtype=np.float64)
    m = len(alpha)
    Ka = kernel_matrix(A, kernel, cap) @ alpha
    return 0.5 * alpha @ (Ka / lam + m * alpha) - alpha @ np.asarray(y, dtype=np.float64)


def _feasible(alpha, config):
    if np.any(alpha < 0) or (config.variant == "L1" and np.any(alpha > config.C)):
        raise DomainError(f"alpha is infeasible for the {config.variant} dual")


def _dual_value(alpha, Q, config):
    value = 0.5 * alpha @ Q @ alpha - alpha.sum()
    if config.variant == "L2":
        value += (alpha @ alpha) / (4.0 * config.C)
    return value


def _primal_value(alpha, Q, config):
    margins = Q @ alpha  # y_i f(a_i)
    hinge = np.maximum(1.0 - margins, 0.0)
    loss = hinge.sum() if config.variant == "L1" else (hinge ** 2).sum()
    return 0.5 * alpha @ margins + config.C * loss


def svm_dual_objective(alpha, A, y, kernel, config, cap=DEFAULT_CAP):
    """Min-form dual value ``1/2 a'Qa - sum(a)`` (+ ``|a|^2/(4C)`` for L2)."""
    alpha = np.asarray(alpha, dtype=np.float64)
    _feasible(alpha, config)
    return _dual_value(alpha, svm_hessian(A, y, kernel, cap), config)


def svm_primal_objective(alpha, A, y, kernel, config, cap=DEFAULT_CAP):
    """Primal value at ``x = sum_j alpha_j y_j phi(a_j)``; no bias term."""
    alpha = np.asarray(alpha, dtype=np.float64)
    return _primal_value(alpha, svm_hessian(A, y, kernel, cap), config)


def duality_gap(alpha, A, y, kernel, config, iteration=0, cap=DEFAULT_CAP) -> ConvergenceMetric:
    alpha = np.asarray(alpha, dtype=np.float64)
    _feasible(alpha, config)
    Q = svm_hessian(A, y, kernel, cap)
    gap = _primal_value(alpha, Q, config) + _dual_value(alpha, Q, config)
    return ConvergenceMetric("duality_gap", float(gap), iteration)


class GapMonitor:
    """Reusable duality-gap evaluator; builds ``Q`` once for repeated tracing."""

    def __init__(self, A, y, kernel, config, cap=DEFAULT_CAP):
        self.Q = svm_hessian(A, y, kernel, cap)
        self.config = config

    def __call__(self, alpha):
        return float(_primal_value(alpha, self.Q, self.config)
                     + _dual_value(alpha, self.Q, self.config))


def relative_error(alpha, alpha_star, iteration=0) -> ConvergenceMetric:
    alpha = np.asarray(alpha, dtype=np.float64)
    alpha_star = np.asarray(alpha_star, dtype=np.float64)
    ref = np.linalg.norm(alpha_star)
    if ref == 0:
        raise DomainError("reference solution has zero norm")
    return ConvergenceMetric("relative_error", float(np.linalg.norm(alpha - alpha_star) / ref),
                             iteration)


class RelativeErrorMonitor:
    def __init__(self, alpha_star):
        self.alpha_star = np.asarray(alpha_star, dtype=np.float64)
        self.norm = np.linalg.norm(self.alpha_star)
        if self.norm == 0:
            raise DomainError("reference solution has zero norm")

    def __call__(self, alpha):
        return float(np.linalg.norm(alpha - self.alpha_star) / self.norm)


def relative_deviation(alpha, reference):
    """``|alpha - reference| / max(|reference|, 1)``, the equivalence-check metric."""
    alpha = np.asarray(alpha, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    return float(np.linalg.norm(alpha - reference) / max(np.linalg.norm(reference), 1.0))
