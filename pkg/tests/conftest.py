import pathlib

import numpy as np
import pytest

from cakcd.data import SparseMatrix
from cakcd.kernel import KernelSpec

FIXTURES = pathlib.Path(__file__).parent / "fixtures"

KERNELS = {
    "linear": KernelSpec.linear(),
    "poly": KernelSpec.polynomial(c=0.0, d=3),
    "rbf": KernelSpec.rbf(sigma=1.0),
}


def random_sparse(rng, m, n, density=0.5, scale=1.0):
    """Random sparse matrix with no empty rows (an empty row has a zero linear diagonal)."""
    dense = rng.standard_normal((m, n)) * (rng.random((m, n)) < density)
    cols = rng.integers(n, size=m)
    dense[np.arange(m), cols] = rng.standard_normal(m) + np.sign(rng.standard_normal(m))
    return SparseMatrix.from_dense(scale * dense)


def random_labels(rng, m):
    y = np.where(rng.random(m) < 0.5, -1.0, 1.0)
    y[0], y[-1] = 1.0, -1.0
    return y


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=sorted(KERNELS))
def kernel(request):
    return KERNELS[request.param]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
