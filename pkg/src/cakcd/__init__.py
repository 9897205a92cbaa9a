"""Classical and s-step (communication-avoiding) kernel coordinate descent.

DCD / s-step DCD solve the L1 and L2 kernel SVM duals, BDCD / s-step BDCD
solve kernel ridge regression. Kernel panels go through a simulated
column-sharded executor that records Hockney-model costs.
"""

from .bdcd import KrrConfig, solve_bdcd, solve_sstep_bdcd
from .costmodel import CostLedger, MachineParams, predict_time, theorem_bound
from .data import (
    LabeledDataset,
    SparseMatrix,
    generate_synthetic,
    load_libsvm,
    parse_libsvm,
    partition_columns,
)
from .dcd import DualSolution, SvmConfig, solve_dcd, solve_sstep_dcd
from .kernel import KernelSpec, sampled_panel, sharded_panel

__version__ = "0.1.0"

__all__ = [
    "CostLedger", "DualSolution", "KernelSpec", "KrrConfig", "LabeledDataset",
    "MachineParams", "SparseMatrix", "SvmConfig", "generate_synthetic", "load_libsvm",
    "parse_libsvm", "partition_columns", "predict_time", "sampled_panel", "sharded_panel",
    "solve_bdcd", "solve_dcd", "solve_sstep_bdcd", "solve_sstep_dcd", "theorem_bound",
]
