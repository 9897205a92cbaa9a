"""Command-line front end.

Exit codes: 0 success, 1 equivalence check failed, 2 bad path or usage,
3 parse/label error, 4 numerical or resource error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import oracle
from .bdcd import KrrConfig, solve_bdcd, solve_sstep_bdcd
from .costmodel import CostLedger, MachineParams, predict_time
from .data import generate_synthetic, load_libsvm, normalize_labels, write_libsvm
from .dcd import SvmConfig, solve_dcd, solve_sstep_dcd
from .errors import LabelError, NumericalError, ParseError, ResourceError
from .kernel import KernelSpec

EQUIVALENCE_TOL = 1e-8
# 2000 x 800000 at 1% density, scaled down 10x for a desk machine
SYNTHETIC_DEFAULT = (200, 80000, 800)


class UsageError(Exception):
    pass


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise FileNotFoundError(f"output directory does not exist: {directory}")
    tmp = f"{path}.tmp{os.getpid()}"
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def emit_trace(metrics, path):
    """Write metrics as ``iteration,metric,value`` CSV, sorted by iteration."""
    if not metrics:
        raise ValueError("trace is empty")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iteration", "metric", "value"])
    for metric in sorted(metrics, key=lambda m: m.iteration):
        writer.writerow([metric.iteration, metric.kind, f"{metric.value:.17g}"])
    _atomic_write(path, buf.getvalue())


def _kernel(args):
    if args.kernel == "linear":
        return KernelSpec.linear()
    if args.kernel == "poly":
        return KernelSpec.polynomial(c=args.coef0, d=args.degree)
    return KernelSpec.rbf(sigma=args.sigma)


def _dataset(args, task):
    if args.data is not None:
        if not os.path.isfile(args.data):
            raise FileNotFoundError(f"no such file: {args.data}")
        ds = load_libsvm(args.data)
    else:
        m, n, nnz = args.synthetic
        ds = generate_synthetic(m, n, nnz, args.seed, task)
    if task == "classification":
        return ds.features, normalize_labels(ds.labels)
    return ds.features, np.array(ds.labels)


def _machine(args):
    return MachineParams(gamma=args.gamma, beta=args.beta, phi=args.phi, mu=args.mu,
                         P=args.shards)


def _run_svm(args, A, y, kernel, s, ledger=None, monitor=None):
    config = SvmConfig(args.variant, args.C, args.iters, s, args.seed)
    solver = solve_dcd if s == 1 else solve_sstep_dcd
    return solver(A, y, config, kernel, shards=args.shards, ledger=ledger, monitor=monitor,
                  trace_every=args.trace_every if monitor else None, tol=args.tol), config


def _run_krr(args, A, y, kernel, s, ledger=None, monitor=None):
    b = min(args.block_size, A.rows)
    config = KrrConfig(args.lam, b, args.iters, s, args.seed)
    solver = solve_bdcd if s == 1 else solve_sstep_bdcd
    return solver(A, y, config, kernel, shards=args.shards, ledger=ledger, monitor=monitor,
                  trace_every=args.trace_every if monitor else None, tol=args.tol), config


def _write_outputs(args, kind, solution, ledger):
    metrics = [oracle.ConvergenceMetric(kind, v, it) for it, v in solution.trace]
    if args.out and metrics:
        emit_trace(metrics, args.out)
    if args.cost_out:
        _atomic_write(args.cost_out, ledger.to_json(_machine(args)) + "\n")
    final = f"{kind}={metrics[-1].value:.6g}" if metrics else "trace=off"
    print(f"{args.command}: {final} iterations={solution.iterations_run} s={args.s_step}")


def cmd_train_ksvm(args):
    A, y = _dataset(args, "classification")
    kernel = _kernel(args)
    monitor = oracle.GapMonitor(A, y, kernel, SvmConfig(args.variant, args.C))
    ledger = CostLedger(mu=args.mu)
    solution, _ = _run_svm(args, A, y, kernel, args.s_step, ledger, monitor)
    _write_outputs(args, "duality_gap", solution, ledger)
    return 0


def cmd_train_krr(args):
    A, y = _dataset(args, "regression")
    kernel = _kernel(args)
    monitor = None
    if A.rows <= args.oracle_cap:
        monitor = oracle.RelativeErrorMonitor(
            oracle.krr_closed_form(A, y, args.lam, kernel, cap=args.oracle_cap))
    else:
        print(f"note: m={A.rows} exceeds --oracle-cap, trace disabled", file=sys.stderr)
    ledger = CostLedger(mu=args.mu)
    solution, _ = _run_krr(args, A, y, kernel, args.s_step, ledger, monitor)
    _write_outputs(args, "relative_error", solution, ledger)
    return 0


def _runner_for(args):
    if args.problem == "krr":
        return "regression", _run_krr
    args.variant = "L1" if args.problem == "ksvm-l1" else "L2"
    return "classification", _run_svm


def cmd_verify(args):
    task, run = _runner_for(args)
    A, y = _dataset(args, task)
    kernel = _kernel(args)
    args.tol = None
    classical, _ = run(args, A, y, kernel, 1)
    sstep, _ = run(args, A, y, kernel, args.s_step)
    deviation = oracle.relative_deviation(sstep.alpha, classical.alpha)
    ok = deviation <= EQUIVALENCE_TOL
    print(f"verify-equivalence: problem={args.problem} s={args.s_step} "
          f"iterations={classical.iterations_run} max_relative_deviation={deviation:.3e} "
          f"{'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_cost_report(args):
    task, run = _runner_for(args)
    A, y = _dataset(args, task)
    args.tol = None
    ledger = CostLedger(mu=args.mu)
    solution, _ = run(args, A, y, _kernel(args), args.s_step, ledger)
    machine = _machine(args)
    report = ledger.to_json(machine) + "\n"
    if args.out:
        _atomic_write(args.out, report)
    print(f"cost-report: flops={ledger.flops:.6g} words={ledger.words} "
          f"messages={ledger.messages} predicted_seconds={predict_time(ledger, machine):.6g} "
          f"iterations={solution.iterations_run} s={args.s_step}")
    return 0


def cmd_gen_synthetic(args):
    m, n, nnz = args.synthetic
    ds = generate_synthetic(m, n, nnz, args.seed, args.task)
    if not args.out:
        raise UsageError("gen-synthetic requires --out")
    directory = os.path.dirname(os.path.abspath(args.out))
    if not os.path.isdir(directory):
        raise FileNotFoundError(f"output directory does not exist: {directory}")
    write_libsvm(ds, args.out)
    print(f"gen-synthetic: m={m} n={n} nnz={ds.features.nnz} density={ds.features.density:.6g}")
    return 0


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--data", help="LIBSVM input file")
    src.add_argument("--synthetic", nargs=3, type=int, metavar=("M", "N", "NNZ_PER_ROW"),
                     default=SYNTHETIC_DEFAULT, help="synthetic dataset shape")
    common.add_argument("--kernel", choices=("linear", "poly", "rbf"), default="linear")
    common.add_argument("--degree", type=int, default=3)
    common.add_argument("--coef0", type=float, default=0.0)
    common.add_argument("--sigma", type=float, default=1.0)
    common.add_argument("--C", dest="C", type=float, default=1.0)
    common.add_argument("--lambda", dest="lam", type=float, default=1.0)
    common.add_argument("--block-size", type=_positive_int, default=1)
    common.add_argument("--s-step", type=_positive_int, default=1)
    common.add_argument("--iters", type=int, default=1000)
    common.add_argument("--shards", type=_positive_int, default=1)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trace-every", type=_positive_int, default=10)
    common.add_argument("--tol", type=float, default=None,
                        help="stop once the traced metric falls to this value")
    common.add_argument("--out", help="output path (trace CSV, cost JSON or LIBSVM file)")
    common.add_argument("--cost-out", help="also write the cost ledger JSON here")
    common.add_argument("--oracle-cap", type=int, default=oracle.DEFAULT_CAP)
    common.add_argument("--gamma", type=float, default=MachineParams.gamma)
    common.add_argument("--beta", type=float, default=MachineParams.beta)
    common.add_argument("--phi", type=float, default=MachineParams.phi)
    common.add_argument("--mu", type=float, default=MachineParams.mu)

    parser = argparse.ArgumentParser(prog="cakcd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-ksvm", parents=[common], help="DCD / s-step DCD for kernel SVM")
    p.add_argument("--variant", choices=("L1", "L2"), default="L1")
    p.set_defaults(func=cmd_train_ksvm)

    p = sub.add_parser("train-krr", parents=[common], help="BDCD / s-step BDCD for kernel ridge")
    p.set_defaults(func=cmd_train_krr)

    for name, func, helptext in (
            ("verify-equivalence", cmd_verify, "compare s-step and classical iterates"),
            ("cost-report", cmd_cost_report, "run a solver and report Hockney-model costs")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--problem", choices=("ksvm-l1", "ksvm-l2", "krr"), default="krr")
        p.set_defaults(func=func)

    p = sub.add_parser("gen-synthetic", parents=[common], help="write a synthetic LIBSVM file")
    p.add_argument("--task", choices=("classification", "regression"), default="classification")
    p.set_defaults(func=cmd_gen_synthetic)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.iters < 0:
        parser.error("--iters must be nonnegative")
    try:
        return args.func(args)
    except (OSError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, LabelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, ResourceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
