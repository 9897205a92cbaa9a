"""Exit criteria for the package, one test per criterion.

Each test records a ``[criterion N] PASS|FAIL|SKIP ...`` line that is
echoed in the pytest terminal summary. Run just this module with

    pytest tests/test_acceptance.py
"""

import bz2
import math
import os
import time

import numpy as np
import pytest

from cakcd.bdcd import BlockStream, KrrConfig, solve_bdcd, solve_sstep_bdcd
from cakcd.costmodel import CostLedger, theorem_bound
from cakcd.data import (
    generate_synthetic,
    load_libsvm,
    parse_libsvm,
    partition_columns,
    serialize_libsvm,
)
from cakcd.dcd import SvmConfig, solve_dcd, solve_sstep_dcd
from cakcd.kernel import sampled_panel, sharded_panel
from cakcd.oracle import (
    GapMonitor,
    RelativeErrorMonitor,
    kernel_matrix,
    krr_closed_form,
    relative_deviation,
)

from conftest import FIXTURES, KERNELS, random_labels, random_sparse

RESULTS = []
SEEDS = range(20)


def report(number, ok, detail):
    line = f"[criterion {number}] {'PASS' if ok else 'FAIL'} {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_criterion_1_dcd_equivalence():
    start = time.perf_counter()
    worst, runs = 0.0, 0
    for seed in SEEDS:
        rng = np.random.default_rng(seed)
        m = int(rng.integers(16, 65))
        A = random_sparse(rng, m, 8)
        y = random_labels(rng, m)
        for kernel in KERNELS.values():
            for variant in ("L1", "L2"):
                base = SvmConfig(variant, C=1.0, H=128, s=1, seed=seed)
                ref = solve_dcd(A, y, base, kernel).alpha
                for s in (2, 4, 8, 16):
                    cfg = SvmConfig(variant, C=1.0, H=128, s=s, seed=seed)
                    got = solve_sstep_dcd(A, y, cfg, kernel).alpha
                    worst = max(worst, relative_deviation(got, ref))
                    runs += 1
    elapsed = time.perf_counter() - start
    report(1, worst <= 1e-8 and elapsed < 60,
           f"s-step DCD vs DCD: {runs} runs, max relative deviation {worst:.2e} (tol 1e-8), "
           f"{elapsed:.1f}s (limit 60s)")


def _overlap_stream(rng, m, b, count):
    # blocks drawn from a pool of b + 2 coordinates, so consecutive blocks must share entries
    pool = rng.choice(m, size=b + 2, replace=False)
    return [rng.choice(pool, size=b, replace=False) for _ in range(count)]


def test_criterion_2_bdcd_equivalence():
    worst, runs, overlapping = 0.0, 0, 0
    for seed in SEEDS:
        rng = np.random.default_rng(1000 + seed)
        m = int(rng.integers(64, 129))
        A = random_sparse(rng, m, 8)
        y = rng.standard_normal(m)
        for kernel in KERNELS.values():
            for b in (1, 2, 4, 64):
                for s in (2, 16, 256):
                    H = s if s == 256 else 4 * s
                    stream = BlockStream(m, b, seed)
                    ref = solve_bdcd(A, y, KrrConfig(1.0, b, H, 1, seed), kernel, stream).alpha
                    got = solve_sstep_bdcd(A, y, KrrConfig(1.0, b, H, s, seed), kernel,
                                           stream).alpha
                    worst = max(worst, relative_deviation(got, ref))
                    runs += 1
            forced = _overlap_stream(rng, m, 4, 32)
            for s in (2, 16):
                cfg = KrrConfig(0.5, 4, 32, s, seed)
                ref = solve_bdcd(A, y, cfg, kernel, forced).alpha
                got = solve_sstep_bdcd(A, y, cfg, kernel, forced).alpha
                worst = max(worst, relative_deviation(got, ref))
                runs += 1
                overlapping += 1
    report(2, worst <= 1e-8,
           f"s-step BDCD vs BDCD: {runs} runs ({overlapping} with forced block overlaps), "
           f"max relative deviation {worst:.2e} (tol 1e-8)")


def test_criterion_3_krr_convergence():
    start = time.perf_counter()
    ds = generate_synthetic(512, 8, 8, seed=2024, task="regression")
    A, y = ds.features, ds.labels
    details, ok = [], True
    for name, kernel in KERNELS.items():
        star = krr_closed_form(A, y, 1.0, kernel)
        for s in (1, 16):
            solver = solve_bdcd if s == 1 else solve_sstep_bdcd
            sol = solver(A, y, KrrConfig(1.0, 128, 4000, s, seed=5), kernel,
                         monitor=RelativeErrorMonitor(star), trace_every=16, tol=1e-8)
            err = sol.trace[-1][1]
            ok &= err <= 1e-8
            details.append(f"{name}/s={s}: {err:.1e} after {sol.iterations_run}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 120
    report(3, ok, f"K-RR m=512 b=128 relative error <= 1e-8 [{'; '.join(details)}], "
                  f"{elapsed:.1f}s (limit 120s)")


def test_criterion_4_ksvm_convergence():
    ds = generate_synthetic(48, 6, 6, seed=7, task="classification")
    A, y = ds.features, ds.labels
    details, ok, lowest = [], True, math.inf
    for name, kernel in KERNELS.items():
        for variant in ("L1", "L2"):
            cfg = SvmConfig(variant, C=1.0, H=200_000, seed=1)
            sol = solve_dcd(A, y, cfg, kernel, monitor=GapMonitor(A, y, kernel, cfg),
                            trace_every=A.rows, tol=1e-8)
            values = [v for _, v in sol.trace]
            lowest = min(lowest, min(values))
            ok &= values[-1] < 1e-8 and min(values) >= -1e-9
            details.append(f"{name}/{variant}: {values[-1]:.1e} @ {sol.iterations_run}")
    report(4, ok, f"DCD duality gap < 1e-8, min along trajectories {lowest:.1e} (>= -1e-9) "
                  f"[{'; '.join(details)}]")


def test_criterion_5_ledger_exactness():
    rng = np.random.default_rng(5)
    m, n, H = 60, 40, 64
    A = random_sparse(rng, m, n, density=0.3)
    y = rng.standard_normal(m)
    labels = random_labels(rng, m)
    ok, checked = True, 0
    for P in (1, 2, 3, 4, 8):
        for b in (1, 4):
            per_s = {}
            for s in (1, 2, 4, 8):
                ledger = CostLedger(mu=4.0)
                solver = solve_bdcd if s == 1 else solve_sstep_bdcd
                solver(A, y, KrrConfig(1.0, b, H, s, seed=P), KERNELS["rbf"], shards=P,
                       ledger=ledger)
                bound = theorem_bound("bdcd" if s == 1 else "sstep_bdcd",
                                      m, n, A.density, b, s, H, P, 4.0)
                ok &= ledger.words == H * b * m == bound.words
                ok &= ledger.messages == (H // s) * math.ceil(math.log2(P))
                per_s[s] = ledger
                checked += 1
            ok &= len({lg.words for lg in per_s.values()}) == 1
            ok &= per_s[8].messages * 8 == per_s[1].messages
        dcd = {}
        for s in (1, 8):
            ledger = CostLedger()
            solver = solve_dcd if s == 1 else solve_sstep_dcd
            solver(A, labels, SvmConfig("L1", 1.0, H, s, seed=P), KERNELS["poly"], shards=P,
                   ledger=ledger)
            ok &= ledger.words == H * m
            ok &= ledger.messages == (H // s) * math.ceil(math.log2(P))
            dcd[s] = ledger
            checked += 1
        ok &= dcd[8].messages * 8 == dcd[1].messages and dcd[8].words == dcd[1].words
    report(5, ok, f"{checked} ledgers: words == H*b*m, messages == (H/s)*ceil(log2 P), "
                  f"words s-invariant, messages(s=8) == messages(s=1)/8")


def test_criterion_6_shard_invariance():
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        A = random_sparse(rng, 16, 32, density=0.4)
        rows = rng.choice(16, size=5, replace=False)
        for kernel in KERNELS.values():
            ref = sampled_panel(kernel, A, rows).values
            for P in (1, 2, 3, 8):
                got = sharded_panel(kernel, A, rows, partition_columns(32, P)).values
                worst = max(worst, np.max(np.abs(got - ref)) / np.max(np.abs(ref)))
    report(6, worst <= 1e-10, f"sharded vs single-shard panels P in {{1,2,3,8}}: "
                              f"max relative diff {worst:.2e} (tol 1e-10)")


def test_criterion_7_full_block_exactness():
    worst, gap = 0.0, 0.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(5, 40))
        A = random_sparse(rng, m, 6)
        y = rng.standard_normal(m)
        for kernel in KERNELS.values():
            lam = 0.5
            sol = solve_bdcd(A, y, KrrConfig(lam, m, 1), kernel)
            K = kernel_matrix(A, kernel)
            residual = np.linalg.norm((K / lam + m * np.eye(m)) @ sol.alpha - y)
            worst = max(worst, residual)
            gap = max(gap, relative_deviation(sol.alpha, krr_closed_form(A, y, lam, kernel)))
            assert sol.iterations_run == 1
    report(7, worst <= 1e-10 and gap <= 1e-10,
           f"BDCD b=m, one iteration: max residual {worst:.2e} (tol 1e-10), "
           f"max deviation from closed form {gap:.2e}")


def _duke_path():
    env = os.environ.get("CAKCD_DUKE_PATH")
    candidates = [env] if env else []
    candidates += [FIXTURES / name for name in ("duke", "duke.bz2", "duke.tr", "duke.tr.bz2")]
    for path in candidates:
        if path and os.path.isfile(path):
            return str(path)
    return None


def test_criterion_8_parser():
    ok = True
    for name in ("two_rows", "mixed", "regression_crlf"):
        ds = load_libsvm(FIXTURES / f"{name}.svm")
        golden = (FIXTURES / f"{name}.golden").read_text()
        ok &= serialize_libsvm(ds) == golden
        ok &= parse_libsvm(golden, expected_features=ds.n).equals(ds)
    path = _duke_path()
    if path is None:
        report(8, ok, "golden round-trips on 3 fixtures; duke file not provided "
                      "(set CAKCD_DUKE_PATH to check 44 x 7129)")
        return
    opener = bz2.open if path.endswith(".bz2") else open
    with opener(path, "rb") as fh:
        duke = parse_libsvm(fh.read(), expected_features=7129)
    ok &= duke.features.shape == (44, 7129)
    report(8, ok, f"golden round-trips on 3 fixtures; duke dims {duke.features.shape} "
                  f"(expected (44, 7129))")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
