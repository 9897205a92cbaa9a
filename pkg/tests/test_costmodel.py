import json
import math

import numpy as np
import pytest

from cakcd.bdcd import KrrConfig, solve_bdcd, solve_sstep_bdcd
from cakcd.costmodel import (
    PHASES,
    CostLedger,
    MachineParams,
    allreduce_rounds,
    charge_allreduce,
    predict_time,
    theorem_bound,
)
from cakcd.dcd import SvmConfig, solve_dcd, solve_sstep_dcd
from cakcd.kernel import KernelSpec

from conftest import random_labels, random_sparse


@pytest.mark.parametrize("P, rounds", [(1, 0), (2, 1), (3, 2), (4, 2), (5, 3), (8, 3), (512, 9)])
def test_allreduce_rounds(P, rounds):
    assert allreduce_rounds(P) == rounds == math.ceil(math.log2(P))


def test_charge_allreduce_examples():
    ledger = CostLedger()
    charge_allreduce(ledger, 1600, 4)
    assert (ledger.words, ledger.messages) == (1600, 2)
    charge_allreduce(ledger, 10, 1)
    assert (ledger.words, ledger.messages) == (1610, 2)
    # an s-step panel reduce with s=8, b=2, m=100 moves s*b*m words
    fresh = charge_allreduce(CostLedger(), 8 * 2 * 100, 16)
    assert fresh.words == 1600


def test_ledger_rejects_bad_charges():
    ledger = CostLedger()
    with pytest.raises(ValueError):
        ledger.charge("network", flops=1)
    with pytest.raises(ValueError):
        ledger.charge("solve", flops=-1)


def test_predict_time_examples():
    unit = MachineParams(gamma=1, beta=1, phi=1, mu=1)
    assert predict_time(CostLedger(), unit) == 0
    ledger = CostLedger().charge("kernel", flops=10).charge("allreduce", words=5, messages=2)
    assert predict_time(ledger, unit) == 17
    doubled = MachineParams(gamma=1, beta=1, phi=2, mu=1)
    assert predict_time(ledger, doubled) - predict_time(ledger, unit) == 2


def test_machine_params_validation():
    with pytest.raises(ValueError):
        MachineParams(gamma=0)
    with pytest.raises(ValueError):
        MachineParams(P=0)


def test_json_report_schema():
    ledger = CostLedger(mu=2.0)
    ledger.charge("kernel", flops=4).charge_shards([3.0, 4.0])
    charge_allreduce(ledger, 7, 2)
    report = json.loads(ledger.to_json(MachineParams(P=2)))
    assert set(report) >= {"flops", "words", "messages", "breakdown", "predicted_seconds", "params"}
    assert set(report["breakdown"]) == set(PHASES)
    assert report["params"]["P"] == 2
    assert report["words"] == 7 and report["messages"] == 1
    assert report["load_balance"]["max_shard_flops"] == 4.0
    assert report["load_balance"]["imbalance"] == pytest.approx(4 / 3.5)


def test_theorem_words_cancel_s():
    for s in [1, 2, 4, 16]:
        algo = "bdcd" if s == 1 else "sstep_bdcd"
        assert theorem_bound(algo, 100, 50, 0.1, 4, s, 64, 8, 10).words == 64 * 4 * 100


def test_theorem_messages_drop_by_s():
    classical = theorem_bound("bdcd", 100, 50, 0.1, 4, 1, 64, 8, 10)
    sstep = theorem_bound("sstep_bdcd", 100, 50, 0.1, 4, 8, 64, 8, 10)
    assert classical.messages == 64 * 3
    assert sstep.messages == classical.messages / 8


def test_theorem_flops_reduce_at_s1():
    m, n, f, b, H, P, mu = 2000, 800_000, 0.01, 4, 100, 64, 10.0
    a = theorem_bound("bdcd", m, n, f, b, 1, H, P, mu)
    c = theorem_bound("sstep_bdcd", m, n, f, b, 1, H, P, mu)
    assert a == c
    assert a.flops == pytest.approx(H * (b * f * m * n / P + mu * b * m + b ** 3))
    s = 8
    d = theorem_bound("sstep_bdcd", m, n, f, b, s, H, P, mu)
    assert d.flops == pytest.approx(H / s * (s * b * m * f * n / P + mu * s * b * m
                                             + s * b ** 3 + 28 * b ** 2))


def test_theorem_bound_argument_checks():
    with pytest.raises(ValueError):
        theorem_bound("bdcd", 10, 10, 1, 1, 2, 10, 1, 1)
    with pytest.raises(ValueError):
        theorem_bound("cg", 10, 10, 1, 1, 1, 10, 1, 1)
    with pytest.raises(ValueError):
        theorem_bound("dcd", 10, 10, 1, 2, 1, 10, 1, 1)


def _breakdown_complete(ledger):
    assert ledger.flops == sum(c.flops for c in ledger.breakdown.values())
    assert ledger.words == sum(c.words for c in ledger.breakdown.values())
    assert ledger.messages == sum(c.messages for c in ledger.breakdown.values())


@pytest.mark.parametrize("P", [1, 3, 4, 8])
@pytest.mark.parametrize("s", [1, 2, 4, 8])
def test_bdcd_ledger_matches_theorem(P, s):
    rng = np.random.default_rng(P * 10 + s)
    A = random_sparse(rng, 40, 24)
    y = rng.standard_normal(40)
    H, b = 32, 3
    cfg = KrrConfig(lam=0.5, b=b, H=H, s=s, seed=1)
    ledger = CostLedger(mu=5.0)
    solver = solve_bdcd if s == 1 else solve_sstep_bdcd
    solver(A, y, cfg, KernelSpec.rbf(), shards=P, ledger=ledger)
    bound = theorem_bound("bdcd" if s == 1 else "sstep_bdcd", 40, 24, A.density, b, s, H, P, 5.0)
    assert ledger.words == bound.words == H * b * 40
    assert ledger.messages == (H // s) * math.ceil(math.log2(P))
    _breakdown_complete(ledger)


@pytest.mark.parametrize("s", [1, 2, 4, 8, 16])
def test_dcd_ledger_words_and_messages(s):
    rng = np.random.default_rng(s)
    A = random_sparse(rng, 30, 12)
    y = random_labels(rng, 30)
    ledger = CostLedger()
    solver = solve_dcd if s == 1 else solve_sstep_dcd
    solver(A, y, SvmConfig("L2", 1.0, H=64, s=s), KernelSpec.polynomial(), shards=4,
           ledger=ledger)
    assert ledger.words == 64 * 30
    assert ledger.messages == (64 // s) * 2
    _breakdown_complete(ledger)


def test_remainder_steps_each_communicate():
    rng = np.random.default_rng(0)
    A = random_sparse(rng, 20, 10)
    ledger = CostLedger()
    solve_sstep_bdcd(A, rng.standard_normal(20), KrrConfig(1.0, 2, H=10, s=4), KernelSpec.linear(),
                     shards=2, ledger=ledger)
    # two groups of four plus two classical steps
    assert ledger.messages == 2 + 2
    assert ledger.words == 10 * 2 * 20


def test_load_imbalance_reported():
    # all nonzeros in the first column shard
    dense = np.zeros((6, 8))
    dense[:, :2] = np.arange(1, 13).reshape(6, 2)
    from cakcd.data import SparseMatrix

    A = SparseMatrix.from_dense(dense)
    ledger = CostLedger()
    solve_bdcd(A, np.ones(6), KrrConfig(1.0, 2, H=3), KernelSpec.linear(), shards=4, ledger=ledger)
    lb = ledger.load_balance()
    assert lb["imbalance"] == pytest.approx(4.0)
    assert ledger.breakdown["kernel"].flops == lb["max_shard_flops"]
