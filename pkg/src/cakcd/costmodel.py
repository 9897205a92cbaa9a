"""Hockney-model cost accounting: flops F, words W and messages L.

The predicted time of a run is ``gamma * F + beta * W + phi * L``. Flops are
counted at leading order in the same units as the published BDCD / s-step
BDCD bounds: ``k * nnz(shard)`` for a k-column partial Gram panel (no
factor of two), ``mu`` per nonlinear kernel entry, ``b**3`` per block
solve and ``b**2`` per correction product.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

PHASES = ("kernel", "allreduce", "correction", "solve")


@dataclass(frozen=True)
class MachineParams:
    gamma: float = 1e-10  # seconds per flop
    beta: float = 1e-9  # seconds per word
    phi: float = 1e-6  # seconds per message
    mu: float = 10.0  # nonlinear kernel op, in flops
    P: int = 1

    def __post_init__(self):
        if min(self.gamma, self.beta, self.phi, self.mu) <= 0:
            raise ValueError("machine parameters must be positive")
        if self.P < 1:
            raise ValueError("P must be at least 1")

    def as_dict(self):
        return {"gamma": self.gamma, "beta": self.beta, "phi": self.phi,
                "mu": self.mu, "P": self.P}


@dataclass
class PhaseCount:
    flops: float = 0.0
    words: int = 0
    messages: int = 0


@dataclass
class CostLedger:
    """Running F/W/L counters, split by phase.

    Totals are always the sum of the per-phase counters. ``shard_flops``
    accumulates the Gram flops of each shard so load imbalance can be
    reported as max-over-mean; the critical path (max shard) is what
    enters ``flops``.
    """

    mu: float = 1.0
    breakdown: dict = field(default_factory=lambda: {p: PhaseCount() for p in PHASES})
    shard_flops: list = field(default_factory=list)

    def charge(self, phase, flops=0.0, words=0, messages=0):
        if phase not in self.breakdown:
            raise ValueError(f"unknown phase {phase!r}")
        if flops < 0 or words < 0 or messages < 0:
            raise ValueError("cost increments must be nonnegative")
        counter = self.breakdown[phase]
        counter.flops += flops
        counter.words += int(words)
        counter.messages += int(messages)
        return self

    def charge_shards(self, per_shard):
        if not self.shard_flops:
            self.shard_flops = [0.0] * len(per_shard)
        elif len(self.shard_flops) != len(per_shard):
            raise ValueError("shard count changed within one ledger")
        for p, f in enumerate(per_shard):
            self.shard_flops[p] += f
        return self

    @property
    def flops(self):
        return sum(c.flops for c in self.breakdown.values())

    @property
    def words(self):
        return sum(c.words for c in self.breakdown.values())

    @property
    def messages(self):
        return sum(c.messages for c in self.breakdown.values())

    def load_balance(self):
        if not self.shard_flops:
            return {"max_shard_flops": 0.0, "mean_shard_flops": 0.0, "imbalance": 1.0}
        peak = max(self.shard_flops)
        mean = sum(self.shard_flops) / len(self.shard_flops)
        return {"max_shard_flops": peak, "mean_shard_flops": mean,
                "imbalance": peak / mean if mean > 0 else 1.0}

    def to_dict(self, machine: MachineParams | None = None):
        report = {
            "flops": self.flops,
            "words": self.words,
            "messages": self.messages,
            "breakdown": {name: {"flops": c.flops, "words": c.words, "messages": c.messages}
                          for name, c in self.breakdown.items()},
            "load_balance": self.load_balance(),
        }
        if machine is not None:
            report["predicted_seconds"] = predict_time(self, machine)
            report["params"] = machine.as_dict()
        return report

    def to_json(self, machine=None):
        return json.dumps(self.to_dict(machine), indent=2, sort_keys=True)


def allreduce_rounds(P):
    """Message rounds of one allreduce: ``ceil(log2 P)``, zero on one shard."""
    if P < 1:
        raise ValueError("P must be at least 1")
    return (P - 1).bit_length()


def charge_allreduce(ledger: CostLedger, words_per_shard, P):
    return ledger.charge("allreduce", words=words_per_shard, messages=allreduce_rounds(P))


def predict_time(ledger: CostLedger, machine: MachineParams) -> float:
    return machine.gamma * ledger.flops + machine.beta * ledger.words + machine.phi * ledger.messages


class CostBound(NamedTuple):
    flops: float
    words: float
    messages: float


def theorem_bound(algorithm, m, n, f, b, s, H, P, mu) -> CostBound:
    """Leading-order BDCD or s-step BDCD costs with all constants set to 1.

    ``algorithm`` is ``"bdcd"`` (requires ``s == 1``) or ``"sstep_bdcd"``.
    DCD and s-step DCD are the ``b = 1`` specialisations.
    """
    if algorithm in ("bdcd", "dcd"):
        if s != 1:
            raise ValueError("classical bounds take s = 1")
    elif algorithm not in ("sstep_bdcd", "sstep_dcd"):
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if algorithm.endswith("dcd") and not algorithm.endswith("bdcd") and b != 1:
        raise ValueError("DCD bounds take b = 1")
    outer = H / s
    flops = outer * (s * b * m * f * n / P + mu * s * b * m + s * b ** 3
                     + math.comb(s, 2) * b ** 2)
    words = outer * s * b * m
    messages = outer * math.log2(P)
    return CostBound(flops, words, messages)
