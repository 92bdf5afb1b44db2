"""Seeded corpus of small random networks with evidence, shared by the property suites."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ibsample.netgen import gen_random
from ibsample.network import Assignment, BayesNet
from ibsample.oracle import ExactResult, exact, forward_logic_sample

SKEWS = (0.0, 0.5, 0.9)


@dataclass(frozen=True)
class Case:
    seed: int
    net: BayesNet
    evidence: Assignment
    truth: ExactResult

    @property
    def queries(self) -> list[int]:
        return [v for v in range(len(self.net)) if v not in self.evidence]

    def __repr__(self) -> str:
        return f"Case(seed={self.seed}, nodes={len(self.net)}, evidence={dict(self.evidence)})"


def make_case(seed: int) -> Case:
    rng = np.random.default_rng([7, seed])
    n = int(rng.integers(3, 11))
    net = gen_random(n, max_parents=3, skew=SKEWS[seed % 3], states=(2, 3), seed=seed,
                     csi=0.3 if seed % 2 else 0.0, det=0.15 if seed % 5 == 0 else 0.0)
    # evidence drawn from a forward sample so it has positive probability
    full, _ = forward_logic_sample(net, Assignment(), rng)
    k = 1 if seed % 2 == 0 else int(rng.integers(2, min(3, n - 1) + 1))
    # prefer low nodes: evidence on sinks exercises the backward walk
    order = list(net.topological_order)
    picks = sorted(order[-max(k, n // 2):], key=lambda v: rng.random())[:k]
    ev = Assignment({v: full[v] for v in picks})
    return Case(seed, net, ev, exact(net, ev))


@lru_cache(maxsize=None)
def corpus(size: int = 50) -> tuple[Case, ...]:
    return tuple(make_case(s) for s in range(size))
