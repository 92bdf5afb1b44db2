"""Ground truth and baseline samplers.

The exact oracle is plain enumeration of complete assignments. Branches
whose CPT entry is 0 are pruned while expanding in topological order, so
the work is bounded by the number of positive-probability completions
rather than the full state space; deterministic nodes therefore cost
nothing. The cap is expressed in bits: the sum over nodes of
``log2(max row support)`` must not exceed ``max_bits``.
"""

from __future__ import annotations

import math
import weakref
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from .network import Assignment, BayesNet

MAX_BITS = 22.0


class OracleCapError(RuntimeError):
    pass


class ZeroEvidenceError(ValueError):
    pass


def enumeration_bits(net: BayesNet) -> float:
    bits = 0.0
    for v in range(len(net)):
        support = int((np.asarray(net.cpts[v]) > 0).sum(axis=-1).max())
        bits += math.log2(max(support, 1))
    return bits


@dataclass(frozen=True, eq=False)
class JointTable:
    """Every positive-probability complete assignment: ``states[k, v]`` and ``probs[k]``."""

    net: BayesNet
    states: np.ndarray
    probs: np.ndarray

    def mask(self, a: Mapping[int, int]) -> np.ndarray:
        m = np.ones(len(self.probs), dtype=bool)
        for v, s in a.items():
            m &= self.states[:, v] == s
        return m

    def prob(self, a: Mapping[int, int]) -> float:
        """Marginal probability of the event of a (partial) assignment."""
        return float(self.probs[self.mask(a)].sum())


_tables: "weakref.WeakKeyDictionary[BayesNet, JointTable]" = weakref.WeakKeyDictionary()


def joint_table(net: BayesNet, max_bits: float = MAX_BITS) -> JointTable:
    table = _tables.get(net)
    if table is not None:
        return table
    bits = enumeration_bits(net)
    if bits > max_bits:
        raise OracleCapError(f"network needs {bits:.1f} bits of enumeration, cap is {max_bits}")
    n = len(net)
    states = np.zeros((1, n), dtype=np.int8)
    probs = np.ones(1)
    for v in net.topological_order:
        ps = net.parents[v]
        rows = net.cpts[v][tuple(states[:, p] for p in ps)] if ps else np.broadcast_to(
            net.cpts[v], (len(probs), net.cards[v]))
        k, s = np.nonzero(rows > 0)
        states = states[k]
        states[:, v] = s
        probs = probs[k] * rows[k, s]
    table = JointTable(net, states, probs)
    _tables[net] = table
    return table


@dataclass(frozen=True)
class ExactResult:
    evidence_prob: float
    posteriors: tuple[np.ndarray, ...] | None
    priors: tuple[np.ndarray, ...]

    @property
    def zero_evidence(self) -> bool:
        return self.posteriors is None


def exact(net: BayesNet, evidence: Mapping[int, int] = Assignment(),
          max_bits: float = MAX_BITS) -> ExactResult:
    table = joint_table(net, max_bits)
    priors = tuple(np.bincount(table.states[:, v], weights=table.probs, minlength=net.cards[v])
                   for v in range(len(net)))
    m = table.mask(evidence)
    pe = float(table.probs[m].sum())
    if pe <= 0.0:
        return ExactResult(0.0, None, priors)
    st, pr = table.states[m], table.probs[m]
    posts = tuple(np.bincount(st[:, v], weights=pr, minlength=net.cards[v]) / pe
                  for v in range(len(net)))
    return ExactResult(pe, posts, priors)


def joint_prob(net: BayesNet, a: Mapping[int, int]) -> float:
    """P(event of ``a``) by enumeration."""
    return joint_table(net).prob(a)


def forward_logic_sample(net: BayesNet, evidence: Mapping[int, int],
                         rng: np.random.Generator) -> tuple[Assignment, bool]:
    """Top-down ancestral sample; accepted iff it agrees with the evidence."""
    a: dict[int, int] = {}
    for v in net.topological_order:
        row = net.cpts[v][tuple(a[p] for p in net.parents[v])]
        a[v] = _draw(row, rng)
    accepted = all(a[v] == s for v, s in evidence.items())
    return Assignment._trusted(a), accepted


def _draw(row: np.ndarray, rng: np.random.Generator) -> int:
    u = rng.random()
    acc = 0.0
    last = 0
    for s, p in enumerate(row):
        if p > 0:
            last = s
            acc += p
            if u < acc:
                return s
    return last


def optimal_sample(net: BayesNet, evidence: Mapping[int, int],
                   rng: np.random.Generator) -> Assignment:
    """Complete assignment drawn exactly from P(. | evidence).

    Nodes are drawn in topological order from their exact conditionals
    given the evidence and the nodes drawn so far.
    """
    table = joint_table(net)
    m = table.mask(evidence)
    if not table.probs[m].sum() > 0:
        raise ZeroEvidenceError("evidence has probability 0")
    st, pr = table.states[m], table.probs[m]
    a: dict[int, int] = {}
    for v in net.topological_order:
        if v in evidence:
            a[v] = evidence[v]
            continue
        w = np.bincount(st[:, v], weights=pr, minlength=net.cards[v])
        s = _draw(w / w.sum(), rng)
        a[v] = s
        keep = st[:, v] == s
        st, pr = st[keep], pr[keep]
    return Assignment._trusted(a)
