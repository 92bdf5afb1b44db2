"""Randomized generation of IB assignments covering the evidence.

The walk starts from the evidence (optionally plus a query state), visits
assigned nodes in reverse topological order and unions in one consistent
cube from each visited node's disjoint cover. Because the covers are
disjoint, the chosen cube per node is unique given the final assignment,
and the sampling probability is the product of the per-step selection
probabilities.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .hypercube import DisjointCover, Hypercube, net_covers
from .network import Assignment, BayesNet, reverse_topological_order

MODES = ("plain", "option1", "relaxed")


@dataclass(frozen=True)
class SelectionPolicy:
    """How cubes (and OPTION 1 query states) are drawn.

    ``kind="cube"`` weighs a consistent cube by ``prob ** alpha``;
    ``kind="uniform"`` weighs all eligible cubes equally. Zero-probability
    cubes are ineligible unless ``include_zero`` is set, in which case they
    get raw weight ``zero_weight`` (cube kind) or 1 (uniform kind).
    """

    kind: str = "cube"
    alpha: float = 1.0
    query_state_probs: tuple[float, ...] | None = None
    include_zero: bool = False
    zero_weight: float = 1e-3

    def __post_init__(self):
        if self.kind not in ("cube", "uniform"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.query_state_probs is not None:
            qs = self.query_state_probs
            if any(p <= 0 for p in qs) or abs(sum(qs) - 1.0) > 1e-12:
                raise ValueError("query state probabilities must be positive and sum to 1")
        if self.include_zero and self.zero_weight <= 0:
            raise ValueError("zero_weight must be positive")

    @classmethod
    def parse(cls, text: str) -> "SelectionPolicy":
        """``uniform`` or ``cube^ALPHA`` (``cube`` alone means alpha 1)."""
        if text == "uniform":
            return cls(kind="uniform")
        if text == "cube":
            return cls()
        if text.startswith("cube^"):
            return cls(alpha=float(text[5:]))
        raise ValueError(f"bad policy {text!r}")

    def cube_options(self, cubes: Sequence[Hypercube]) -> list[tuple[Hypercube, float]]:
        ws = []
        for c in cubes:
            if c.prob > 0:
                ws.append(1.0 if self.kind == "uniform" else c.prob ** self.alpha)
            elif self.include_zero:
                ws.append(1.0 if self.kind == "uniform" else self.zero_weight)
            else:
                ws.append(0.0)
        total = math.fsum(ws)
        if total <= 0:
            return []
        return [(c, w / total) for c, w in zip(cubes, ws) if w > 0]

    def query_options(self, card: int) -> list[tuple[int, float]]:
        if self.query_state_probs is None:
            return [(s, 1.0 / card) for s in range(card)]
        if len(self.query_state_probs) != card:
            raise ValueError(f"query_state_probs has {len(self.query_state_probs)} entries, "
                             f"query node has {card} states")
        return list(enumerate(self.query_state_probs))


@dataclass(frozen=True)
class SampleRecord:
    """One generated assignment with its event and sampling probabilities.

    ``eligibility`` is set in relaxed mode: ``"assigned"`` (the walk ended
    with the query assigned), ``"free"`` (neither the query nor any of its
    ancestors assigned) or ``"attached"`` (an ancestor was assigned, so the
    query state was drawn and the walk continued).
    """

    assignment: Assignment
    event_prob: float
    sampling_prob: float
    chosen: Mapping[int, Hypercube]
    steps: tuple[float, ...]
    mode: str = "plain"
    query: int | None = None
    query_attached: tuple[int, int] | None = None
    eligibility: str | None = None

    @property
    def discardable(self) -> bool:
        return self.event_prob == 0.0

    @property
    def weight(self) -> float:
        return self.event_prob / self.sampling_prob

    @property
    def binding(self) -> tuple[str, int | None]:
        return (self.mode, self.query)


class _Walk:
    __slots__ = ("a", "visited", "ps", "chosen", "steps", "attached", "eligibility", "dead")

    def __init__(self, a: dict[int, int]):
        self.a = a
        self.visited: set[int] = set()
        self.ps = 1.0
        self.chosen: dict[int, Hypercube] = {}
        self.steps: list[float] = []
        self.attached: tuple[int, int] | None = None
        self.eligibility: str | None = None
        self.dead = False

    def copy(self) -> "_Walk":
        w = _Walk(dict(self.a))
        w.visited = set(self.visited)
        w.ps = self.ps
        w.chosen = dict(self.chosen)
        w.steps = list(self.steps)
        w.attached = self.attached
        w.eligibility = self.eligibility
        w.dead = self.dead
        return w


class Method1:
    """Precomputed context for one (network, evidence, mode, policy) combination."""

    def __init__(self, net: BayesNet, evidence: Mapping[int, int], mode: str = "plain",
                 query: int | None = None, policy: SelectionPolicy | None = None,
                 covers: Sequence[DisjointCover] | None = None):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        if mode != "plain":
            if query is None:
                raise ValueError(f"mode {mode!r} needs a query node")
            if query in evidence:
                raise ValueError("query node must not be an evidence node")
        self.net = net
        self.evidence = Assignment(evidence)
        self.mode = mode
        self.query = query if mode != "plain" else None
        self.policy = policy or SelectionPolicy()
        self.covers = tuple(covers) if covers is not None else net_covers(net)
        for v, s in self.evidence.items():
            net.state_id(v, s)

        anchors = set(self.evidence)
        if self.query is not None:
            anchors.add(self.query)
        relevant: set[int] = set()
        for v in anchors:
            relevant |= net.ancestors_or_self(v)
        self.order = tuple(v for v in reverse_topological_order(net) if v in relevant)
        self.query_ancestry = net.ancestors_or_self(self.query) if self.query is not None else frozenset()
        if self.query is not None:
            self.query_opts = self.policy.query_options(net.cards[self.query])
        self._local = {v: (v,) + tuple(net.parents[v]) for v in self.order}
        self._opts: dict[tuple, list] = {}

    def _cube_options(self, v: int, a: dict[int, int]) -> list[tuple[Hypercube, float]]:
        # options depend only on the states of v and its parents, so memoize on those
        key = (v,) + tuple(a.get(u) for u in self._local[v])
        opts = self._opts.get(key)
        if opts is None:
            opts = self._opts[key] = self.policy.cube_options(self.covers[v].consistent_with(a))
        return opts

    def _start(self) -> _Walk:
        return _Walk(dict(self.evidence.items()))

    def _next(self, w: _Walk):
        """Next choice point as ``(kind, node, options)``, or None when the walk is over."""
        q = self.query
        if self.mode == "option1" and w.attached is None:
            return ("query", q, self.query_opts)
        a = w.a
        for v in self.order:
            if v in a and v not in w.visited:
                w.visited.add(v)
                opts = self._cube_options(v, a)
                if not opts:
                    w.dead = True
                    return None
                return ("cube", v, opts)
        if self.mode == "relaxed" and w.eligibility is None:
            if q in a:
                w.eligibility = "assigned"
            elif self.query_ancestry.isdisjoint(a):
                w.eligibility = "free"
            else:
                w.eligibility = "attached"
                return ("query", q, self.query_opts)
        return None

    @staticmethod
    def _apply(w: _Walk, kind: str, v: int, choice, p: float) -> None:
        w.ps *= p
        w.steps.append(p)
        if kind == "cube":
            w.a[v] = choice.child_state
            w.a.update(choice.parent_pairs)
            w.chosen[v] = choice
        else:
            w.a[v] = choice
            w.attached = (v, choice)

    def _record(self, w: _Walk) -> SampleRecord:
        if w.dead:
            event = 0.0
        else:
            event = 1.0
            for v in sorted(w.chosen):
                event *= w.chosen[v].prob
        return SampleRecord(
            assignment=Assignment._trusted(w.a),
            event_prob=event,
            sampling_prob=w.ps,
            chosen=dict(sorted(w.chosen.items())),
            steps=tuple(w.steps),
            mode=self.mode,
            query=self.query,
            query_attached=w.attached,
            eligibility=w.eligibility,
        )

    def sample(self, rng: np.random.Generator) -> SampleRecord:
        w = self._start()
        while True:
            nxt = self._next(w)
            if nxt is None:
                return self._record(w)
            kind, v, opts = nxt
            if len(opts) == 1:
                choice, p = opts[0]
            else:
                u = rng.random()
                acc = 0.0
                for choice, p in opts:
                    acc += p
                    if u < acc:
                        break
            self._apply(w, kind, v, choice, p)

    def enumerate(self, cap: int = 10**6) -> list[SampleRecord]:
        out: list[SampleRecord] = []
        stack = [self._start()]
        while stack:
            w = stack.pop()
            nxt = self._next(w)
            if nxt is None:
                out.append(self._record(w))
                if len(out) > cap:
                    raise BranchCapError(f"more than {cap} branches")
                continue
            kind, v, opts = nxt
            # reversed so the first option is expanded first
            for i, (choice, p) in enumerate(reversed(opts)):
                child = w if i == len(opts) - 1 else w.copy()
                self._apply(child, kind, v, choice, p)
                stack.append(child)
        return out


class BranchCapError(RuntimeError):
    pass


def sample(net: BayesNet, evidence: Mapping[int, int], rng: np.random.Generator,
           mode: str = "plain", query: int | None = None,
           policy: SelectionPolicy | None = None) -> SampleRecord:
    return Method1(net, evidence, mode, query, policy).sample(rng)


def enumerate_branches(net: BayesNet, evidence: Mapping[int, int], mode: str = "plain",
                       query: int | None = None, policy: SelectionPolicy | None = None,
                       cap: int = 10**6) -> list[SampleRecord]:
    """Every assignment the walk can produce, each with its exact sampling probability."""
    return Method1(net, evidence, mode, query, policy).enumerate(cap)


def replay_sampling_prob(rec: SampleRecord) -> float:
    p = 1.0
    for step in rec.steps:
        p *= step
    return p


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """Independent, reproducible streams ``0..n-1`` derived from one seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def parse_mode(net: BayesNet, text: str) -> tuple[str, int | None]:
    """``plain``, ``option1:Q`` or ``relaxed:Q`` with Q a node name."""
    kind, _, q = text.partition(":")
    if kind not in MODES:
        raise ValueError(f"bad mode {text!r}")
    if kind == "plain":
        if q:
            raise ValueError("plain mode takes no query")
        return kind, None
    if not q:
        raise ValueError(f"mode {kind!r} needs a query node, e.g. {kind}:NAME")
    return kind, net.node_id(q)
