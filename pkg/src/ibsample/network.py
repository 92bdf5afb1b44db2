"""Discrete Bayes networks, partial assignments and the IB condition.

Nodes get dense integer ids in declaration order. Every tie that needs
breaking (topological orders, iteration over families) is broken by
ascending id, so all algorithms built on top are deterministic.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass
from functools import cached_property

import numpy as np

ROW_SUM_TOL = 1e-9
IB_TOL = 1e-12
MAX_PARENTS = 12


class NetworkError(ValueError):
    """Base class for malformed networks."""


class CPTError(NetworkError):
    pass


class CycleError(NetworkError):
    pass


class UnknownNodeError(NetworkError):
    pass


class ParentCapError(NetworkError):
    pass


class InconsistentAssignmentError(ValueError):
    pass


class NotIBError(ValueError):
    def __init__(self, node: int, message: str | None = None):
        self.node = node
        super().__init__(message or f"IB condition fails at node {node}")


class Assignment(Mapping):
    """Immutable set of (node, state) pairs, at most one per node.

    Behaves as a read-only mapping node -> state. Iteration, equality and
    hashing go through the canonical ascending-node-id pair tuple.
    """

    __slots__ = ("_d", "_pairs", "_hash")

    def __init__(self, pairs: Mapping[int, int] | Iterable[tuple[int, int]] = ()):
        items = pairs.items() if isinstance(pairs, Mapping) else pairs
        d: dict[int, int] = {}
        for v, s in items:
            v, s = int(v), int(s)
            if d.get(v, s) != s:
                raise InconsistentAssignmentError(f"node {v} assigned both {d[v]} and {s}")
            d[v] = s
        self._pairs = tuple(sorted(d.items()))
        self._d = dict(self._pairs)
        self._hash = hash(self._pairs)

    @classmethod
    def _trusted(cls, d: dict[int, int]) -> "Assignment":
        obj = cls.__new__(cls)
        obj._pairs = tuple(sorted(d.items()))
        obj._d = dict(obj._pairs)
        obj._hash = hash(obj._pairs)
        return obj

    def __getitem__(self, v: int) -> int:
        return self._d[v]

    def __iter__(self) -> Iterator[int]:
        return iter(self._d)

    def __len__(self) -> int:
        return len(self._d)

    def __contains__(self, v: object) -> bool:
        return v in self._d

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Assignment):
            return self._pairs == other._pairs
        return NotImplemented

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Assignment({dict(self._pairs)})"

    @property
    def pairs(self) -> tuple[tuple[int, int], ...]:
        return self._pairs

    @property
    def span(self) -> frozenset[int]:
        return frozenset(self._d)

    def consistent(self, other: Mapping[int, int]) -> bool:
        small, big = (self._d, other) if len(self._d) <= len(other) else (other, self._d)
        for v, s in small.items():
            t = big.get(v)
            if t is not None and t != s:
                return False
        return True

    def union(self, other: Mapping[int, int]) -> "Assignment":
        if not self.consistent(other):
            raise InconsistentAssignmentError(f"{self!r} and {other!r} are inconsistent")
        d = dict(self._d)
        d.update(other.items())
        return Assignment._trusted(d)

    def contains(self, other: Mapping[int, int]) -> bool:
        """True when every pair of ``other`` is in this assignment (event subset)."""
        d = self._d
        return all(d.get(v) == s for v, s in other.items())

    def restrict(self, nodes: Iterable[int]) -> "Assignment":
        d = self._d
        return Assignment._trusted({v: d[v] for v in nodes if v in d})

    def with_pair(self, v: int, s: int) -> "Assignment":
        return self.union({v: s})

    def as_vector(self, n: int) -> np.ndarray:
        """Dense form with -1 for unassigned nodes."""
        out = np.full(n, -1, dtype=np.int16)
        for v, s in self._pairs:
            out[v] = s
        return out


EMPTY = Assignment()


def consistent(a: Mapping[int, int], b: Mapping[int, int]) -> bool:
    return Assignment(a).consistent(b)


def union(a: Mapping[int, int], b: Mapping[int, int]) -> Assignment:
    return Assignment(a).union(b)


@dataclass(frozen=True)
class NodeSpec:
    id: int
    name: str
    states: tuple[str, ...]

    def __post_init__(self):
        if len(self.states) < 2:
            raise NetworkError(f"node {self.name!r} needs at least 2 states")
        if len(set(self.states)) != len(self.states):
            raise NetworkError(f"node {self.name!r} has duplicate state names")

    @property
    def card(self) -> int:
        return len(self.states)


@dataclass(frozen=True, eq=False)
class BayesNet:
    """Immutable discrete Bayes network.

    ``cpts[v]`` is an array of shape ``(|D_p1|, ..., |D_pk|, |D_v|)`` with
    parents in the order of ``parents[v]``.
    """

    nodes: tuple[NodeSpec, ...]
    parents: tuple[tuple[int, ...], ...]
    cpts: tuple[np.ndarray, ...]
    max_parents: int = MAX_PARENTS

    def __post_init__(self):
        n = len(self.nodes)
        if len(self.parents) != n or len(self.cpts) != n:
            raise NetworkError("nodes, parents and cpts must have equal length")
        names = [spec.name for spec in self.nodes]
        tables = []
        if len(set(names)) != n:
            raise NetworkError("duplicate node names")
        for v, spec in enumerate(self.nodes):
            if spec.id != v:
                raise NetworkError(f"node {spec.name!r} has id {spec.id}, expected {v}")
            ps = self.parents[v]
            if len(set(ps)) != len(ps):
                raise NetworkError(f"duplicate parent of {spec.name!r}")
            for p in ps:
                if not 0 <= p < n:
                    raise UnknownNodeError(f"parent id {p} of {spec.name!r} does not exist")
            if len(ps) > self.max_parents:
                raise ParentCapError(
                    f"node {spec.name!r} has {len(ps)} parents, cap is {self.max_parents}")
            cpt = np.array(self.cpts[v], dtype=float)
            shape = tuple(self.nodes[p].card for p in ps) + (spec.card,)
            if cpt.shape != shape:
                raise CPTError(f"CPT of {spec.name!r} has shape {cpt.shape}, expected {shape}")
            if np.any(cpt < 0) or np.any(cpt > 1):
                raise CPTError(f"CPT of {spec.name!r} has entries outside [0, 1]")
            sums = cpt.sum(axis=-1)
            bad = np.argwhere(np.abs(sums - 1.0) > ROW_SUM_TOL)
            if len(bad):
                cfg = tuple(int(i) for i in bad[0])
                raise CPTError(
                    f"CPT row of {spec.name!r} at parent config {cfg} sums to "
                    f"{float(sums[tuple(bad[0])]):.12g}")
            cpt.setflags(write=False)
            tables.append(cpt)
        object.__setattr__(self, "cpts", tuple(tables))
        self.topological_order  # raises on cycles

    @classmethod
    def from_tables(cls, nodes: list[tuple[str, list[str]]], parents: Mapping[str, list[str]],
                    cpts: Mapping[str, np.ndarray], max_parents: int = MAX_PARENTS) -> "BayesNet":
        """Build from names: ``nodes`` is ``[(name, states), ...]`` in id order."""
        ids = {name: i for i, (name, _) in enumerate(nodes)}
        specs = tuple(NodeSpec(i, name, tuple(states)) for i, (name, states) in enumerate(nodes))
        par = []
        for name, _ in nodes:
            try:
                par.append(tuple(ids[p] for p in parents.get(name, ())))
            except KeyError as exc:
                raise UnknownNodeError(f"unknown parent {exc.args[0]!r} of {name!r}") from None
        tables = tuple(np.asarray(cpts[name], dtype=float) for name, _ in nodes)
        return cls(specs, tuple(par), tables, max_parents)

    def __len__(self) -> int:
        return len(self.nodes)

    @cached_property
    def index(self) -> dict[str, int]:
        return {spec.name: spec.id for spec in self.nodes}

    @cached_property
    def cards(self) -> tuple[int, ...]:
        return tuple(spec.card for spec in self.nodes)

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        ch: list[list[int]] = [[] for _ in self.nodes]
        for v, ps in enumerate(self.parents):
            for p in ps:
                ch[p].append(v)
        return tuple(tuple(sorted(c)) for c in ch)

    @cached_property
    def topological_order(self) -> tuple[int, ...]:
        """Parents before children; smallest available id first."""
        import heapq

        indeg = [len(ps) for ps in self.parents]
        heap = [v for v, d in enumerate(indeg) if d == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            v = heapq.heappop(heap)
            order.append(v)
            for c in self.children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(heap, c)
        if len(order) != len(self.nodes):
            stuck = sorted(v for v, d in enumerate(indeg) if d > 0)
            raise CycleError("cycle through nodes " + ", ".join(self.nodes[v].name for v in stuck))
        return tuple(order)

    @cached_property
    def _ancestors(self) -> tuple[frozenset[int], ...]:
        anc: list[frozenset[int]] = [frozenset()] * len(self.nodes)
        for v in self.topological_order:
            acc = set(self.parents[v])
            for p in self.parents[v]:
                acc |= anc[p]
            anc[v] = frozenset(acc)
        return tuple(anc)

    def ancestors(self, v: int) -> frozenset[int]:
        """Strict ancestors of ``v``."""
        return self._ancestors[v]

    def ancestors_or_self(self, v: int) -> frozenset[int]:
        return self._ancestors[v] | {v}

    def is_root(self, v: int) -> bool:
        return not self.parents[v]

    @property
    def roots(self) -> tuple[int, ...]:
        return tuple(v for v in range(len(self.nodes)) if not self.parents[v])

    def node_id(self, ref: int | str) -> int:
        if isinstance(ref, str):
            try:
                return self.index[ref]
            except KeyError:
                raise UnknownNodeError(f"unknown node {ref!r}") from None
        if not 0 <= ref < len(self.nodes):
            raise UnknownNodeError(f"unknown node id {ref}")
        return int(ref)

    def state_id(self, v: int, state: str | int) -> int:
        states = self.nodes[v].states
        if isinstance(state, str):
            try:
                return states.index(state)
            except ValueError:
                raise UnknownNodeError(
                    f"node {self.nodes[v].name!r} has no state {state!r}") from None
        if not 0 <= state < len(states):
            raise UnknownNodeError(f"state index {state} out of range for {self.nodes[v].name!r}")
        return int(state)

    def assignment(self, spec: Mapping[str | int, str | int] | str | None = None, **kw) -> Assignment:
        """Assignment from names, e.g. ``net.assignment("v=T,u1=F")`` or ``net.assignment(v="T")``."""
        if isinstance(spec, str):
            items = []
            for part in spec.replace(";", ",").split(","):
                part = part.strip()
                if not part:
                    continue
                name, _, state = part.partition("=")
                if not _:
                    raise ValueError(f"bad assignment term {part!r}, expected name=state")
                items.append((name.strip(), state.strip()))
        else:
            items = list((spec or {}).items())
        items += list(kw.items())
        pairs = []
        for node, state in items:
            v = self.node_id(node)
            pairs.append((v, self.state_id(v, state)))
        return Assignment(pairs)

    def format_assignment(self, a: Mapping[int, int], sep: str = ";") -> str:
        return sep.join(f"{self.nodes[v].name}={self.nodes[v].states[s]}"
                        for v, s in sorted(a.items()))

    def prob(self, v: int, a: Mapping[int, int]) -> float:
        """CPT entry P(a(v) | a restricted to parents); all parents must be assigned."""
        idx = tuple(a[p] for p in self.parents[v]) + (a[v],)
        return float(self.cpts[v][idx])

    def cpt_slice(self, v: int, a: Mapping[int, int]) -> np.ndarray:
        """Values P(a(v) | parents) over completions of the parents unassigned in ``a``."""
        idx = tuple(a.get(p, slice(None)) for p in self.parents[v]) + (a[v],)
        return np.asarray(self.cpts[v][idx])


def reverse_topological_order(net: BayesNet) -> tuple[int, ...]:
    """Every node precedes all of its parents; ties go to the smaller id."""
    import heapq

    outdeg = [len(c) for c in net.children]
    heap = [v for v, d in enumerate(outdeg) if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for p in net.parents[v]:
            outdeg[p] -= 1
            if outdeg[p] == 0:
                heapq.heappush(heap, p)
    return tuple(order)


def prob_complete(net: BayesNet, a: Mapping[int, int]) -> float:
    """Chain-rule probability of a complete assignment."""
    if len(a) != len(net) or any(v not in a for v in range(len(net))):
        raise ValueError("prob_complete needs an assignment to every node")
    p = 1.0
    for v in range(len(net)):
        p *= net.prob(v, a)
    return p


def ib_condition_holds(net: BayesNet, a: Mapping[int, int], v: int, tol: float = IB_TOL) -> bool:
    if v not in a:
        raise ValueError(f"node {v} is not assigned")
    vals = net.cpt_slice(v, a)
    if vals.ndim == 0:
        return True
    return float(vals.max() - vals.min()) <= tol


def is_ib(net: BayesNet, a: Mapping[int, int], tol: float = IB_TOL) -> bool:
    return all(ib_condition_holds(net, a, v, tol) for v in a)


def prob_ib(net: BayesNet, a: Mapping[int, int], tol: float = IB_TOL) -> float:
    """Event probability of an IB assignment as a product of hypercube probabilities.

    Each assigned node contributes its CPT value conditioned on all of its
    assigned parents; the IB condition makes that value independent of the
    unassigned ones.
    """
    p = 1.0
    for v in sorted(a):
        vals = net.cpt_slice(v, a)
        if vals.ndim and float(vals.max() - vals.min()) > tol:
            raise NotIBError(v, f"IB condition fails at node {net.nodes[v].name!r}")
        p *= float(vals.flat[0])
    return p


def complete_assignments(net: BayesNet, nodes: Iterable[int] | None = None) -> Iterator[Assignment]:
    """All assignments to ``nodes`` (default: every node), in lexicographic order."""
    nodes = list(range(len(net))) if nodes is None else sorted(nodes)
    for states in itertools.product(*(range(net.cards[v]) for v in nodes)):
        yield Assignment._trusted(dict(zip(nodes, states)))
