"""Generators for benchmark networks."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from .bnx import parse_network
from .network import Assignment, BayesNet

BIN = ["T", "F"]


def _or_cpt(k: int) -> np.ndarray:
    cpt = np.zeros((2,) * k + (2,))
    cpt[..., 0] = 1.0
    cpt[(1,) * k] = [0.0, 1.0]
    return cpt


def _and_cpt(k: int) -> np.ndarray:
    cpt = np.zeros((2,) * k + (2,))
    cpt[..., 1] = 1.0
    cpt[(0,) * k] = [1.0, 0.0]
    return cpt


def or_node_net(k: int, prior: float = 0.3, gate: str = "or") -> BayesNet:
    """``k`` independent binary roots feeding one OR (or AND) node ``v``."""
    nodes = [(f"u{i + 1}", BIN) for i in range(k)] + [("v", BIN)]
    parents = {"v": [f"u{i + 1}" for i in range(k)]}
    cpts = {f"u{i + 1}": np.array([prior, 1 - prior]) for i in range(k)}
    cpts["v"] = _or_cpt(k) if gate == "or" else _and_cpt(k)
    return BayesNet.from_tables(nodes, parents, cpts)


@dataclass(frozen=True)
class FusionParams:
    n_roots: int = 12
    n_evidence: int = 4
    max_or_parents: int = 2
    root_prior: float = 0.1
    wiring_seed: int = 0
    and_chain: bool = True
    min_fanin: int = 2
    max_fanin: int = 5

    def __post_init__(self):
        if self.n_roots < 1 or self.n_evidence < 1:
            raise ValueError("counts must be at least 1")
        if not 0 < self.root_prior < 1:
            raise ValueError("root_prior must be in (0, 1)")
        if self.max_or_parents != 2:
            raise ValueError("OR nodes are limited to 2 parents")
        if not 1 <= self.min_fanin <= self.max_fanin:
            raise ValueError("bad fan-in range")


def gen_fusion(p: FusionParams) -> tuple[BayesNet, Assignment]:
    """Three-level sensor-fusion network and its evidence ``{sink = T}``.

    Each original evidence node is the OR of a random set of roots, built
    as a balanced tree of 2-parent OR nodes whose top node is the evidence
    node itself. The evidence nodes are then conjoined by a chain of
    2-parent AND nodes ending in the single sink.
    """
    rng = np.random.default_rng(p.wiring_seed)
    nodes: list[tuple[str, list[str]]] = []
    parents: dict[str, list[str]] = {}
    cpts: dict[str, np.ndarray] = {}

    roots = [f"r{i}" for i in range(p.n_roots)]
    for r in roots:
        nodes.append((r, BIN))
        cpts[r] = np.array([p.root_prior, 1 - p.root_prior])

    lo = min(p.min_fanin, p.n_roots)
    hi = min(p.max_fanin, p.n_roots)
    counter = [0]

    def or_tree(inputs: list[str], top: str) -> None:
        # pairwise reduction, left to right, until two inputs remain
        layer = list(inputs)
        while len(layer) > 2:
            nxt = []
            for i in range(0, len(layer) - 1, 2):
                name = f"o{counter[0]}"
                counter[0] += 1
                nodes.append((name, BIN))
                parents[name] = layer[i:i + 2]
                cpts[name] = _or_cpt(2)
                nxt.append(name)
            if len(layer) % 2:
                nxt.append(layer[-1])
            layer = nxt
        nodes.append((top, BIN))
        parents[top] = layer
        cpts[top] = _or_cpt(len(layer))

    groups = []
    for _ in range(p.n_evidence):
        size = int(rng.integers(lo, hi + 1))
        groups.append({int(i) for i in rng.choice(p.n_roots, size=size, replace=False)})
    # roots left unwired would be irrelevant to the evidence; give each to a random group
    for i in sorted(set(range(p.n_roots)).difference(*groups)):
        groups[int(rng.integers(p.n_evidence))].add(i)

    evidence_nodes = []
    for j, group in enumerate(groups):
        name = f"e{j}"
        or_tree([roots[i] for i in sorted(group)], name)
        evidence_nodes.append(name)

    if p.and_chain:
        if len(evidence_nodes) == 1:
            sink = "sink"
            nodes.append((sink, BIN))
            parents[sink] = [evidence_nodes[0]]
            cpts[sink] = _and_cpt(1)
        else:
            prev = evidence_nodes[0]
            for j, e in enumerate(evidence_nodes[1:], start=1):
                name = "sink" if j == len(evidence_nodes) - 1 else f"a{j}"
                nodes.append((name, BIN))
                parents[name] = [prev, e]
                cpts[name] = _and_cpt(2)
                prev = name
        net = BayesNet.from_tables(nodes, parents, cpts)
        return net, net.assignment({"sink": "T"})
    net = BayesNet.from_tables(nodes, parents, cpts)
    return net, net.assignment({e: "T" for e in evidence_nodes})


def _dirichlet_row(rng: np.random.Generator, k: int, skew: float) -> np.ndarray:
    alpha = 1.0 - skew
    row = rng.dirichlet(np.full(k, alpha))
    if not np.all(np.isfinite(row)) or row.sum() <= 0:
        row = np.zeros(k)
        row[rng.integers(k)] = 1.0
    return row / row.sum()


def _tree_cpt(rng: np.random.Generator, pcards: list[int], card: int, skew: float) -> np.ndarray:
    """CPT with context-specific independence: a random context tree with shared leaf rows."""
    cpt = np.empty(tuple(pcards) + (card,))

    def grow(ctx: list, free: list[int]) -> None:
        if not free or (ctx.count(slice(None)) < len(pcards) and rng.random() < 0.4):
            cpt[tuple(ctx)] = _dirichlet_row(rng, card, skew)
            return
        j = free[int(rng.integers(len(free)))]
        rest = [f for f in free if f != j]
        for s in range(pcards[j]):
            ctx[j] = s
            grow(ctx, rest)
        ctx[j] = slice(None)

    grow([slice(None)] * len(pcards), list(range(len(pcards))))
    return cpt


def gen_random(n_nodes: int, max_parents: int = 3, skew: float = 0.0,
               states: int | tuple[int, int] = 2, seed: int = 0,
               csi: float = 0.0, det: float = 0.0) -> BayesNet:
    """Random DAG with Dirichlet CPT rows.

    Rows are drawn from a symmetric Dirichlet with concentration
    ``1 - skew``: ``skew=0`` gives uniform rows, values near 1 give
    near-deterministic rows. With probability ``csi`` a node's CPT is
    built from a random context tree (so it has context-specific
    independence), and with probability ``det`` a non-root node becomes a
    deterministic OR/AND-style node over binary-ised parent tests.
    Node ids are a random permutation of the generation order.
    """
    if not 0 <= skew < 1:
        raise ValueError("skew must be in [0, 1)")
    rng = np.random.default_rng(seed)
    lo, hi = (states, states) if isinstance(states, int) else states
    cards = [int(rng.integers(lo, hi + 1)) for _ in range(n_nodes)]
    perm = rng.permutation(n_nodes)  # perm[position] = node id
    par_pos: list[list[int]] = []
    for i in range(n_nodes):
        k = int(rng.integers(0, min(i, max_parents) + 1))
        par_pos.append(sorted(int(x) for x in rng.choice(i, size=k, replace=False)) if k else [])

    tables: list[np.ndarray] = []
    for i in range(n_nodes):
        pcards = [cards[j] for j in par_pos[i]]
        card = cards[i]
        u = rng.random()
        if par_pos[i] and u < det:
            # child state 0 iff any parent is in its state 0 (OR-like)
            cpt = np.zeros(tuple(pcards) + (card,))
            cpt[..., card - 1] = 1.0
            for j in range(len(pcards)):
                idx = [slice(None)] * len(pcards)
                idx[j] = 0
                cpt[tuple(idx)] = np.eye(card)[0]
        elif par_pos[i] and u < det + csi:
            cpt = _tree_cpt(rng, pcards, card, skew)
        else:
            cpt = np.empty(tuple(pcards) + (card,))
            for idx in np.ndindex(*pcards):
                cpt[idx] = _dirichlet_row(rng, card, skew)
        tables.append(cpt)

    order = sorted(range(n_nodes), key=lambda i: perm[i])  # positions sorted by node id
    names = {i: f"x{perm[i]}" for i in range(n_nodes)}
    nodes = [(names[i], [f"s{s}" for s in range(cards[i])]) for i in order]
    parents = {names[i]: [names[j] for j in par_pos[i]] for i in range(n_nodes)}
    cpts = {names[i]: tables[i] for i in range(n_nodes)}
    return BayesNet.from_tables(nodes, parents, cpts)


def load_fixture(name: str) -> BayesNet:
    text = resources.files("ibsample.fixtures").joinpath(name).read_text(encoding="utf-8")
    return parse_network(text)


def or_example() -> BayesNet:
    """``v = u1 OR u2`` with P(u1=T) = 0.3, P(u2=T) = 0.2."""
    return load_fixture("or_example.bnx")


def five_node_fixture() -> tuple[BayesNet, Assignment]:
    """Five binary nodes with two evidence sinks; returns the net and its evidence."""
    net = load_fixture("five_node.bnx")
    return net, net.assignment("D=T,E=T")
