"""Per-node IB hypercubes: maximal families and disjoint covering families."""

from __future__ import annotations

import itertools
import weakref
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .network import IB_TOL, Assignment, BayesNet, ib_condition_holds


@dataclass(frozen=True)
class Hypercube:
    """Assignment to a node and some of its parents, with its hypercube probability."""

    base: int
    child_state: int
    parent_pairs: tuple[tuple[int, int], ...]
    prob: float

    @cached_property
    def assignment(self) -> Assignment:
        return Assignment(((self.base, self.child_state),) + self.parent_pairs)

    @property
    def is_zero(self) -> bool:
        return self.prob == 0.0

    def __len__(self) -> int:
        return 1 + len(self.parent_pairs)


@dataclass(frozen=True)
class DisjointCover:
    base: int
    cubes: tuple[Hypercube, ...]

    @cached_property
    def by_state(self) -> dict[int, tuple[Hypercube, ...]]:
        out: dict[int, list[Hypercube]] = {}
        for cube in self.cubes:
            out.setdefault(cube.child_state, []).append(cube)
        return {s: tuple(cs) for s, cs in out.items()}

    def consistent_with(self, a) -> list[Hypercube]:
        """Cubes consistent with the mapping ``a``; ``a`` must assign the base node."""
        out = []
        for cube in self.by_state.get(a[self.base], ()):
            for u, s in cube.parent_pairs:
                t = a.get(u)
                if t is not None and t != s:
                    break
            else:
                out.append(cube)
        return out


def _cube(v: int, s: int, pairs, prob: float) -> Hypercube:
    return Hypercube(v, s, tuple(sorted(pairs)), float(prob))


def maximal_ib_hypercubes(net: BayesNet, v: int, s: int, tol: float = IB_TOL) -> list[Hypercube]:
    """All maximal IB hypercubes based on ``v`` with child state ``s``.

    Brute force over parent subsets in increasing size; a candidate that
    extends an already accepted cube is skipped, so each accepted cube has
    no IB proper sub-assignment.
    """
    ps = sorted(net.parents[v])
    found: list[Hypercube] = []
    found_sets: list[frozenset] = []
    for r in range(len(ps) + 1):
        for subset in itertools.combinations(ps, r):
            for states in itertools.product(*(range(net.cards[u]) for u in subset)):
                pairs = frozenset(zip(subset, states))
                if any(f <= pairs for f in found_sets):
                    continue
                a = dict(pairs)
                a[v] = s
                if ib_condition_holds(net, a, v, tol):
                    found.append(_cube(v, s, pairs, net.cpt_slice(v, a).flat[0]))
                    found_sets.append(pairs)
    return found


def disjoint_cover(net: BayesNet, v: int, tol: float = IB_TOL) -> DisjointCover:
    """Context-split decision tree over the parents in ascending id order.

    A context whose CPT slice is constant (for every child state) over the
    remaining parents becomes a leaf with one cube per child state;
    otherwise the next parent is split on.
    """
    ps = net.parents[v]
    order = sorted(range(len(ps)), key=lambda j: ps[j])
    cpt = net.cpts[v]
    card = net.cards[v]
    cubes: list[Hypercube] = []

    def grow(ctx: dict[int, int], depth: int) -> None:
        idx = tuple(ctx.get(j, slice(None)) for j in range(len(ps)))
        flat = np.asarray(cpt[idx]).reshape(-1, card)
        if depth == len(order) or np.all(flat.max(axis=0) - flat.min(axis=0) <= tol):
            pairs = [(ps[j], st) for j, st in ctx.items()]
            for s in range(card):
                cubes.append(_cube(v, s, pairs, flat[0, s]))
            return
        j = order[depth]
        for st in range(net.cards[ps[j]]):
            ctx[j] = st
            grow(ctx, depth + 1)
            del ctx[j]

    grow({}, 0)
    return DisjointCover(v, tuple(cubes))


_cover_cache: "weakref.WeakKeyDictionary[BayesNet, tuple[DisjointCover, ...]]" = weakref.WeakKeyDictionary()


def net_covers(net: BayesNet) -> tuple[DisjointCover, ...]:
    """Disjoint covers for every node, computed once per network."""
    covers = _cover_cache.get(net)
    if covers is None:
        covers = tuple(disjoint_cover(net, v) for v in range(len(net)))
        _cover_cache[net] = covers
    return covers


@dataclass(frozen=True)
class CoverProblem:
    kind: str  # "cube", "disjointness", "coverage" or "normalization"
    message: str
    witness: tuple = ()


def validate_cover(net: BayesNet, cover: DisjointCover) -> CoverProblem | None:
    """First violation of the cover invariants, or None when the cover is valid."""
    v = cover.base
    name = net.nodes[v].name
    for cube in cover.cubes:
        a = cube.assignment
        if cube.base != v or any(u not in net.parents[v] for u, _ in cube.parent_pairs):
            return CoverProblem("cube", f"cube {net.format_assignment(a)} is not based on {name}", (cube,))
        if not ib_condition_holds(net, a, v):
            return CoverProblem("cube", f"cube {net.format_assignment(a)} is not IB", (cube,))
        if abs(float(net.cpt_slice(v, a).flat[0]) - cube.prob) > 1e-12:
            return CoverProblem("cube", f"cube {net.format_assignment(a)} has wrong probability", (cube,))

    for c1, c2 in itertools.combinations(cover.cubes, 2):
        if c1.assignment.consistent(c2.assignment):
            return CoverProblem(
                "disjointness",
                f"cubes {net.format_assignment(c1.assignment)} and "
                f"{net.format_assignment(c2.assignment)} overlap",
                (c1, c2))

    ps = net.parents[v]
    for config in itertools.product(*(range(net.cards[p]) for p in ps)):
        total = 0.0
        for s in range(net.cards[v]):
            full = dict(zip(ps, config))
            full[v] = s
            hits = [c for c in cover.cubes if c.assignment.consistent(full)]
            if len(hits) != 1:
                return CoverProblem(
                    "coverage",
                    f"configuration {net.format_assignment(full)} matched by {len(hits)} cubes",
                    (Assignment(full),))
            total += hits[0].prob
        if abs(total - 1.0) > 1e-9:
            cfg = Assignment(zip(ps, config))
            return CoverProblem("normalization",
                                f"cube probabilities at {net.format_assignment(cfg)} sum to {total}",
                                (cfg,))
    return None


def cover_sizes(net: BayesNet, cover: DisjointCover) -> list[tuple[int, int, int]]:
    """``(state, cube_count, max_cube_count)`` per child state of the base node."""
    full = int(np.prod([net.cards[p] for p in net.parents[cover.base]])) if net.parents[cover.base] else 1
    return [(s, len(cover.by_state.get(s, ())), full) for s in range(net.cards[cover.base])]
