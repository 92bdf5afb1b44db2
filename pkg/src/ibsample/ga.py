"""Messy genetic algorithm over strings of hypercubes.

Chromosomes are variable-length lists of hypercubes and may contain
incompatible genes; only emission requires a compatible string whose
union is an IB assignment. The GA has no sampling probability, so its
output only ever feeds a general-mode ``BucketAccumulator``.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

import numpy as np

from .evaluators import BucketAccumulator
from .hypercube import Hypercube, maximal_ib_hypercubes, net_covers
from .network import Assignment, BayesNet, is_ib, prob_ib


@dataclass(frozen=True)
class GAConfig:
    pop_size: int = 40
    cut_prob: float = 0.3
    splice_prob: float = 0.5
    mutation_prob: float = 0.1
    penalty: float = 10.0       # per pair of incompatible genes
    length_bonus: float = 0.1   # per distinct base node
    generations: int = 200
    seed: int = 0
    emit_threshold: float = -math.inf
    family: str = "disjoint"    # or "maximal"
    tournament: int = 2
    zero_penalty: float = 50.0  # stands in for log 0
    max_length: int | None = None

    def __post_init__(self):
        for name in ("cut_prob", "splice_prob", "mutation_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.pop_size < 2:
            raise ValueError("population must have at least 2 members")
        if self.family not in ("disjoint", "maximal"):
            raise ValueError(f"unknown gene family {self.family!r}")
        if self.tournament < 1 or self.generations < 0:
            raise ValueError("bad tournament size or generation count")


@dataclass
class Chromosome:
    genes: list[Hypercube]
    fitness: float = 0.0
    compatible: bool = True

    def __len__(self) -> int:
        return len(self.genes)


def _distinct(genes: list[Hypercube]) -> list[Hypercube]:
    return list(dict.fromkeys(genes))


def _clashes(genes: list[Hypercube]) -> int:
    n = 0
    for i, g in enumerate(genes):
        for h in genes[i + 1:]:
            if not g.assignment.consistent(h.assignment):
                n += 1
    return n


def fitness(net: BayesNet, c: Chromosome, cfg: GAConfig) -> float:
    """Sum of log cube probabilities, minus a penalty per incompatible gene
    pair, plus a bonus per distinct base node. Repeated genes count once."""
    genes = _distinct(c.genes)
    logp = sum(math.log(g.prob) if g.prob > 0 else -cfg.zero_penalty for g in genes)
    bases = len({g.base for g in genes})
    return logp - cfg.penalty * _clashes(genes) + cfg.length_bonus * bases


def decode(net: BayesNet, c: Chromosome) -> Assignment | None:
    """Union of the genes if they are compatible and the union is IB, else None."""
    genes = _distinct(c.genes)
    if not genes:
        return None
    d: dict[int, int] = {}
    for g in genes:
        for v, s in g.assignment.items():
            if d.setdefault(v, s) != s:
                return None
    a = Assignment(d)
    return a if is_ib(net, a) else None


def gene_pool(net: BayesNet, family: str) -> list[list[Hypercube]]:
    if family == "disjoint":
        return [list(cov.cubes) for cov in net_covers(net)]
    return [[c for s in range(net.cards[v]) for c in maximal_ib_hypercubes(net, v, s)]
            for v in range(len(net))]


@dataclass
class GARun:
    rows: list[tuple[int, float, int, float, float, float]] = field(default_factory=list)
    emitted: list[Assignment] = field(default_factory=list)

    CSV_HEADER = ("generation", "best_fitness", "emitted", "mass_E", "mass_notE", "eps")


class MessyGA:
    def __init__(self, net: BayesNet, evidence: Mapping[int, int], cfg: GAConfig | None = None):
        self.net = net
        self.evidence = Assignment(evidence)
        self.cfg = cfg or GAConfig()
        self.pool = gene_pool(net, self.cfg.family)
        self.rng = np.random.default_rng(self.cfg.seed)
        self.max_length = self.cfg.max_length or 2 * len(net)

    def _pick(self, cubes: list[Hypercube]) -> Hypercube:
        return cubes[int(self.rng.integers(len(cubes)))]

    def random_chromosome(self) -> Chromosome:
        """Grow a string from a (usually evidence) node, mostly adding compatible cubes."""
        rng = self.rng
        ev_nodes = sorted(self.evidence)
        if ev_nodes and rng.random() < 0.8:
            v = ev_nodes[int(rng.integers(len(ev_nodes)))]
        else:
            v = int(rng.integers(len(self.net)))
        genes: list[Hypercube] = []
        current = dict(self.evidence)
        todo = [v]
        while todo and len(genes) < self.max_length:
            v = todo.pop(int(rng.integers(len(todo))))
            ok = [c for c in self.pool[v] if c.prob > 0 and c.assignment.consistent(current)]
            gene = self._pick(ok) if ok and rng.random() < 0.9 else self._pick(self.pool[v])
            genes.append(gene)
            current.update(gene.assignment.items())
            based = {g.base for g in genes}
            todo = [u for u, _ in gene.parent_pairs if u not in based] + [
                u for u in todo if u not in based]
            if rng.random() < 0.1:
                break
        return Chromosome(genes)

    def _tournament(self, pop: list[Chromosome]) -> Chromosome:
        best = None
        for _ in range(self.cfg.tournament):
            c = pop[int(self.rng.integers(len(pop)))]
            if best is None or c.fitness > best.fitness:
                best = c
        return best

    def _breed(self, pop: list[Chromosome]) -> list[Chromosome]:
        cfg, rng = self.cfg, self.rng
        best = max(pop, key=lambda c: c.fitness)
        out = [Chromosome(list(best.genes))]
        while len(out) < cfg.pop_size:
            parent = self._tournament(pop)
            kids = [list(parent.genes)]
            if rng.random() < cfg.cut_prob and len(parent) > 1:
                pos = int(rng.integers(1, len(parent)))
                kids = [kids[0][:pos], kids[0][pos:]]
            if rng.random() < cfg.splice_prob:
                other = self._tournament(pop)
                kids[0] = (kids[0] + list(other.genes))[:self.max_length]
            for genes in kids:
                if genes and rng.random() < cfg.mutation_prob:
                    i = int(rng.integers(len(genes)))
                    genes[i] = self._pick(self.pool[genes[i].base])
                out.append(Chromosome(genes))
        return out[:cfg.pop_size]

    def evolve(self, sink: BucketAccumulator, population: list[Chromosome] | None = None,
               on_generation: Callable[[int, BucketAccumulator], None] | None = None) -> GARun:
        if sink.mode != "general":
            raise ValueError("GA output needs a general-mode accumulator")
        cfg = self.cfg
        pop = population if population is not None else [
            self.random_chromosome() for _ in range(cfg.pop_size)]
        run = GARun()
        seen: set[Assignment] = set()
        for gen in range(cfg.generations + 1):
            new = 0
            for c in pop:
                c.fitness = fitness(self.net, c, cfg)
                a = decode(self.net, c)
                c.compatible = a is not None
                if a is None or c.fitness < cfg.emit_threshold or a in seen:
                    continue
                seen.add(a)
                run.emitted.append(a)
                sink.add_assignment(a, prob_ib(self.net, a))
                new += 1
            best = max(c.fitness for c in pop)
            run.rows.append((gen, best, new, sink.mass_E, sink.mass_notE, sink.eps))
            if on_generation is not None:
                on_generation(gen, sink)
            if gen < cfg.generations:
                pop = self._breed(pop)
        return run


def evolve(net: BayesNet, evidence: Mapping[int, int], cfg: GAConfig, sink: BucketAccumulator,
           population: list[Chromosome] | None = None) -> GARun:
    return MessyGA(net, evidence, cfg).evolve(sink, population)
