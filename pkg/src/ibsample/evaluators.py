"""Consumers of generated assignments.

``BucketAccumulator`` sums the mass of distinct assignments and turns it
into guaranteed posterior bounds. ``ScoreTable`` is the likelihood
weighing estimator. Totals are kept as exact rationals (every float is a
dyadic rational), so merging per-worker states reproduces the sequential
result exactly, independent of summation order.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .network import Assignment, BayesNet
from .sampler import SampleRecord

ZERO = Fraction(0)
ONE = Fraction(1)


class BindingError(ValueError):
    pass


class DisjointnessError(RuntimeError):
    """A new assignment overlaps an accumulated one in disjoint mode."""


class IneligibleSamplesError(ValueError):
    pass


class NoUsefulSamplesError(ValueError):
    pass


def _root_priors(net: BayesNet, queries: Iterable[int],
                 priors: Mapping[int, Sequence[float]] | None) -> dict[int, np.ndarray]:
    out = {}
    for q in queries:
        if priors is not None and q in priors:
            out[q] = np.asarray(priors[q], dtype=float)
        elif net.is_root(q):
            out[q] = np.asarray(net.cpts[q], dtype=float)
    return out


@dataclass(frozen=True)
class BoundsReport:
    """Posterior bounds per state of one query.

    ``delta`` is ``eps / (mass_E + eps)``. The width ``upper - lower`` equals
    ``delta`` when every accumulated evidence assignment is credited to some
    state of the query, and is larger otherwise.
    """

    query: int
    lower: np.ndarray
    upper: np.ndarray
    delta: float
    eps: float
    mass_E: float
    samples: int
    distinct: int


class BucketAccumulator:
    """Accumulated mass of distinct assignments.

    ``mode="disjoint"`` is for METHOD 1 feeds, whose distinct outputs are
    pairwise disjoint events: a repeat adds nothing and a new assignment
    adds its full probability. An overlap between a new assignment and an
    accumulated one is a generator defect and raises ``DisjointnessError``.

    ``mode="general"`` accepts arbitrary IB assignments (e.g. from the GA).
    Subsumed assignments are discarded and overlaps are resolved exactly
    over the enumerated joint table, so it is limited to networks the
    oracle can enumerate.
    """

    def __init__(self, net: BayesNet, evidence: Mapping[int, int], queries: Iterable[int] = (),
                 mode: str = "disjoint", binding: tuple[str, int | None] | None = None,
                 priors: Mapping[int, Sequence[float]] | None = None, watchdog: bool = True):
        if mode not in ("disjoint", "general"):
            raise ValueError(f"unknown accumulator mode {mode!r}")
        self.net = net
        self.evidence = Assignment(evidence)
        self.queries = tuple(dict.fromkeys(queries))
        self.mode = mode
        self.binding = binding
        self.priors = _root_priors(net, self.queries, priors)
        self.watchdog = watchdog
        self._ancestry = {q: net.ancestors_or_self(q) for q in self.queries}
        self.samples = 0
        self.ineligible = {q: 0 for q in self.queries}
        # disjoint mode: canonical assignment -> (exact prob, bucket tag per query or "notE")
        self._seen: dict[Assignment, tuple[Fraction, tuple]] = {}
        self._vec = np.empty((0, len(net)), dtype=np.int16)
        self._nvec = 0
        self._mass_E = ZERO
        self._mass_notE = ZERO
        self._mass_q = {q: [ZERO] * net.cards[q] for q in self.queries}
        self._mass_free = {q: ZERO for q in self.queries}
        if mode == "general":
            from .oracle import joint_table

            self._table = joint_table(net)
            size = len(self._table.probs)
            self._ev_mask = self._table.mask(self.evidence)
            self._cov_E = np.zeros(size, dtype=bool)
            self._cov_notE = np.zeros(size, dtype=bool)
            self._cov_q = {q: [np.zeros(size, dtype=bool) for _ in range(net.cards[q])]
                           for q in self.queries}
            self._cov_free = {q: np.zeros(size, dtype=bool) for q in self.queries}
            self._accepted: list[tuple[Assignment, bool]] = []

    # -- classification -------------------------------------------------

    def _tags(self, a: Assignment) -> tuple:
        tags = []
        for q in self.queries:
            if q in a:
                tags.append(a[q])
            elif self._ancestry[q].isdisjoint(a):
                tags.append("free")
            else:
                tags.append("inel")
        return tuple(tags)

    def _check_binding(self, binding) -> None:
        if self.binding is None:
            self.binding = binding
        elif self.binding != binding:
            raise BindingError(f"accumulator bound to {self.binding}, got a record from {binding}")

    # -- feeding ----------------------------------------------------------

    def add(self, rec: SampleRecord) -> float:
        """Add one generator output; returns the effective mass it contributed."""
        self._check_binding(rec.binding)
        return self._add(rec.assignment, rec.event_prob)

    def add_assignment(self, a: Assignment, event_prob: float,
                       binding: tuple[str, int | None] = ("ga", None)) -> float:
        self._check_binding(binding)
        return self._add(Assignment(a), event_prob)

    def _add(self, a: Assignment, p: float) -> float:
        self.samples += 1
        if p == 0.0:
            return 0.0
        if self.mode == "general":
            return self._add_general(a)
        if a in self._seen:
            return 0.0
        inside = a.contains(self.evidence)
        if not inside and a.consistent(self.evidence):
            raise DisjointnessError(
                "disjoint mode needs assignments that contain the evidence or contradict it")
        if self.watchdog and self._nvec:
            vec = a.as_vector(len(self.net))
            seen = self._vec[:self._nvec]
            ok = np.all((seen == -1) | (vec == -1) | (seen == vec), axis=1)
            if ok.any():
                other = Assignment((v, s) for v, s in enumerate(seen[int(np.argmax(ok))]) if s >= 0)
                raise DisjointnessError(
                    f"{self.net.format_assignment(a)} overlaps accumulated "
                    f"{self.net.format_assignment(other)}")
        self._store(a, Fraction(p), inside)
        return p

    def _store(self, a: Assignment, fp: Fraction, inside: bool) -> None:
        tags = self._tags(a) if inside else "notE"
        self._seen[a] = (fp, tags)
        if self.watchdog:
            if self._nvec == len(self._vec):
                grown = np.empty((max(16, 2 * len(self._vec)), len(self.net)), dtype=np.int16)
                grown[:self._nvec] = self._vec[:self._nvec]
                self._vec = grown
            self._vec[self._nvec] = a.as_vector(len(self.net))
            self._nvec += 1
        self._account(fp, tags)

    def _account(self, fp: Fraction, tags) -> None:
        if tags == "notE":
            self._mass_notE += fp
            return
        self._mass_E += fp
        for q, tag in zip(self.queries, tags):
            if tag == "free":
                self._mass_free[q] += fp
            elif tag == "inel":
                self.ineligible[q] += 1
            else:
                self._mass_q[q][tag] += fp

    def _add_general(self, a: Assignment) -> float:
        inside = a.consistent(self.evidence)
        # bucket events: A and E for the evidence bucket, A itself for the other
        key = a.union(self.evidence) if inside else a
        for b, b_inside in self._accepted:
            if b_inside == inside and key.contains(b.union(self.evidence) if inside else b):
                return 0.0
        table = self._table
        event = table.mask(a)
        self._accepted.append((a, inside))
        if not inside:
            fresh = event & ~self._cov_notE
            self._cov_notE |= event
            return float(table.probs[fresh].sum())
        event &= self._ev_mask
        fresh = event & ~self._cov_E
        self._cov_E |= event
        for q, tag in zip(self.queries, self._tags(a)):
            if tag == "free":
                self._cov_free[q] |= event
            elif tag == "inel":
                self.ineligible[q] += 1
            else:
                self._cov_q[q][tag] |= event
        return float(table.probs[fresh].sum())

    # -- reading ----------------------------------------------------------

    def _p(self, mask: np.ndarray) -> float:
        return float(self._table.probs[mask].sum())

    @property
    def distinct(self) -> int:
        return len(self._accepted) if self.mode == "general" else len(self._seen)

    @property
    def mass_E(self) -> float:
        return self._p(self._cov_E) if self.mode == "general" else float(self._mass_E)

    @property
    def mass_notE(self) -> float:
        return self._p(self._cov_notE) if self.mode == "general" else float(self._mass_notE)

    def mass_q(self, q: int) -> list[float]:
        if self.mode == "general":
            return [self._p(m) for m in self._cov_q[q]]
        return [float(x) for x in self._mass_q[q]]

    def mass_free(self, q: int) -> float:
        return self._p(self._cov_free[q]) if self.mode == "general" else float(self._mass_free[q])

    @property
    def eps(self) -> float:
        return float(self._eps_exact())

    def _eps_exact(self) -> Fraction:
        if self.mode == "general":
            return Fraction(1) - Fraction(self.mass_E) - Fraction(self.mass_notE)
        return ONE - self._mass_E - self._mass_notE

    def bounds(self, q: int, relaxed: bool = False) -> BoundsReport:
        """Posterior bounds for every state of ``q``.

        With ``relaxed``, assignments that leave ``q`` and all its ancestors
        unassigned contribute their mass times the prior of each state.
        """
        if q not in self._mass_q:
            raise KeyError(f"node {q} is not a tracked query")
        card = self.net.cards[q]
        if self.mode == "general":
            E, notE = Fraction(self.mass_E), Fraction(self.mass_notE)
            if relaxed:
                qmask = [self._table.states[:, q] == i for i in range(card)]
                nums = [Fraction(self._p(self._cov_q[q][i] | (self._cov_free[q] & qmask[i])))
                        for i in range(card)]
            else:
                nums = [Fraction(x) for x in self.mass_q(q)]
        else:
            E, notE = self._mass_E, self._mass_notE
            nums = list(self._mass_q[q])
            if relaxed:
                if self.ineligible[q]:
                    raise IneligibleSamplesError(
                        f"{self.ineligible[q]} accumulated assignments touch ancestors of "
                        f"{self.net.nodes[q].name!r} without assigning it")
                if q not in self.priors:
                    raise KeyError(f"prior of non-root {self.net.nodes[q].name!r} not supplied")
                free = self._mass_free[q]
                nums = [n + free * Fraction(float(p)) for n, p in zip(nums, self.priors[q])]
        eps = ONE - E - notE
        denom = E + eps
        if denom <= 0:
            raise ZeroDivisionError("all probability mass is outside the evidence")
        # evidence mass credited to no state of q (ineligible, or free under strict
        # scoring) could belong to any state, so it widens every upper bound
        loose = max(ZERO, E - sum(nums, ZERO))
        lower = np.array([float(n / denom) for n in nums])
        upper = np.array([float(min(ONE, (n + eps + loose) / denom)) for n in nums])
        return BoundsReport(q, lower, upper, float(eps / denom), float(eps), float(E),
                            self.samples, self.distinct)

    def copy_empty(self) -> "BucketAccumulator":
        return BucketAccumulator(self.net, self.evidence, self.queries, self.mode, self.binding,
                                 self.priors, self.watchdog)


class ScoreTable:
    """Likelihood-weighing totals per query state.

    Strict scoring adds ``P(A)/P_S(A)`` to the state ``A`` assigns to the
    query. Relaxed scoring additionally spreads the weight of assignments
    that touch neither the query nor its ancestors over the states in
    proportion to the prior; assignments that touch an ancestor but not the
    query add nothing and are counted in ``ineligible``.
    """

    def __init__(self, net: BayesNet, queries: Iterable[int], relaxed: bool = False,
                 priors: Mapping[int, Sequence[float]] | None = None,
                 binding: tuple[str, int | None] | None = None):
        self.net = net
        self.queries = tuple(dict.fromkeys(queries))
        self.relaxed = relaxed
        self.priors = _root_priors(net, self.queries, priors)
        if relaxed:
            missing = [net.nodes[q].name for q in self.queries if q not in self.priors]
            if missing:
                raise KeyError(f"relaxed scoring needs priors for {missing}")
        self.binding = binding
        self._ancestry = {q: net.ancestors_or_self(q) for q in self.queries}
        self._totals = {q: [ZERO] * net.cards[q] for q in self.queries}
        self.samples = 0
        self.discards = 0
        self.ineligible = {q: 0 for q in self.queries}

    def add(self, rec: SampleRecord) -> None:
        if not rec.sampling_prob > 0:
            raise ValueError("sampling probability must be positive")
        if self.binding is None:
            self.binding = rec.binding
        elif self.binding != rec.binding:
            raise BindingError(f"table bound to {self.binding}, got a record from {rec.binding}")
        self.samples += 1
        if rec.event_prob == 0.0:
            self.discards += 1
            return
        w = rec.event_prob / rec.sampling_prob
        a = rec.assignment
        for q in self.queries:
            tot = self._totals[q]
            if q in a:
                tot[a[q]] += Fraction(w)
            elif not self.relaxed:
                continue
            elif self._ancestry[q].isdisjoint(a):
                for i, p in enumerate(self.priors[q]):
                    tot[i] += Fraction(w * float(p))
            else:
                self.ineligible[q] += 1

    def totals(self, q: int) -> np.ndarray:
        return np.array([float(t) for t in self._totals[q]])

    def estimate(self, q: int) -> np.ndarray:
        tot = self._totals[q]
        s = sum(tot, ZERO)
        if s <= 0:
            raise NoUsefulSamplesError(
                f"no useful samples for {self.net.nodes[q].name!r} "
                f"({self.samples} drawn, {self.discards} discarded)")
        return np.array([float(t / s) for t in tot])

    def copy_empty(self) -> "ScoreTable":
        return ScoreTable(self.net, self.queries, self.relaxed, self.priors, self.binding)


def lw_add(tab: ScoreTable, rec: SampleRecord) -> ScoreTable:
    tab.add(rec)
    return tab


def lw_estimate(tab: ScoreTable, q: int) -> np.ndarray:
    return tab.estimate(q)


def accum_add(acc: BucketAccumulator, rec: SampleRecord) -> BucketAccumulator:
    acc.add(rec)
    return acc


def bounds(acc: BucketAccumulator, q: int, relaxed: bool = False) -> BoundsReport:
    return acc.bounds(q, relaxed)


def _same_config(a, b) -> None:
    if a.net is not b.net or a.queries != b.queries:
        raise BindingError("cannot merge states over different networks or queries")
    if a.binding is not None and b.binding is not None and a.binding != b.binding:
        raise BindingError(f"cannot merge {a.binding} with {b.binding}")


def merge(a, b):
    """Combine two evaluator states of the same kind into a new one."""
    if isinstance(a, ScoreTable) and isinstance(b, ScoreTable):
        _same_config(a, b)
        if a.relaxed != b.relaxed:
            raise BindingError("cannot merge strict and relaxed score tables")
        out = a.copy_empty()
        out.binding = a.binding or b.binding
        out.samples = a.samples + b.samples
        out.discards = a.discards + b.discards
        for q in a.queries:
            out._totals[q] = [x + y for x, y in zip(a._totals[q], b._totals[q])]
            out.ineligible[q] = a.ineligible[q] + b.ineligible[q]
        return out
    if isinstance(a, BucketAccumulator) and isinstance(b, BucketAccumulator):
        _same_config(a, b)
        if a.mode != b.mode or a.evidence != b.evidence:
            raise BindingError("cannot merge accumulators with different mode or evidence")
        out = a.copy_empty()
        out.binding = a.binding or b.binding
        out.samples = a.samples + b.samples
        if a.mode == "general":
            for x, _ in a._accepted + b._accepted:
                out._add_general(x)
            out.samples = a.samples + b.samples
            return out
        for src in (a, b):
            for asg, (fp, tags) in src._seen.items():
                if asg in out._seen:
                    continue
                if out.watchdog and out._nvec:
                    vec = asg.as_vector(len(out.net))
                    seen = out._vec[:out._nvec]
                    if np.all((seen == -1) | (vec == -1) | (seen == vec), axis=1).any():
                        raise DisjointnessError("merged states contain overlapping assignments")
                out._store(asg, fp, tags != "notE")
        return out
    raise TypeError("merge needs two ScoreTables or two BucketAccumulators")
