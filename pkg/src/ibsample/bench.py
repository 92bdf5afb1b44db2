"""Sampler comparison harness: error against the exact oracle versus sample count."""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .evaluators import BucketAccumulator, IneligibleSamplesError, ScoreTable
from .ga import GAConfig, MessyGA
from .network import Assignment, BayesNet
from .oracle import exact, forward_logic_sample, optimal_sample
from .sampler import Method1, SelectionPolicy
from .engine import plan_streams

SCHEMES = ("ib-sample", "ib-accumulate", "forward", "optimal", "ga", "exact")
CSV_HEADER = ("scheme", "samples", "run", "error", "useful_fraction", "delta")


@dataclass(frozen=True)
class BenchSpec:
    net: BayesNet
    evidence: Assignment
    queries: tuple[int, ...] | None = None
    schemes: tuple[str, ...] = ("forward", "ib-sample", "optimal")
    ladder: tuple[int, ...] = (10, 30, 100, 300, 1000)
    runs: int = 10
    seed: int = 0
    out: Path | None = None
    policy: SelectionPolicy = field(default_factory=SelectionPolicy)
    threads: int = 1
    ga: GAConfig = field(default_factory=GAConfig)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.ladder, self.ladder[1:])) or not self.ladder:
            raise ValueError("ladder must be non-empty and strictly increasing")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown:
            raise ValueError(f"unknown schemes {sorted(unknown)}")

    def query_nodes(self) -> tuple[int, ...]:
        if self.queries is not None:
            return self.queries
        return tuple(q for q in self.net.roots if q not in self.evidence)


def total_error(estimate: np.ndarray | None, truth: np.ndarray) -> float:
    """Sum over states of the absolute error; an unestimable variable scores 1 per state."""
    if estimate is None:
        return float(len(truth))
    return float(np.abs(np.asarray(estimate) - truth).sum())


def _normalized(nums: np.ndarray) -> np.ndarray | None:
    s = float(np.sum(nums))
    return None if s <= 0 else np.asarray(nums) / s


def _counts_estimate(counts: np.ndarray) -> np.ndarray | None:
    return _normalized(counts.astype(float))


class _Checkpoints:
    """Collects (samples, error, useful_fraction, delta) at ladder points."""

    def __init__(self, ladder: Sequence[int]):
        self.ladder = list(ladder)
        self.rows: list[tuple[int, float, float, float | None]] = []

    def due(self, n: int) -> bool:
        return len(self.rows) < len(self.ladder) and n == self.ladder[len(self.rows)]

    def add(self, n: int, err: float, useful: float, delta: float | None = None) -> None:
        self.rows.append((n, err, useful, delta))


def _run_ib(spec: BenchSpec, rng: np.random.Generator, truth, queries, accumulate: bool):
    net, ev = spec.net, spec.evidence
    priors = exact(net).priors
    prior_map = {q: priors[q] for q in queries}
    plan = [(Method1(net, ev, m, mq, spec.policy), qs)
            for m, mq, qs in plan_streams(net, ev, queries) if qs]
    states = []
    for sampler, qs in plan:
        states.append((sampler, qs, BucketAccumulator(net, ev, qs, priors=prior_map, watchdog=False),
                       ScoreTable(net, qs, relaxed=True, priors=prior_map)))
    cp = _Checkpoints(spec.ladder)
    total = useful = 0
    for n in range(1, spec.ladder[-1] + 1):
        for sampler, qs, acc, tab in states:
            rec = sampler.sample(rng)
            total += 1
            useful += rec.event_prob > 0
            if accumulate:
                acc.add(rec)
            else:
                tab.add(rec)
        if not cp.due(n):
            continue
        errs, deltas = [], []
        for sampler, qs, acc, tab in states:
            for q in qs:
                if accumulate:
                    try:
                        b = acc.bounds(q, relaxed=True)
                    except IneligibleSamplesError:
                        b = acc.bounds(q)
                    est = _normalized(b.lower)
                    deltas.append(b.delta)
                else:
                    tot = tab.totals(q)
                    est = _normalized(tot)
                errs.append(total_error(est, truth[q]))
        cp.add(n, float(np.mean(errs)), useful / total, float(np.mean(deltas)) if deltas else None)
    return cp.rows


def _run_forward(spec: BenchSpec, rng, truth, queries, optimal: bool):
    net, ev = spec.net, spec.evidence
    counts = {q: np.zeros(net.cards[q]) for q in queries}
    cp = _Checkpoints(spec.ladder)
    useful = 0
    for n in range(1, spec.ladder[-1] + 1):
        if optimal:
            a, ok = optimal_sample(net, ev, rng), True
        else:
            a, ok = forward_logic_sample(net, ev, rng)
        if ok:
            useful += 1
            for q in queries:
                counts[q][a[q]] += 1
        if cp.due(n):
            errs = [total_error(_counts_estimate(counts[q]), truth[q]) for q in queries]
            cp.add(n, float(np.mean(errs)), useful / n)
    return cp.rows


def _run_ga(spec: BenchSpec, seed: int, truth, queries):
    """Ladder points count chromosome evaluations (population size per generation)."""
    net, ev = spec.net, spec.evidence
    cfg = GAConfig(**{**spec.ga.__dict__, "seed": seed,
                      "generations": math.ceil(spec.ladder[-1] / spec.ga.pop_size)})
    sink = BucketAccumulator(net, ev, queries, mode="general")
    cp = _Checkpoints(spec.ladder)
    ga = MessyGA(net, ev, cfg)

    def hook(gen: int, acc: BucketAccumulator) -> None:
        evaluated = (gen + 1) * cfg.pop_size
        while len(cp.rows) < len(cp.ladder) and cp.ladder[len(cp.rows)] <= evaluated:
            errs, deltas = [], []
            for q in queries:
                b = acc.bounds(q, relaxed=True)
                errs.append(total_error(_normalized(b.lower), truth[q]))
                deltas.append(b.delta)
            cp.add(cp.ladder[len(cp.rows)], float(np.mean(errs)),
                   acc.distinct / evaluated, float(np.mean(deltas)))

    ga.evolve(sink, on_generation=hook)
    return cp.rows


def _job(args):
    spec, scheme, run = args
    queries = spec.query_nodes()
    res = exact(spec.net, spec.evidence)
    if res.zero_evidence:
        raise ValueError("evidence has probability 0")
    truth = res.posteriors
    ss = np.random.SeedSequence([spec.seed, SCHEMES.index(scheme), run])
    rng = np.random.default_rng(ss)
    if scheme == "exact":
        rows = [(n, 0.0, 1.0, 0.0) for n in spec.ladder]
    elif scheme in ("ib-sample", "ib-accumulate"):
        rows = _run_ib(spec, rng, truth, queries, accumulate=scheme == "ib-accumulate")
    elif scheme in ("forward", "optimal"):
        rows = _run_forward(spec, rng, truth, queries, optimal=scheme == "optimal")
    else:
        rows = _run_ga(spec, int(ss.generate_state(1)[0]), truth, queries)
    return [(scheme, n, run, err, useful, delta) for n, err, useful, delta in rows]


def run_bench(spec: BenchSpec) -> list[tuple]:
    """One row per (scheme, samples, run) followed by per-(scheme, samples) mean rows."""
    exact(spec.net, spec.evidence)  # fail early when the oracle is infeasible
    jobs = [(spec, scheme, run) for scheme in spec.schemes for run in range(spec.runs)]
    if spec.threads > 1:
        with ProcessPoolExecutor(spec.threads) as pool:
            chunks = list(pool.map(_job, jobs))
    else:
        chunks = [_job(j) for j in jobs]
    rows = sorted((r for chunk in chunks for r in chunk), key=lambda r: (r[0], r[1], r[2]))
    agg = []
    for scheme in spec.schemes:
        for n in spec.ladder:
            sel = [r for r in rows if r[0] == scheme and r[1] == n]
            deltas = [r[5] for r in sel if r[5] is not None]
            agg.append((scheme, n, "mean", float(np.mean([r[3] for r in sel])),
                        float(np.mean([r[4] for r in sel])),
                        float(np.mean(deltas)) if deltas else None))
    agg.sort(key=lambda r: (r[0], r[1]))
    out = rows + agg
    if spec.out is not None:
        Path(spec.out).write_text(format_csv(out), encoding="utf-8")
    return out


def format_csv(rows: Sequence[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def mean_errors(rows: Sequence[tuple], scheme: str) -> dict[int, float]:
    return {r[1]: r[3] for r in rows if r[0] == scheme and r[2] == "mean"}
