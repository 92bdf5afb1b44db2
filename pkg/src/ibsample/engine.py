"""Composes the sampler, evaluators and oracle into single inference runs."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .evaluators import (BoundsReport, BucketAccumulator, IneligibleSamplesError,
                         NoUsefulSamplesError, ScoreTable, merge)
from .network import Assignment, BayesNet
from .oracle import exact
from .sampler import Method1, SelectionPolicy, spawn_rngs


@dataclass(frozen=True)
class QueryResult:
    query: int
    lower: np.ndarray
    upper: np.ndarray
    delta: float
    eps: float
    lw_estimate: np.ndarray | None
    samples: int
    distinct: int
    useful: int


def plan_streams(net: BayesNet, evidence: Mapping[int, int], queries: Sequence[int],
                 mode: str = "auto", query: int | None = None) -> list[tuple[str, int | None, tuple[int, ...]]]:
    """Which sampler runs serve which queries: ``[(mode, mode_query, queries), ...]``.

    ``auto`` shares one plain stream among root queries (their relaxed
    scoring needs no OPTION 1) and gives every non-root query its own
    relaxed stream with attach-and-continue.
    """
    if mode != "auto":
        return [(mode, query, tuple(queries))]
    roots = tuple(q for q in queries if net.is_root(q))
    plan = [("plain", None, roots)] if roots else []
    plan += [("relaxed", q, (q,)) for q in queries if not net.is_root(q)]
    return plan


def _priors_for(net: BayesNet, queries: Sequence[int]) -> dict[int, np.ndarray]:
    nonroot = [q for q in queries if not net.is_root(q)]
    if not nonroot:
        return {}
    priors = exact(net).priors
    return {q: priors[q] for q in nonroot}


def _run_stream(sampler: Method1, acc: BucketAccumulator, tab: ScoreTable,
                rng: np.random.Generator, count: int) -> tuple[BucketAccumulator, ScoreTable]:
    for _ in range(count):
        rec = sampler.sample(rng)
        acc.add(rec)
        tab.add(rec)
    return acc, tab


def run_ib(net: BayesNet, evidence: Mapping[int, int], queries: Sequence[int], count: int,
           seed: int = 0, mode: str = "auto", query: int | None = None,
           policy: SelectionPolicy | None = None, threads: int = 1) -> dict[int, QueryResult]:
    """IB sampling with both evaluators attached to the same sample stream(s)."""
    evidence = Assignment(evidence)
    priors = _priors_for(net, queries)
    out: dict[int, QueryResult] = {}
    for k, (m, mq, qs) in enumerate(plan_streams(net, evidence, queries, mode, query)):
        if not qs:
            continue
        sampler = Method1(net, evidence, m, mq, policy)
        relaxed = m != "option1"
        workers = max(1, threads)
        shares = [count // workers + (1 if i < count % workers else 0) for i in range(workers)]
        rngs = spawn_rngs(seed + 7919 * k, workers)
        states = [(BucketAccumulator(net, evidence, qs, priors=priors),
                   ScoreTable(net, qs, relaxed=relaxed, priors=priors)) for _ in range(workers)]
        if workers == 1:
            results = [_run_stream(sampler, *states[0], rngs[0], shares[0])]
        else:
            with ThreadPoolExecutor(workers) as pool:
                results = list(pool.map(lambda i: _run_stream(sampler, *states[i], rngs[i], shares[i]),
                                        range(workers)))
        acc = reduce(merge, [r[0] for r in results])
        tab = reduce(merge, [r[1] for r in results])
        for q in qs:
            try:
                b: BoundsReport = acc.bounds(q, relaxed=relaxed)
            except IneligibleSamplesError:
                b = acc.bounds(q, relaxed=False)
            try:
                est = tab.estimate(q)
            except NoUsefulSamplesError:
                est = None
            out[q] = QueryResult(q, b.lower, b.upper, b.delta, b.eps, est, tab.samples,
                                 acc.distinct, tab.samples - tab.discards)
    return out
