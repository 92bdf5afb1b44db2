import math

import numpy as np
import pytest

from ibsample.netgen import FusionParams, five_node_fixture, gen_fusion, gen_random, or_example
from ibsample.network import Assignment, BayesNet
from ibsample.oracle import (OracleCapError, ZeroEvidenceError, enumeration_bits, exact,
                             forward_logic_sample, optimal_sample)


def recursive_marginal(net, evidence):
    """Independent reference: depth-first summation along a topological order.

    Returns P(evidence) and per-node tables of P(v = s, evidence).
    """
    n = len(net)
    order = net.topological_order
    joint = [np.zeros(c) for c in net.cards]
    a = [0] * n

    def rec(i, p):
        if p == 0.0:
            return 0.0
        if i == n:
            for v in range(n):
                joint[v][a[v]] += p
            return p
        v = order[i]
        total = 0.0
        states = [evidence[v]] if v in evidence else range(net.cards[v])
        for s in states:
            a[v] = s
            row = net.cpts[v][tuple(a[u] for u in net.parents[v])]
            total += rec(i + 1, p * row[s])
        return total

    return rec(0, 1.0), joint


def fixtures():
    five, ev5 = five_node_fixture()
    orx = or_example()
    rand = gen_random(9, 3, 0.5, (2, 3), seed=3, csi=0.3)
    return [(orx, orx.assignment("v=T")), (five, ev5), (rand, Assignment({8: 0, 2: 1}))]


@pytest.mark.parametrize("k", range(3))
def test_exact_matches_recursive_reference(k):
    net, ev = fixtures()[k]
    pe, joint = recursive_marginal(net, ev)
    res = exact(net, ev)
    assert res.evidence_prob == pytest.approx(pe, abs=1e-12)
    for v in range(len(net)):
        np.testing.assert_allclose(res.posteriors[v], joint[v] / pe, atol=1e-12)
    _, prior_joint = recursive_marginal(net, {})
    for v in range(len(net)):
        np.testing.assert_allclose(res.priors[v], prior_joint[v], atol=1e-12)


def test_or_example_values():
    net = or_example()
    res = exact(net, net.assignment("v=T"))
    assert res.evidence_prob == pytest.approx(0.44, abs=1e-15)
    assert res.posteriors[0][0] == pytest.approx(0.3 / 0.44, abs=1e-12)


def test_five_node_values():
    net, ev = five_node_fixture()
    res = exact(net, ev)
    assert res.evidence_prob == pytest.approx(0.2048, abs=1e-12)
    got = {net.nodes[v].name: res.posteriors[v][0] for v in range(3)}
    assert got == pytest.approx({"A": 0.4296875, "B": 0.78125, "C": 0.25}, abs=1e-12)


def test_empty_evidence():
    net, _ = five_node_fixture()
    res = exact(net)
    assert res.evidence_prob == pytest.approx(1.0)
    for v in range(len(net)):
        np.testing.assert_allclose(res.posteriors[v], res.priors[v], atol=1e-12)
        assert res.priors[v].sum() == pytest.approx(1.0, abs=1e-9)


def test_contradictory_evidence_is_flagged():
    net = or_example()
    res = exact(net, net.assignment("v=T,u1=F,u2=F"))
    assert res.zero_evidence and res.evidence_prob == 0.0 and res.posteriors is None
    with pytest.raises(ZeroEvidenceError):
        optimal_sample(net, net.assignment("v=T,u1=F,u2=F"), np.random.default_rng(0))


def test_cap():
    net = gen_random(24, 2, 0.0, 2, seed=0)
    assert enumeration_bits(net) == 24
    with pytest.raises(OracleCapError):
        exact(net)


def test_deterministic_layers_are_cheap():
    net, ev = gen_fusion(FusionParams(n_roots=12, n_evidence=4, root_prior=0.03, wiring_seed=1))
    assert len(net) > 22 and enumeration_bits(net) == 12
    assert 0 < exact(net, ev).evidence_prob < 0.01


def test_forward_always_accepts_without_evidence():
    net, _ = five_node_fixture()
    rng = np.random.default_rng(0)
    assert all(forward_logic_sample(net, Assignment(), rng)[1] for _ in range(200))


def test_forward_acceptance_rate():
    net = or_example()
    ev = net.assignment("v=T")
    rng = np.random.default_rng(1)
    n = 100_000
    hits = sum(forward_logic_sample(net, ev, rng)[1] for _ in range(n))
    se = math.sqrt(0.44 * 0.56 / n)
    assert abs(hits / n - 0.44) <= 3 * se


def test_forward_starves_on_fusion_net():
    net, ev = gen_fusion(FusionParams(root_prior=0.03, wiring_seed=1))
    rng = np.random.default_rng(2)
    hits = sum(forward_logic_sample(net, ev, rng)[1] for _ in range(3000))
    assert hits / 3000 < 0.01


def test_optimal_sampler_marginals():
    net, ev = five_node_fixture()
    truth = exact(net, ev).posteriors
    rng = np.random.default_rng(3)
    n = 100_000
    counts = [np.zeros(c) for c in net.cards]
    for _ in range(n):
        a = optimal_sample(net, ev, rng)
        assert a.contains(ev)
        for v, s in a.items():
            counts[v][s] += 1
    for v in range(len(net)):
        p = truth[v]
        se = np.sqrt(p * (1 - p) / n)
        assert np.all(np.abs(counts[v] / n - p) <= 3 * se + 1e-12)


def test_optimal_sampler_deterministic_net():
    eye = [[1.0, 0.0], [0.0, 1.0]]
    net = BayesNet.from_tables([("a", "TF"), ("b", "TF"), ("c", "TF")], {"b": ["a"], "c": ["b"]},
                               {"a": [1.0, 0.0], "b": eye, "c": [[0.0, 1.0], [1.0, 0.0]]})
    rng = np.random.default_rng(0)
    draws = {optimal_sample(net, net.assignment("c=F"), rng) for _ in range(50)}
    assert draws == {net.assignment("a=T,b=T,c=F")}


def test_optimal_sampler_complete_evidence():
    net, _ = five_node_fixture()
    ev = net.assignment("A=F,B=F,C=T,D=T,E=T")
    assert optimal_sample(net, ev, np.random.default_rng(0)) == ev
