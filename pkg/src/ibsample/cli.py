"""Command-line interface: gen, validate, exact, sample, infer, ga, bench."""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from .bench import SCHEMES, BenchSpec, format_csv, run_bench
from .bnx import BNXSyntaxError, load_network, save_network
from .engine import run_ib
from .evaluators import BucketAccumulator
from .ga import GAConfig, GARun, MessyGA
from .hypercube import cover_sizes, net_covers, validate_cover
from .network import BayesNet, NetworkError
from .netgen import FusionParams, five_node_fixture, gen_fusion, gen_random, or_example
from .oracle import OracleCapError, ZeroEvidenceError, exact, forward_logic_sample, optimal_sample
from .sampler import Method1, SelectionPolicy, parse_mode, spawn_rngs

EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_INFEASIBLE = 5

INFER_HEADER = ("node", "state", "lower", "upper", "delta", "lw_estimate", "samples", "distinct", "eps")


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


def _f(x) -> str:
    return "" if x is None else repr(float(x))


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _load(args) -> BayesNet:
    try:
        return load_network(args.net)
    except BNXSyntaxError as exc:
        raise _Fail(EXIT_PARSE, f"{args.net}: {exc}") from None
    except NetworkError as exc:
        raise _Fail(EXIT_VALIDATION, f"{args.net}: {exc}") from None
    except OSError as exc:
        raise _Fail(2, str(exc)) from None


def _evidence(net: BayesNet, args):
    text = args.evidence
    if text is None:
        side = Path(str(args.net) + ".evidence")
        text = side.read_text(encoding="utf-8").strip() if side.exists() else ""
    try:
        return net.assignment(text)
    except (ValueError, NetworkError) as exc:
        raise _Fail(EXIT_VALIDATION, f"bad evidence: {exc}") from None


def _queries(net: BayesNet, args, evidence) -> list[int]:
    if args.query:
        try:
            return [net.node_id(name) for name in args.query.split(",") if name]
        except NetworkError as exc:
            raise _Fail(EXIT_VALIDATION, str(exc)) from None
    return [q for q in net.roots if q not in evidence]


def cmd_gen(args) -> None:
    if args.kind == "fusion":
        net, ev = gen_fusion(FusionParams(n_roots=args.roots, n_evidence=args.evidence_nodes,
                                          root_prior=args.prior, wiring_seed=args.seed,
                                          and_chain=not args.no_chain))
    elif args.kind == "random":
        net = gen_random(args.nodes, args.max_parents, args.skew, args.states, args.seed,
                         csi=args.csi, det=args.det)
        ev = None
    elif args.kind == "five-node":
        net, ev = five_node_fixture()
    else:
        net = or_example()
        ev = net.assignment("v=T")
    if not args.out:
        raise _Fail(2, "gen needs --out")
    save_network(net, args.out)
    if ev is not None:
        Path(args.out + ".evidence").write_text(net.format_assignment(ev, ",") + "\n", encoding="utf-8")


def cmd_validate(args) -> None:
    net = _load(args)
    covers = net_covers(net)
    lines, rows, problems = [], [], 0
    for v, cover in enumerate(covers):
        name = net.nodes[v].name
        sizes = cover_sizes(net, cover)
        problem = validate_cover(net, cover)
        status = "ok" if problem is None else f"{problem.kind}: {problem.message}"
        problems += problem is not None
        lines.append(f"{name}: {len(cover.cubes)} cubes (" + ", ".join(
            f"{net.nodes[v].states[s]}={c}/{m}" for s, c, m in sizes) + f") {status}")
        rows += [(name, net.nodes[v].states[s], c, m) for s, c, m in sizes]
    sys.stdout.write("\n".join(lines) + "\n")
    if args.csv:
        Path(args.csv).write_text(_csv(("node", "state", "cube_count", "max_cube_count"), rows),
                                  encoding="utf-8")
    if problems:
        raise _Fail(EXIT_VALIDATION, f"{problems} invalid covers")


def _exact_rows(net, evidence, queries):
    try:
        res = exact(net, evidence)
    except OracleCapError as exc:
        raise _Fail(EXIT_INFEASIBLE, str(exc)) from None
    if res.zero_evidence:
        raise _Fail(EXIT_INFEASIBLE, "evidence has probability 0")
    rows = []
    for q in queries:
        for s, p in enumerate(res.posteriors[q]):
            rows.append((net.nodes[q].name, net.nodes[q].states[s], _f(p), _f(p), _f(0.0), _f(p),
                         0, 0, _f(0.0)))
    return rows


def cmd_exact(args) -> None:
    net = _load(args)
    ev = _evidence(net, args)
    _emit(_csv(INFER_HEADER, _exact_rows(net, ev, _queries(net, args, ev))), args.out)


def cmd_sample(args) -> None:
    net = _load(args)
    ev = _evidence(net, args)
    try:
        mode, q = parse_mode(net, args.mode)
        policy = SelectionPolicy.parse(args.policy)
        if args.include_zero:
            policy = SelectionPolicy(policy.kind, policy.alpha, include_zero=True)
        sampler = Method1(net, ev, mode, q, policy)
    except (ValueError, NetworkError) as exc:
        raise _Fail(EXIT_VALIDATION, str(exc)) from None
    rng = spawn_rngs(args.seed, 1)[0]
    rows = []
    for _ in range(args.count):
        rec = sampler.sample(rng)
        rows.append((net.format_assignment(rec.assignment), _f(rec.event_prob), _f(rec.sampling_prob)))
    _emit(_csv(("assignment", "event_prob", "sampling_prob"), rows), args.out)


def cmd_infer(args) -> None:
    net = _load(args)
    ev = _evidence(net, args)
    queries = _queries(net, args, ev)
    if args.engine == "exact":
        _emit(_csv(INFER_HEADER, _exact_rows(net, ev, queries)), args.out)
        return
    rows = []
    try:
        if args.engine in ("ib-sample", "ib-accumulate"):
            if args.mode == "auto":
                mode, mq = "auto", None
            else:
                mode, mq = parse_mode(net, args.mode)
                if mq is not None and not args.query:
                    queries = [mq]
            res = run_ib(net, ev, queries, args.count, args.seed, mode, mq,
                         SelectionPolicy.parse(args.policy), args.threads)
            for q in queries:
                r = res[q]
                for s in range(net.cards[q]):
                    lw = r.lw_estimate[s] if r.lw_estimate is not None else None
                    rows.append((net.nodes[q].name, net.nodes[q].states[s], _f(r.lower[s]),
                                 _f(r.upper[s]), _f(r.delta), _f(lw), r.samples, r.distinct,
                                 _f(r.eps)))
        else:
            rng = spawn_rngs(args.seed, 1)[0]
            counts = {q: np.zeros(net.cards[q]) for q in queries}
            used = 0
            for _ in range(args.count):
                if args.engine == "optimal":
                    a, ok = optimal_sample(net, ev, rng), True
                else:
                    a, ok = forward_logic_sample(net, ev, rng)
                if ok:
                    used += 1
                    for q in queries:
                        counts[q][a[q]] += 1
            for q in queries:
                for s in range(net.cards[q]):
                    est = counts[q][s] / used if used else None
                    rows.append((net.nodes[q].name, net.nodes[q].states[s], "", "", "", _f(est),
                                 args.count, used, ""))
    except (OracleCapError, ZeroEvidenceError) as exc:
        raise _Fail(EXIT_INFEASIBLE, str(exc)) from None
    except (ValueError, NetworkError) as exc:
        raise _Fail(EXIT_VALIDATION, str(exc)) from None
    _emit(_csv(INFER_HEADER, rows), args.out)


def cmd_ga(args) -> None:
    net = _load(args)
    ev = _evidence(net, args)
    cfg = GAConfig(pop_size=args.pop, generations=args.gens, seed=args.seed,
                   penalty=args.penalty, length_bonus=args.bonus, family=args.family)
    try:
        sink = BucketAccumulator(net, ev, _queries(net, args, ev), mode="general")
    except OracleCapError as exc:
        raise _Fail(EXIT_INFEASIBLE, str(exc)) from None
    run = MessyGA(net, ev, cfg).evolve(sink)
    rows = [(g, _f(best), n, _f(me), _f(mn), _f(eps)) for g, best, n, me, mn, eps in run.rows]
    _emit(_csv(GARun.CSV_HEADER, rows), args.out)


def cmd_bench(args) -> None:
    net = _load(args)
    ev = _evidence(net, args)
    queries = tuple(_queries(net, args, ev))
    try:
        spec = BenchSpec(net, ev, queries, tuple(args.schemes.split(",")),
                         tuple(int(x) for x in args.ladder.split(",")), args.runs, args.seed,
                         Path(args.out) if args.out else None, SelectionPolicy.parse(args.policy),
                         args.threads)
        rows = run_bench(spec)
    except OracleCapError as exc:
        raise _Fail(EXIT_INFEASIBLE, str(exc)) from None
    except ValueError as exc:
        raise _Fail(EXIT_VALIDATION, str(exc)) from None
    if not args.out:
        sys.stdout.write(format_csv(rows))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--out", default=None, help="output file (default: stdout)")

    netargs = argparse.ArgumentParser(add_help=False)
    netargs.add_argument("--net", required=True, help="BNX network file")
    netargs.add_argument("--evidence", default=None,
                         help='e.g. "v=T,u=F"; default: NET.evidence sidecar if present')
    netargs.add_argument("--query", default=None, help="comma-separated query nodes (default: roots)")

    p = argparse.ArgumentParser(prog="ibsample", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="write a generated network")
    g.add_argument("kind", choices=["fusion", "random", "five-node", "or-example"])
    g.add_argument("--roots", type=int, default=12)
    g.add_argument("--evidence-nodes", type=int, default=4)
    g.add_argument("--prior", type=float, default=0.1)
    g.add_argument("--no-chain", action="store_true")
    g.add_argument("--nodes", type=int, default=8)
    g.add_argument("--max-parents", type=int, default=3)
    g.add_argument("--skew", type=float, default=0.0)
    g.add_argument("--states", type=int, default=2)
    g.add_argument("--csi", type=float, default=0.0)
    g.add_argument("--det", type=float, default=0.0)
    g.set_defaults(func=cmd_gen)

    v = sub.add_parser("validate", parents=[common], help="check disjoint covers")
    v.add_argument("--net", required=True)
    v.add_argument("--csv", default=None, help="also write per-state cube counts as CSV")
    v.set_defaults(func=cmd_validate)

    e = sub.add_parser("exact", parents=[common, netargs], help="exact posteriors by enumeration")
    e.set_defaults(func=cmd_exact)

    s = sub.add_parser("sample", parents=[common, netargs], help="draw IB assignments")
    s.add_argument("--mode", default="plain", help="plain | option1:Q | relaxed:Q")
    s.add_argument("--policy", default="cube^1", help="cube^ALPHA | uniform")
    s.add_argument("--count", type=int, default=10)
    s.add_argument("--include-zero", action="store_true", help="allow zero-probability cubes")
    s.set_defaults(func=cmd_sample)

    i = sub.add_parser("infer", parents=[common, netargs], help="posterior bounds and estimates")
    i.add_argument("--engine", default="ib-sample",
                   choices=["exact", "ib-sample", "ib-accumulate", "forward", "optimal"])
    i.add_argument("--mode", default="auto", help="auto | plain | option1:Q | relaxed:Q")
    i.add_argument("--policy", default="cube^1")
    i.add_argument("--count", type=int, default=1000)
    i.set_defaults(func=cmd_infer)

    ga = sub.add_parser("ga", parents=[common, netargs], help="messy-GA accumulation")
    ga.add_argument("--pop", type=int, default=40)
    ga.add_argument("--gens", type=int, default=200)
    ga.add_argument("--lambda", dest="penalty", type=float, default=10.0)
    ga.add_argument("--beta", dest="bonus", type=float, default=0.1)
    ga.add_argument("--family", choices=["disjoint", "maximal"], default="disjoint")
    ga.set_defaults(func=cmd_ga)

    b = sub.add_parser("bench", parents=[common, netargs], help="sampler comparison")
    b.add_argument("--schemes", default="forward,ib-sample,optimal",
                   help="comma-separated subset of " + ",".join(SCHEMES))
    b.add_argument("--ladder", default="10,30,100,300,1000")
    b.add_argument("--runs", type=int, default=10)
    b.add_argument("--policy", default="cube^1")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except _Fail as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    return 0


if __name__ == "__main__":
    sys.exit(main())
