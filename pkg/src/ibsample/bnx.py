"""Reader and writer for the BNX line format.

::

    # comment
    node <name> : <state> <state> ...
    parents <name> : <pname> <pname> ...
    cpt <name> | <parent-state> ... : <p> <p> ...
    cpt <root> : <p> <p> ...

Parent states follow the ``parents`` declaration order and probabilities
follow the state declaration order, one ``cpt`` line per parent
configuration.
"""

from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np

from .network import MAX_PARENTS, BayesNet, CPTError, NetworkError, UnknownNodeError


class BNXSyntaxError(NetworkError):
    def __init__(self, message: str, line: int, col: int):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, column {col}: {message}")


def _tokens(text: str) -> list[tuple[str, int]]:
    """Whitespace-separated tokens with their 1-based column."""
    out = []
    col = 0
    for tok in text.split():
        col = text.index(tok, col)
        out.append((tok, col + 1))
        col += len(tok)
    return out


def parse_network(text: str, max_parents: int = MAX_PARENTS) -> BayesNet:
    nodes: list[tuple[str, list[str]]] = []
    parents: dict[str, list[str]] = {}
    rows: dict[str, dict[tuple[str, ...], tuple[list[float], int]]] = {}
    where: dict[str, int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = _tokens(line)
        if not toks:
            continue
        kw, kcol = toks[0]
        if kw not in ("node", "parents", "cpt"):
            raise BNXSyntaxError(f"unknown statement {kw!r}", lineno, kcol)
        if len(toks) < 2:
            raise BNXSyntaxError(f"{kw} statement needs a node name", lineno, kcol + len(kw))
        name, ncol = toks[1]
        colon = [i for i, (t, _) in enumerate(toks) if t == ":"]
        if len(colon) != 1:
            col = toks[colon[1]][1] if len(colon) > 1 else len(line.rstrip()) + 1
            raise BNXSyntaxError("expected exactly one ':'", lineno, col)
        head, tail = toks[2:colon[0]], toks[colon[0] + 1:]

        if kw == "node":
            if head:
                raise BNXSyntaxError("unexpected token before ':'", lineno, head[0][1])
            if name in where:
                raise BNXSyntaxError(f"node {name!r} declared twice", lineno, ncol)
            if len(tail) < 2:
                raise BNXSyntaxError(f"node {name!r} needs at least 2 states", lineno,
                                     tail[0][1] if tail else len(line.rstrip()) + 1)
            states = [t for t, _ in tail]
            if len(set(states)) != len(states):
                raise BNXSyntaxError(f"duplicate state of {name!r}", lineno, tail[0][1])
            where[name] = lineno
            nodes.append((name, states))
        elif kw == "parents":
            if head:
                raise BNXSyntaxError("unexpected token before ':'", lineno, head[0][1])
            if name in parents:
                raise BNXSyntaxError(f"parents of {name!r} declared twice", lineno, ncol)
            parents[name] = [t for t, _ in tail]
        else:
            if head:
                if head[0][0] != "|":
                    raise BNXSyntaxError("expected '|' or ':' after node name", lineno, head[0][1])
                config = tuple(t for t, _ in head[1:])
            else:
                config = ()
            probs = []
            for tok, col in tail:
                try:
                    probs.append(float(tok))
                except ValueError:
                    raise BNXSyntaxError(f"bad probability {tok!r}", lineno, col) from None
            table = rows.setdefault(name, {})
            if config in table:
                raise BNXSyntaxError(f"duplicate cpt row for {name!r}", lineno, kcol)
            table[config] = (probs, lineno)

    declared = {name: states for name, states in nodes}
    for name, ps in parents.items():
        if name not in declared:
            raise UnknownNodeError(f"parents given for unknown node {name!r}")
        for p in ps:
            if p not in declared:
                raise UnknownNodeError(f"unknown parent {p!r} of {name!r}")
    for name in rows:
        if name not in declared:
            raise UnknownNodeError(f"cpt given for unknown node {name!r}")

    cpts = {}
    for name, states in nodes:
        ps = parents.get(name, [])
        pdoms = [declared[p] for p in ps]
        table = rows.get(name, {})
        arr = np.empty([len(d) for d in pdoms] + [len(states)])
        for config, (probs, lineno) in table.items():
            if len(config) != len(ps):
                raise BNXSyntaxError(
                    f"cpt row of {name!r} has {len(config)} parent states, expected {len(ps)}",
                    lineno, 1)
            if len(probs) != len(states):
                raise BNXSyntaxError(
                    f"cpt row of {name!r} has {len(probs)} probabilities, expected {len(states)}",
                    lineno, 1)
            try:
                idx = tuple(dom.index(s) for dom, s in zip(pdoms, config))
            except ValueError:
                raise UnknownNodeError(f"line {lineno}: unknown parent state in cpt of {name!r}") from None
            arr[idx] = probs
        expected = int(np.prod([len(d) for d in pdoms])) if pdoms else 1
        if len(table) != expected:
            raise CPTError(f"cpt of {name!r} has {len(table)} rows, expected {expected}")
        cpts[name] = arr
    return BayesNet.from_tables(nodes, parents, cpts, max_parents=max_parents)


def serialize_network(net: BayesNet) -> str:
    lines = []
    for spec in net.nodes:
        lines.append(f"node {spec.name} : {' '.join(spec.states)}")
    for v, spec in enumerate(net.nodes):
        if net.parents[v]:
            lines.append(f"parents {spec.name} : "
                         + " ".join(net.nodes[p].name for p in net.parents[v]))
    for v, spec in enumerate(net.nodes):
        ps = net.parents[v]
        cpt = net.cpts[v]
        for config in itertools.product(*(range(net.cards[p]) for p in ps)):
            probs = " ".join(repr(float(x)) for x in cpt[config])
            if ps:
                pstates = " ".join(net.nodes[p].states[s] for p, s in zip(ps, config))
                lines.append(f"cpt {spec.name} | {pstates} : {probs}")
            else:
                lines.append(f"cpt {spec.name} : {probs}")
    return "\n".join(lines) + "\n"


def load_network(path: str | Path, max_parents: int = MAX_PARENTS) -> BayesNet:
    return parse_network(Path(path).read_text(encoding="utf-8"), max_parents=max_parents)


def save_network(net: BayesNet, path: str | Path) -> None:
    Path(path).write_text(serialize_network(net), encoding="utf-8")


def nets_equal(a: BayesNet, b: BayesNet) -> bool:
    """Structural equality of two networks (names, states, parents, exact CPT values)."""
    return (a.nodes == b.nodes and a.parents == b.parents
            and all(np.array_equal(x, y) for x, y in zip(a.cpts, b.cpts)))
