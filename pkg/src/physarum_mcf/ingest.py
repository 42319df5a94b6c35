"""Problem file parsers and solution/trace writers.

Three input formats are understood.

Layered (``.layers``)::

    # plants -> warehouses -> customers
    layers: P W C
    P: P1 P2
    W: W1 W2 W3
    C: C1 C2 C3 C4
    supply: 9 8
    demand: 3 5 4 5
    big_m: 100
    drop_big_m: false

    matrix P W
    P1: 1 2 100
    P2: 3 1 2

    matrix W C
    W1: 5 7 100 100
    ...

Header lines are ``key: value``; values are whitespace and/or comma
separated.  ``supply`` lists rates for the first layer's nodes and
``demand`` for the last layer's, in declaration order.  Each ``matrix A B``
block has one row per node of layer ``A`` (``label: costs...``), with
columns in layer ``B``'s order.  Blocks are required for every consecutive
layer pair.  Entries equal to ``big_m`` become ordinary edges unless
``drop_big_m: true``.

Edge list (``.edges``)::

    node A supply 1
    node M
    node B demand 1
    edge A M 2.5
    edge M B 1

DIMACS minimum-cost flow (``.dimacs``, ``.min``, ``.inp``): ``p min N M``,
``n id flow`` (positive supply, negative demand), ``a u v low cap cost``.
Lower bounds must be zero and capacities at least the total supply.  The
comment ``c label <id> <name>`` attaches a node label.

``#`` starts a comment in the first two formats.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .dynamics import FlowSolution, TraceRecord
from .errors import (
    DimensionMismatch,
    ImbalanceError,
    NetworkError,
    NonZeroLowerBound,
    ParseError,
    UnsupportedCapacity,
)
from .network import BALANCE_RTOL, FlowProblem, Network, build_network

MAX_FRACTION_DIGITS = 6
_NUMBER = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_TOKEN = re.compile(r"[^\s,]+")

FORMAT_BY_SUFFIX = {
    ".layers": "layers",
    ".layered": "layers",
    ".edges": "edges",
    ".dimacs": "dimacs",
    ".min": "dimacs",
    ".inp": "dimacs",
}


@dataclass
class _Tok:
    text: str
    line: int
    col: int


def _tokens(line: str, lineno: int, offset: int = 0) -> list[_Tok]:
    return [_Tok(m.group(), lineno, m.start() + 1 + offset) for m in _TOKEN.finditer(line)]


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0]


def _number(tok: _Tok, what: str = "number") -> float:
    text = tok.text
    if not _NUMBER.match(text):
        raise ParseError(f"expected {what}, got {text!r}", tok.line, tok.col)
    if "." in text and "e" not in text.lower():
        digits = text.split(".", 1)[1]
        if len(digits) > MAX_FRACTION_DIGITS:
            raise ParseError(
                f"{text!r} has more than {MAX_FRACTION_DIGITS} fractional digits", tok.line, tok.col
            )
    value = float(text)
    if not math.isfinite(value):
        raise ParseError(f"non-finite {what} {text!r}", tok.line, tok.col)
    return value


def _check_ascii(text: str):
    for lineno, line in enumerate(text.splitlines(), 1):
        for col, ch in enumerate(line, 1):
            if ord(ch) > 127:
                raise ParseError(f"non-ASCII character {ch!r}", lineno, col)


def _check_balance(supplies: dict, demands: dict, line=None):
    s, d = math.fsum(supplies.values()), math.fsum(demands.values())
    if abs(s - d) > BALANCE_RTOL * max(abs(s), abs(d)):
        raise ImbalanceError(f"total supply {s:g} != total demand {d:g}", line)


def _build(nodes, edges, supplies, demands, line=None) -> FlowProblem:
    try:
        net = build_network(nodes, edges)
    except NetworkError as exc:
        raise ParseError(str(exc), line) from exc
    _check_balance(supplies, demands, line)
    return FlowProblem(net, supplies, demands)


# -- layered ---------------------------------------------------------------


def parse_layered(text: str) -> FlowProblem:
    _check_ascii(text)
    header: dict[str, list[_Tok]] = {}
    header_line: dict[str, int] = {}
    blocks: list[tuple[_Tok, _Tok, list[tuple[_Tok, list[_Tok]]]]] = []
    current = None

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw)
        if not line.strip():
            continue
        words = _tokens(line, lineno)
        if words[0].text == "matrix":
            if len(words) != 3:
                raise ParseError("expected 'matrix <from_layer> <to_layer>'", lineno, words[0].col)
            current = (words[1], words[2], [])
            blocks.append(current)
            continue
        if ":" not in line:
            raise ParseError("expected 'key: value'", lineno, words[0].col)
        key, _, rest = line.partition(":")
        key = key.strip()
        values = _tokens(rest, lineno, offset=line.index(":") + 1)
        if current is not None:
            current[2].append((_Tok(key, lineno, line.index(key) + 1), values))
        else:
            if key in header:
                raise ParseError(f"duplicate header {key!r}", lineno, 1)
            header[key] = values
            header_line[key] = lineno

    if "layers" not in header:
        raise ParseError("missing 'layers' header")
    layer_names = [t.text for t in header["layers"]]
    if len(layer_names) < 2:
        raise ParseError("need at least two layers", header_line["layers"])
    if len(set(layer_names)) != len(layer_names):
        raise ParseError("duplicate layer name", header_line["layers"])
    members: dict[str, list[str]] = {}
    for name in layer_names:
        if name not in header:
            raise ParseError(f"missing node list for layer {name!r}")
        members[name] = [t.text for t in header[name]]
        if not members[name]:
            raise ParseError(f"layer {name!r} is empty", header_line[name])

    known = {"layers", "supply", "demand", "big_m", "drop_big_m", *layer_names}
    for key in header:
        if key not in known:
            raise ParseError(f"unknown header {key!r}", header_line[key], 1)

    big_m = None
    if "big_m" in header:
        if len(header["big_m"]) != 1:
            raise ParseError("big_m takes one value", header_line["big_m"])
        big_m = _number(header["big_m"][0], "big_m")
    drop = False
    if "drop_big_m" in header:
        flag = [t.text.lower() for t in header["drop_big_m"]]
        if flag not in (["true"], ["false"]):
            raise ParseError("drop_big_m must be true or false", header_line["drop_big_m"])
        drop = flag == ["true"]
        if drop and big_m is None:
            raise ParseError("drop_big_m requires big_m", header_line["drop_big_m"])

    def rates(key, layer):
        if key not in header:
            raise ParseError(f"missing {key!r} header")
        toks = header[key]
        if len(toks) != len(members[layer]):
            raise DimensionMismatch(
                f"line {header_line[key]}: {key} has {len(toks)} values, "
                f"layer {layer!r} has {len(members[layer])} nodes"
            )
        out = {}
        for label, tok in zip(members[layer], toks):
            v = _number(tok, key)
            if not v > 0:
                raise ParseError(f"{key} must be positive", tok.line, tok.col)
            out[label] = v
        return out

    supplies = rates("supply", layer_names[0])
    demands = rates("demand", layer_names[-1])

    by_pair = {}
    for a, b, rows in blocks:
        pair = (a.text, b.text)
        if pair in by_pair:
            raise ParseError(f"duplicate matrix block {a.text} {b.text}", a.line, a.col)
        by_pair[pair] = (a, rows)

    nodes = [label for name in layer_names for label in members[name]]
    edges = []
    for upper, lower in zip(layer_names, layer_names[1:]):
        if (upper, lower) not in by_pair:
            raise ParseError(f"missing 'matrix {upper} {lower}' block")
        anchor, rows = by_pair.pop((upper, lower))
        row_labels = [r[0].text for r in rows]
        if row_labels != members[upper]:
            raise DimensionMismatch(
                f"line {anchor.line}: matrix {upper} {lower} rows {row_labels} "
                f"do not match layer {upper!r} nodes {members[upper]}"
            )
        for label_tok, values in rows:
            if len(values) != len(members[lower]):
                raise DimensionMismatch(
                    f"line {label_tok.line}: row {label_tok.text} has {len(values)} entries, "
                    f"layer {lower!r} has {len(members[lower])} nodes"
                )
            for col_label, tok in zip(members[lower], values):
                cost = _number(tok, "cost")
                if drop and cost == big_m:
                    continue
                edges.append((label_tok.text, col_label, cost))
    if by_pair:
        (a, b), (anchor, _) = next(iter(by_pair.items()))
        raise ParseError(f"matrix {a} {b} is not between consecutive layers", anchor.line, anchor.col)
    return _build(nodes, edges, supplies, demands)


# -- edge list -------------------------------------------------------------


def parse_edge_list(text: str) -> FlowProblem:
    _check_ascii(text)
    nodes: list[str] = []
    declared: set[str] = set()
    supplies: dict[str, float] = {}
    demands: dict[str, float] = {}
    edges = []
    pairs = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        words = _tokens(_strip_comment(raw), lineno)
        if not words:
            continue
        kind = words[0].text
        if kind == "node":
            if len(words) not in (2, 4):
                raise ParseError("expected 'node <label> [supply|demand <rate>]'", lineno, words[0].col)
            label = words[1].text
            if label in declared:
                raise ParseError(f"duplicate node {label!r}", lineno, words[1].col)
            declared.add(label)
            nodes.append(label)
            if len(words) == 4:
                role = words[2].text
                value = _number(words[3], role)
                if role not in ("supply", "demand"):
                    raise ParseError(f"expected supply or demand, got {role!r}", lineno, words[2].col)
                if not value > 0:
                    raise ParseError(f"{role} must be positive", lineno, words[3].col)
                (supplies if role == "supply" else demands)[label] = value
        elif kind == "edge":
            if len(words) != 4:
                raise ParseError("expected 'edge <from> <to> <cost>'", lineno, words[0].col)
            tail, head = words[1].text, words[2].text
            for tok in words[1:3]:
                if tok.text not in declared:
                    raise ParseError(f"undeclared node {tok.text!r}", lineno, tok.col)
            if (tail, head) in pairs:
                raise ParseError(f"duplicate edge {tail}->{head}", lineno, words[0].col)
            cost = _number(words[3], "cost")
            if tail == head:
                raise ParseError(f"self-loop on {tail!r}", lineno, words[1].col)
            if not cost > 0:
                raise ParseError("cost must be positive", lineno, words[3].col)
            pairs.add((tail, head))
            edges.append((tail, head, cost))
        else:
            raise ParseError(f"unknown directive {kind!r}", lineno, words[0].col)
    return _build(nodes, edges, supplies, demands)


def _num(x: float) -> str:
    """Shortest text that parses back to exactly ``x``."""
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def write_edge_list(problem: FlowProblem) -> str:
    lines = []
    for label in problem.network.nodes:
        if label in problem.supplies:
            lines.append(f"node {label} supply {_num(problem.supplies[label])}")
        elif label in problem.demands:
            lines.append(f"node {label} demand {_num(problem.demands[label])}")
        else:
            lines.append(f"node {label}")
    lines += [f"edge {e.tail} {e.head} {_num(e.cost)}" for e in problem.network.edges]
    return "\n".join(lines) + "\n"


# -- DIMACS ----------------------------------------------------------------


def parse_dimacs_mcf(text: str) -> FlowProblem:
    _check_ascii(text)
    n = m = None
    labels: dict[int, str] = {}
    flows: dict[int, float] = {}
    arcs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        words = _tokens(raw, lineno)
        if not words:
            continue
        kind = words[0].text
        if kind == "c":
            if len(words) == 4 and words[1].text == "label":
                tok = words[2]
                if not tok.text.isdigit():
                    raise ParseError("label id must be a positive integer", lineno, tok.col)
                labels[int(tok.text)] = words[3].text
            continue
        if kind == "p":
            if n is not None:
                raise ParseError("duplicate problem line", lineno, 1)
            if len(words) != 4 or words[1].text != "min":
                raise ParseError("expected 'p min <nodes> <arcs>'", lineno, 1)
            n, m = (_int(t) for t in words[2:4])
            continue
        if n is None:
            raise ParseError("descriptor before problem line", lineno, 1)
        if kind == "n":
            if len(words) != 3:
                raise ParseError("expected 'n <id> <flow>'", lineno, 1)
            node = _node_id(words[1], n)
            if node in flows:
                raise ParseError(f"duplicate node descriptor {node}", lineno, words[1].col)
            flows[node] = _number(words[2], "flow")
        elif kind == "a":
            if len(words) != 6:
                raise ParseError("expected 'a <from> <to> <low> <cap> <cost>'", lineno, 1)
            u, v = _node_id(words[1], n), _node_id(words[2], n)
            low, cap, cost = (_number(t) for t in words[3:6])
            if low != 0:
                raise NonZeroLowerBound(f"arc {u}->{v} has lower bound {low:g}", lineno, words[3].col)
            arcs.append((u, v, cap, cost, lineno, words))
        else:
            raise ParseError(f"unknown line type {kind!r}", lineno, 1)
    if n is None:
        raise ParseError("missing problem line")
    if len(arcs) != m:
        raise ParseError(f"problem line declares {m} arcs, found {len(arcs)}")

    supply_total = math.fsum(f for f in flows.values() if f > 0)
    for u, v, cap, _, lineno, words in arcs:
        if cap < supply_total * (1 - BALANCE_RTOL):
            raise UnsupportedCapacity(
                f"arc {u}->{v} capacity {cap:g} is below total supply {supply_total:g}",
                lineno,
                words[4].col,
            )

    names = [labels.get(i, str(i)) for i in range(1, n + 1)]
    supplies = {names[i - 1]: f for i, f in sorted(flows.items()) if f > 0}
    demands = {names[i - 1]: -f for i, f in sorted(flows.items()) if f < 0}
    edges = [(names[u - 1], names[v - 1], cost) for u, v, _, cost, _, _ in arcs]
    last = arcs[-1][4] if arcs else None
    return _build(names, edges, supplies, demands, last)


def _int(tok: _Tok) -> int:
    if not tok.text.isdigit():
        raise ParseError(f"expected non-negative integer, got {tok.text!r}", tok.line, tok.col)
    return int(tok.text)


def _node_id(tok: _Tok, n: int) -> int:
    value = _int(tok)
    if not 1 <= value <= n:
        raise ParseError(f"node id {value} out of range 1..{n}", tok.line, tok.col)
    return value


def write_dimacs(problem: FlowProblem) -> str:
    net = problem.network
    cap = _num(problem.total_supply)
    lines = [f"p min {net.n_nodes} {net.n_edges}"]
    lines += [f"c label {i} {label}" for i, label in enumerate(net.nodes, 1)]
    for i, label in enumerate(net.nodes, 1):
        if label in problem.supplies:
            lines.append(f"n {i} {_num(problem.supplies[label])}")
        elif label in problem.demands:
            lines.append(f"n {i} {_num(-problem.demands[label])}")
    for e in net.edges:
        lines.append(f"a {net.index[e.tail] + 1} {net.index[e.head] + 1} 0 {cap} {_num(e.cost)}")
    return "\n".join(lines) + "\n"


# -- dispatch --------------------------------------------------------------

PARSERS = {"layers": parse_layered, "edges": parse_edge_list, "dimacs": parse_dimacs_mcf}


def detect_format(path) -> str:
    suffix = Path(path).suffix.lower()
    try:
        return FORMAT_BY_SUFFIX[suffix]
    except KeyError:
        raise ParseError(f"cannot infer format from extension {suffix!r}; pass --format") from None


def load_problem(path, fmt: str | None = None) -> FlowProblem:
    fmt = fmt or detect_format(path)
    if fmt not in PARSERS:
        raise ValueError(f"unknown format {fmt!r}")
    text = Path(path).read_text(encoding="ascii", errors="strict")
    return PARSERS[fmt](text)


# -- output ----------------------------------------------------------------


def _g(x: float) -> str:
    return f"{float(x):.9g}"


def write_solution(solution: FlowSolution, network: Network | None = None) -> str:
    """Active edges in input order, then summary lines."""
    net = network or solution.network
    lines = ["from,to,flux,cost,contribution"]
    for k in solution.active_edges:
        e = net.edges[k]
        q = float(solution.flux[k])
        lines.append(f"{e.tail},{e.head},{_g(q)},{_g(e.cost)},{_g(q * e.cost)}")
    lines.append(f"total_cost,{_g(solution.total_cost)}")
    lines.append(f"converged,{str(solution.converged).lower()}")
    lines.append(f"iterations,{solution.iterations}")
    lines.append(f"dust_cost,{_g(solution.dust_cost)}")
    return "\n".join(lines) + "\n"


def write_trace(records: Iterable[TraceRecord], network: Network) -> str:
    header = ["iteration", "time"] + [f"D_{e.tail}-{e.head}" for e in network.edges]
    lines = [",".join(header)]
    for rec in records:
        lines.append(",".join([str(rec.iteration), _g(rec.time), *(_g(d) for d in rec.conductivities)]))
    return "\n".join(lines) + "\n"


def read_trace(text: str) -> tuple[list[str], list[list[float]]]:
    """Parse :func:`write_trace` output into (edge column names, numeric rows)."""
    lines = text.strip().splitlines()
    header = lines[0].split(",")
    rows = [[float(x) for x in line.split(",")] for line in lines[1:]]
    return header[2:], rows
