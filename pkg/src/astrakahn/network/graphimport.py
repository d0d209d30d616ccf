"""Wiring expressions for arbitrary labelled digraphs.

Feedback edges are found with the greedy Eades-Lin-Smyth ordering (an
approximation; the minimum set is NP-hard). The remaining DAG is staged by
the longest path from a graph input, stages are composed serially, and the
broken edges are closed by a final wrap-around.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from graphlib import TopologicalSorter

from ..errors import ElaborationError


@dataclass
class Graph:
    edges: list = field(default_factory=list)  # (name, from, to)
    inputs: list = field(default_factory=list)  # (name, to)
    outputs: list = field(default_factory=list)  # (name, from)

    def vertices(self):
        seen = []
        for _, a, b in self.edges:
            for v in (a, b):
                if v not in seen:
                    seen.append(v)
        for _, v in self.inputs + self.outputs:
            if v not in seen:
                seen.append(v)
        return seen

    def triples(self):
        """Every channel as (name, producer or None, consumer or None)."""
        out = {(n, a, b) for n, a, b in self.edges}
        out |= {(n, None, b) for n, b in self.inputs}
        out |= {(n, a, None) for n, a in self.outputs}
        return out


def parse_graph(text: str) -> Graph:
    """Lines `edge <name> <from> <to>`, `input <name> <to>`, `output <name> <from>`."""
    g = Graph()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        kind, args = line[0], line[1:]
        if kind == "edge" and len(args) == 3:
            g.edges.append(tuple(args))
        elif kind == "input" and len(args) == 2:
            g.inputs.append(tuple(args))
        elif kind == "output" and len(args) == 2:
            g.outputs.append(tuple(args))
        else:
            raise ElaborationError(f"graph line {lineno}: expected 'edge n a b', 'input n v' or 'output n v'")
    return g


def _check(g: Graph):
    names = [n for n, *_ in g.edges] + [n for n, _ in g.inputs] + [n for n, _ in g.outputs]
    dups = sorted({n for n in names if names.count(n) > 1})
    if dups:
        raise ElaborationError(f"graph channel names must be distinct: {', '.join(dups)}")
    vs = g.vertices()
    if not vs:
        raise ElaborationError("the graph has no vertices")
    adj = {v: set() for v in vs}
    for _, a, b in g.edges:
        adj[a].add(b)
        adj[b].add(a)
    seen, todo = {vs[0]}, [vs[0]]
    while todo:
        for w in adj[todo.pop()]:
            if w not in seen:
                seen.add(w)
                todo.append(w)
    if len(seen) != len(vs):
        raise ElaborationError("the graph is not connected: " + ", ".join(v for v in vs if v not in seen) + " unreachable")


def feedback_edges(g: Graph) -> list:
    """Edges that go backwards in the greedy Eades-Lin-Smyth vertex order."""
    vs = g.vertices()
    succ = {v: [] for v in vs}
    pred = {v: [] for v in vs}
    for n, a, b in g.edges:
        if a != b:
            succ[a].append(b)
            pred[b].append(a)
    alive = list(vs)
    left, right = [], []

    def deg(v, table):
        return sum(1 for w in table[v] if w in alive)

    while alive:
        changed = True
        while changed:
            changed = False
            for v in list(alive):
                if deg(v, succ) == 0:
                    alive.remove(v)
                    right.insert(0, v)
                    changed = True
            for v in list(alive):
                if deg(v, pred) == 0:
                    alive.remove(v)
                    left.append(v)
                    changed = True
        if alive:
            v = max(alive, key=lambda u: deg(u, succ) - deg(u, pred))
            alive.remove(v)
            left.append(v)
    pos = {v: i for i, v in enumerate(left + right)}
    return [e for e in g.edges if pos[e[1]] >= pos[e[2]]]


def stages(g: Graph, broken=None):
    """Vertices grouped by the longest path length from a graph input."""
    broken = set(broken if broken is not None else (e[0] for e in feedback_edges(g)))
    vs = g.vertices()
    preds = {v: [] for v in vs}
    for n, a, b in g.edges:
        if n not in broken:
            preds[b].append(a)
    gamma = {}
    for v in TopologicalSorter({v: preds[v] for v in vs}).static_order():
        gamma[v] = max((gamma[p] + 1 for p in preds[v]), default=0)
    out = []
    for v in vs:
        k = gamma[v]
        while len(out) <= k:
            out.append([])
        out[k].append(v)
    return out


def _vertex_term(g: Graph, v):
    ins = [n for n, _, b in g.edges if b == v] + [n for n, b in g.inputs if b == v]
    order = {n: i for i, n in enumerate([e[0] for e in g.edges] + [n for n, _ in g.inputs])}
    ins.sort(key=order.get)
    outs = [n for n, a, _ in g.edges if a == v] + [n for n, a in g.outputs if a == v]
    order = {n: i for i, n in enumerate([e[0] for e in g.edges] + [n for n, _ in g.outputs])}
    outs.sort(key=order.get)
    return f"<{', '.join(ins)} | {v} | {', '.join(outs)}>"


def graph_import(g: Graph) -> str:
    """Wiring expression whose elaboration has exactly the edges of g.

    Channels are renamed positionally, so each vertex's declaration must list
    its inputs and outputs in the order they first appear in the graph.
    """
    _check(g)
    parts = []
    for stage in stages(g):
        terms = [_vertex_term(g, v) for v in stage]
        parts.append(terms[0] if len(terms) == 1 else "(" + " || ".join(terms) + ")")
    body = parts[0] if len(parts) == 1 else " .. ".join(parts)
    return f"({body})\\"


def network_triples(n) -> set:
    """The elaborated counterpart of Graph.triples, keyed by vertex labels."""
    out = set()
    for a, b in n.wires:
        out.add((n.names[a], n.vertices[b.vid].label, n.vertices[a.vid].label))
    for c in n.inputs:
        out.add((n.names[c], None, n.vertices[c.vid].label))
    for c in n.outputs:
        out.add((n.names[c], n.vertices[c.vid].label, None))
    return out
