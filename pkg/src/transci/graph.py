"""Conditional directed mixed graphs (CDMGs) and graph surgeries.

A CDMG has input nodes ``J`` (never the head of an edge), output nodes ``V``,
directed edges with heads in ``V`` and bidirected edges between distinct
output nodes. Graphs are immutable; every surgery returns a new graph.
"""

from __future__ import annotations

import heapq
import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import networkx as nx

SOFT_PREFIX = "I:"

# Edge marks used by walks, read left to right along the walk.
RIGHT = "->"
LEFT = "<-"
BIDIR = "<->"
MARKS = (RIGHT, LEFT, BIDIR)


class GraphError(ValueError):
    """Invalid node, edge or graph argument."""


def _pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class Cdmg:
    inputs: frozenset[str]
    outputs: frozenset[str]
    directed: frozenset[tuple[str, str]] = frozenset()
    bidirected: frozenset[tuple[str, str]] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "inputs", frozenset(self.inputs))
        object.__setattr__(self, "outputs", frozenset(self.outputs))
        object.__setattr__(self, "directed", frozenset(tuple(e) for e in self.directed))
        object.__setattr__(
            self, "bidirected", frozenset(_pair(*e) for e in self.bidirected)
        )
        for v in self.inputs | self.outputs:
            if not isinstance(v, str) or not v:
                raise GraphError(f"node names must be nonempty strings, got {v!r}")
        if self.inputs & self.outputs:
            raise GraphError(f"nodes both input and output: {sorted(self.inputs & self.outputs)}")
        nodes = self.inputs | self.outputs
        for a, b in self.directed:
            if a not in nodes or b not in nodes:
                raise GraphError(f"directed edge {a}->{b} uses unknown node")
            if b not in self.outputs:
                raise GraphError(f"directed edge {a}->{b} points into input node {b}")
        for a, b in self.bidirected:
            if a == b:
                raise GraphError(f"bidirected self-loop at {a}")
            if a not in self.outputs or b not in self.outputs:
                raise GraphError(f"bidirected edge {a}<->{b} must join output nodes")

    @classmethod
    def build(
        cls,
        inputs: Iterable[str] = (),
        outputs: Iterable[str] = (),
        directed: Iterable[tuple[str, str]] = (),
        bidirected: Iterable[tuple[str, str]] = (),
    ) -> "Cdmg":
        return cls(frozenset(inputs), frozenset(outputs), frozenset(map(tuple, directed)),
                   frozenset(map(tuple, bidirected)))

    @property
    def nodes(self) -> frozenset[str]:
        return self.inputs | self.outputs

    @cached_property
    def _pa(self) -> dict[str, frozenset[str]]:
        pa: dict[str, set[str]] = {v: set() for v in self.nodes}
        for a, b in self.directed:
            pa[b].add(a)
        return {v: frozenset(s) for v, s in pa.items()}

    @cached_property
    def _ch(self) -> dict[str, frozenset[str]]:
        ch: dict[str, set[str]] = {v: set() for v in self.nodes}
        for a, b in self.directed:
            ch[a].add(b)
        return {v: frozenset(s) for v, s in ch.items()}

    @cached_property
    def _sib(self) -> dict[str, frozenset[str]]:
        sib: dict[str, set[str]] = {v: set() for v in self.nodes}
        for a, b in self.bidirected:
            sib[a].add(b)
            sib[b].add(a)
        return {v: frozenset(s) for v, s in sib.items()}

    @cached_property
    def _sc(self) -> dict[str, frozenset[str]]:
        dg = nx.DiGraph()
        dg.add_nodes_from(self.nodes)
        dg.add_edges_from(self.directed)
        sc: dict[str, frozenset[str]] = {}
        for comp in nx.strongly_connected_components(dg):
            fc = frozenset(comp)
            for v in fc:
                sc[v] = fc
        return sc

    @cached_property
    def _acyclified(self) -> "Cdmg":
        return _acyclify(self)

    def check_nodes(self, nodes: Iterable[str]) -> frozenset[str]:
        s = frozenset(nodes)
        unknown = s - self.nodes
        if unknown:
            raise GraphError(f"unknown node(s): {sorted(unknown)}")
        return s

    def adjacent(self, v: str) -> list[tuple[str, str]]:
        """Edges at ``v`` as ``(mark, other)`` with the mark read from ``v`` outward."""
        out = [(RIGHT, w) for w in self._ch[v]]
        out += [(LEFT, w) for w in self._pa[v]]
        out += [(BIDIR, w) for w in self._sib[v]]
        return sorted(out, key=lambda e: (e[1], e[0]))

    def has_edge(self, a: str, mark: str, b: str) -> bool:
        if mark == RIGHT:
            return (a, b) in self.directed
        if mark == LEFT:
            return (b, a) in self.directed
        if mark == BIDIR:
            return _pair(a, b) in self.bidirected
        raise GraphError(f"unknown edge mark {mark!r}")

    # serialization
    def to_dict(self) -> dict:
        return {
            "inputs": sorted(self.inputs),
            "outputs": sorted(self.outputs),
            "directed": [list(e) for e in sorted(self.directed)],
            "bidirected": [list(e) for e in sorted(self.bidirected)],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Cdmg":
        try:
            return cls.build(
                d.get("inputs", []),
                d.get("outputs", []),
                [tuple(e) for e in d.get("directed", [])],
                [tuple(e) for e in d.get("bidirected", [])],
            )
        except (TypeError, AttributeError) as exc:
            raise GraphError(f"malformed graph description: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class Walk:
    """A walk ``nodes[0] m0 nodes[1] m1 ...``; ``marks[i]`` orients the i-th edge."""

    nodes: tuple[str, ...]
    marks: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "marks", tuple(self.marks))
        if not self.nodes or len(self.marks) != len(self.nodes) - 1:
            raise GraphError("a walk needs n nodes and n-1 edge marks")
        if any(m not in MARKS for m in self.marks):
            raise GraphError(f"bad edge marks {self.marks}")

    def __str__(self) -> str:
        parts = [self.nodes[0]]
        for m, v in zip(self.marks, self.nodes[1:]):
            parts += [m, v]
        return " ".join(parts)

    def in_graph(self, g: Cdmg) -> bool:
        if any(v not in g.nodes for v in self.nodes):
            return False
        return all(
            g.has_edge(a, m, b) for a, m, b in zip(self.nodes, self.marks, self.nodes[1:])
        )


def parents(g: Cdmg, v: str) -> frozenset[str]:
    g.check_nodes([v])
    return g._pa[v]


def children(g: Cdmg, v: str) -> frozenset[str]:
    g.check_nodes([v])
    return g._ch[v]


def _closure(start: frozenset[str], step: Mapping[str, frozenset[str]]) -> frozenset[str]:
    seen = set(start)
    todo = list(start)
    while todo:
        for u in step[todo.pop()]:
            if u not in seen:
                seen.add(u)
                todo.append(u)
    return frozenset(seen)


def ancestors(g: Cdmg, a: Iterable[str]) -> frozenset[str]:
    return _closure(g.check_nodes(a), g._pa)


def descendants(g: Cdmg, a: Iterable[str]) -> frozenset[str]:
    return _closure(g.check_nodes(a), g._ch)


def strongly_connected(g: Cdmg, v: str) -> frozenset[str]:
    g.check_nodes([v])
    return g._sc[v]


def is_acyclic(g: Cdmg) -> bool:
    return all(len(g._sc[v]) == 1 and v not in g._pa[v] for v in g.nodes)


def topological_order(g: Cdmg) -> list[str] | None:
    """Inputs first, then Kahn's algorithm with lexicographic tie-break; None if cyclic."""
    if not is_acyclic(g):
        return None
    order = sorted(g.inputs)
    indeg = {v: len(g._pa[v] - g.inputs) for v in g.outputs}
    heap = [v for v, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for w in g._ch[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(heap, w)
    return order


def hard_intervene(g: Cdmg, w: Iterable[str]) -> Cdmg:
    w = g.check_nodes(w)
    return Cdmg(
        g.inputs | w,
        g.outputs - w,
        frozenset(e for e in g.directed if e[1] not in w),
        frozenset(e for e in g.bidirected if e[0] not in w and e[1] not in w),
    )


def soft_name(v: str) -> str:
    return SOFT_PREFIX + v


def soft_extend(g: Cdmg, w: Iterable[str]) -> Cdmg:
    w = g.check_nodes(w)
    fresh = {soft_name(v) for v in w}
    clash = fresh & g.nodes
    if clash:
        raise GraphError(f"soft intervention node(s) already present: {sorted(clash)}")
    return Cdmg(
        g.inputs | fresh,
        g.outputs,
        g.directed | {(soft_name(v), v) for v in w - g.inputs},
        g.bidirected,
    )


def marginalize_graph(g: Cdmg, w: Iterable[str]) -> Cdmg:
    """Latent projection onto ``J ∪ (V \\ W)``."""
    w = g.check_nodes(w)
    if w & g.inputs:
        raise GraphError(f"cannot marginalize input node(s) {sorted(w & g.inputs)}")
    keep = g.nodes - w
    directed: set[tuple[str, str]] = set()
    bidirected: set[tuple[str, str]] = set()
    for a in keep:
        # directed walks a -> w1 -> ... -> b with interior nodes in W
        seen: set[str] = set()
        todo = [a]
        while todo:
            x = todo.pop()
            for y in g._ch[x]:
                if y in w:
                    if y not in seen:
                        seen.add(y)
                        todo.append(y)
                else:
                    directed.add((a, y))
        if a in g.inputs:
            continue
        # treks a <-* ... *-> b with interior in W, none of them a collider;
        # phase "up": arrived at x with a tail at x; "down": arrived with an arrowhead
        start: list[tuple[str, str]] = []
        for y in g._sib[a]:
            if y in w:
                start.append((y, "down"))
            else:
                bidirected.add(_pair(a, y))
        start += [(y, "up") for y in g._pa[a] if y in w]
        seen2 = set(start)
        todo2 = list(start)
        while todo2:
            x, phase = todo2.pop()
            nxt: list[tuple[str, str, bool]] = [(y, "down", True) for y in g._ch[x]]
            if phase == "up":
                nxt += [(y, "up", False) for y in g._pa[x]]
                nxt += [(y, "down", True) for y in g._sib[x]]
            for y, ph, head_at_y in nxt:
                if y in w:
                    if (y, ph) not in seen2:
                        seen2.add((y, ph))
                        todo2.append((y, ph))
                elif head_at_y and y != a:
                    bidirected.add(_pair(a, y))
    return Cdmg(g.inputs, g.outputs - w, frozenset(directed), frozenset(bidirected))


def acyclify(g: Cdmg) -> Cdmg:
    return g._acyclified


def _acyclify(g: Cdmg) -> Cdmg:
    sc = g._sc
    directed = set()
    for v, wt in g.directed:
        for w in sc[wt]:
            if v not in sc[w]:
                directed.add((v, w))
    bidirected = set()
    for v in g.outputs:
        for w in sc[v]:
            if w != v:
                bidirected.add(_pair(v, w))
    for a, b in g.bidirected:
        for v in sc[a]:
            for w in sc[b]:
                if v != w:
                    bidirected.add(_pair(v, w))
    return Cdmg(g.inputs, g.outputs, frozenset(directed), frozenset(bidirected))


def load_graph(path: str) -> Cdmg:
    with open(path) as fh:
        return Cdmg.from_dict(json.load(fh))
