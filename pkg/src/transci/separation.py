"""σ-blocking of walks and the asymmetric σ-separation relation.

``A ⊥σ B | C`` holds when every walk from ``A`` to a node of ``J ∪ B`` is
σ-blocked by ``C``. The canonical route acyclifies the graph and runs an
m-separation reachability search; :func:`sigma_separated_oracle` searches walk
states on the original (possibly cyclic) graph instead.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .graph import BIDIR, LEFT, RIGHT, Cdmg, GraphError, Walk, acyclify, is_acyclic


class SepQuery(NamedTuple):
    a: frozenset[str]
    b: frozenset[str]
    c: frozenset[str]

    @classmethod
    def of(cls, a: Iterable[str], b: Iterable[str], c: Iterable[str] = ()) -> "SepQuery":
        return cls(frozenset(a), frozenset(b), frozenset(c))


@dataclass(frozen=True)
class SepVerdict:
    separated: bool
    witness_walk: Walk | None = None

    def __bool__(self) -> bool:
        return self.separated


def _head_at_self(mark: str) -> bool:
    # mark read from the current node outward; LEFT means the other node points at us
    return mark in (LEFT, BIDIR)


def _head_at_other(mark: str) -> bool:
    return mark in (RIGHT, BIDIR)


def walk_blocked(g: Cdmg, walk: Walk, c: Iterable[str]) -> bool:
    c = g.check_nodes(c)
    if not walk.in_graph(g):
        raise GraphError(f"walk {walk} is not a walk of the graph")
    ns, ms = walk.nodes, walk.marks
    if ns[0] in c or ns[-1] in c:
        return True
    for k in range(1, len(ns) - 1):
        v = ns[k]
        left, right = ms[k - 1], ms[k]
        head_left = left in (RIGHT, BIDIR)
        head_right = right in (LEFT, BIDIR)
        if head_left and head_right:
            if v not in c:
                return True
            continue
        if v not in c:
            continue
        sc = g._sc[v]
        if left == LEFT and ns[k - 1] not in sc:
            return True
        if right == RIGHT and ns[k + 1] not in sc:
            return True
    return False


def _reach(g: Cdmg, a: frozenset[str], targets: frozenset[str] | None, c: frozenset[str],
           use_sc: bool, want_walk: bool):
    """Breadth-first search over walk states.

    A state is ``(node, head_into_node, tail_leaves_scc)`` where the last flag
    records that the edge we arrived by has its tail at ``node`` and its other
    end outside ``Sc(node)``. Returns ``None`` when no open walk exists, else the
    walk (or ``True`` when ``want_walk`` is false). With ``targets=None`` the
    set of all nodes outside ``C`` ending an open walk is returned instead.
    """
    sc = g._sc
    start = [(v, False, False) for v in sorted(a) if v not in c]
    parent: dict[tuple, tuple | None] = {s: None for s in start}
    queue = deque(start)
    while queue:
        state = queue.popleft()
        v, head_in, tail_out = state
        if targets is not None and v in targets:
            if not want_walk:
                return True
            nodes, marks = [v], []
            cur = state
            while parent[cur] is not None:
                prev, mark = parent[cur]
                nodes.append(prev[0])
                marks.append(mark)
                cur = prev
            nodes.reverse()
            marks.reverse()
            return Walk(tuple(nodes), tuple(marks))
        is_start = parent[state] is None
        for mark, u in g.adjacent(v):
            if not is_start:
                if head_in and _head_at_self(mark):
                    if v not in c:
                        continue
                elif v in c:
                    if not use_sc or tail_out or (mark == RIGHT and u not in sc[v]):
                        continue
            nxt = (u, _head_at_other(mark), use_sc and mark == LEFT and v not in sc[u])
            if nxt not in parent:
                parent[nxt] = (state, mark)
                queue.append(nxt)
    if targets is None:
        return frozenset(s[0] for s in parent) - c
    return None


def _targets(g: Cdmg, b: frozenset[str], raw: bool) -> frozenset[str]:
    return b if raw else b | g.inputs


def _query(g: Cdmg, a, b, c) -> tuple[frozenset[str], frozenset[str], frozenset[str]]:
    if isinstance(a, SepQuery) and b is None and c is None:
        a, b, c = a
    return g.check_nodes(a), g.check_nodes(b or ()), g.check_nodes(c or ())


def _m_separated(g: Cdmg, a, b, c, raw: bool) -> bool:
    return _reach(g, a, _targets(g, b, raw) - c, c, use_sc=False, want_walk=False) is None


def sigma_separated(g: Cdmg, a, b=None, c=None, *, raw: bool = False,
                    witness: bool = True) -> SepVerdict:
    """Decide ``A ⊥σ B | C`` (with ``J`` added to ``B`` unless ``raw``).

    When not separated, the verdict carries a shortest open walk on ``g``
    unless ``witness=False``.
    """
    a, b, c = _query(g, a, b, c)
    if _m_separated(acyclify(g), a, b, c, raw):
        return SepVerdict(True)
    if not witness:
        return SepVerdict(False)
    walk = _reach(g, a, _targets(g, b, raw) - c, c, use_sc=True, want_walk=True)
    if walk is None:  # pragma: no cover - would contradict the acyclification theorem
        raise AssertionError("acyclified search found an open walk the walk search cannot")
    return SepVerdict(False, walk)


def sigma_separated_oracle(g: Cdmg, a, b=None, c=None, *, raw: bool = False) -> bool:
    a, b, c = _query(g, a, b, c)
    return _reach(g, a, _targets(g, b, raw) - c, c, use_sc=True, want_walk=False) is None


def open_reach(g: Cdmg, a: Iterable[str], c: Iterable[str] = (), *,
               acyclified: bool = False) -> frozenset[str]:
    """Nodes outside ``C`` that end a σ-open walk starting in ``A`` (searched on ``acyclify(g)``).

    ``A ⊥σ B | C`` holds iff this set misses ``(J ∪ B) \\ C``. Pass
    ``acyclified=True`` when ``g`` already is an acyclification.
    """
    a, c = g.check_nodes(a), g.check_nodes(c)
    return _reach(g if acyclified else acyclify(g), a, None, c, use_sc=False, want_walk=False)


def d_separated(g: Cdmg, a, b=None, c=None, *, raw: bool = False) -> bool:
    """Classic m-separation with target ``J ∪ B``; acyclic graphs only."""
    if not is_acyclic(g):
        raise GraphError("d_separated requires an acyclic graph")
    a, b, c = _query(g, a, b, c)
    return _m_separated(g, a, b, c, raw)


# separoid bridge

def _sigma_extra_rules():
    from .separoid import Rule

    def r(name, arity, premise, conclusion):
        return Rule(name, arity, premise, conclusion)

    return (
        r("left composition", 4,
          lambda S, a, b, c, d: S.rel(a, b, c) and S.rel(d, b, c),
          lambda S, a, b, c, d: S.rel(a | d, b, c)),
        r("right composition", 4,
          lambda S, a, b, c, d: S.rel(a, b, c) and S.rel(a, d, c),
          lambda S, a, b, c, d: S.rel(a, b | d, c)),
        r("left intersection", 4,
          lambda S, a, b, c, d: not (a & d) and S.rel(a, b, d | c) and S.rel(d, b, a | c),
          lambda S, a, b, c, d: S.rel(a | d, b, c)),
        r("right intersection", 4,
          lambda S, a, b, c, d: not (b & d) and S.rel(a, b, d | c) and S.rel(a, d, b | c),
          lambda S, a, b, c, d: S.rel(a, b | d, c)),
        r("more redundancies", 3,
          lambda S, a, b, c: True,
          lambda S, a, b, c: (S.rel(a, b, c) == S.rel(a - c, b - c, c)
                              == S.rel(a | c, S.tau | b | c, c))),
    )


def sigma_separoid_instance(g: Cdmg, *, p_member: float = 0.3, raw: bool = False):
    """Subsets of ``J ∪ V`` with union, inclusion and σ-separation (τ = J, κ = ∅)."""
    import itertools
    import random

    from .separoid import SeparoidInstance

    nodes = sorted(g.nodes)
    acy = acyclify(g)
    carrier = [frozenset(s) for k in range(len(nodes) + 1)
               for s in itertools.combinations(nodes, k)]

    def relation(a, b, c):
        return _m_separated(acy, a, b, c, raw)

    def sampler(rng: random.Random):
        return frozenset(v for v in nodes if rng.random() < p_member)

    return SeparoidInstance(
        carrier=carrier,
        join=frozenset.union,
        leq=frozenset.issubset,
        relation=relation,
        bottom=frozenset(),
        tau=frozenset() if raw else frozenset(g.inputs),
        kappa=frozenset(),
        name="sigma",
        equiv=lambda x, y: x == y,
        sampler=sampler,
        extra_rules=_sigma_extra_rules(),
    )
