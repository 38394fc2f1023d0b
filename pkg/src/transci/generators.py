"""Seeded random instances used by the fuzzers, the acceptance run and the scripts."""

from __future__ import annotations

import random
from fractions import Fraction
from itertools import combinations

from .graph import Cdmg, topological_order
from .kernel import FiniteVar, Kernel, Space, random_kernel


def random_cdmg(rng: random.Random, max_nodes: int = 6, *, p_edge: float = 0.3,
                p_bidir: float = 0.15, max_inputs: int = 2, acyclic: bool = False,
                min_nodes: int = 1) -> Cdmg:
    """A random CDMG; cycles, self-loops and bidirected edges allowed unless ``acyclic``."""
    n = rng.randint(min_nodes, max_nodes)
    names = [f"v{i}" for i in range(1, n + 1)]
    k = rng.randint(0, min(max_inputs, n))
    inputs = set(rng.sample(names, k))
    outputs = [v for v in names if v not in inputs]
    rank = {v: i for i, v in enumerate(names)}
    directed = set()
    for a in names:
        for b in outputs:
            if a == b and (acyclic or rng.random() > p_edge / 4):
                continue
            if acyclic and rank[a] >= rank[b]:
                continue
            if rng.random() < p_edge:
                directed.add((a, b))
    bidirected = set()
    if not acyclic:
        for a, b in combinations(outputs, 2):
            if rng.random() < p_bidir:
                bidirected.add((a, b))
    return Cdmg(frozenset(inputs), frozenset(outputs), frozenset(directed), frozenset(bidirected))


def random_cyclic_cdmg(rng: random.Random, max_nodes: int = 7) -> Cdmg:
    """A random CDMG that is guaranteed to contain a directed cycle."""
    while True:
        g = random_cdmg(rng, max_nodes, p_edge=0.35, min_nodes=2)
        if topological_order(g) is None:
            return g


def random_subset(rng: random.Random, items, p: float = 0.4) -> frozenset:
    return frozenset(x for x in sorted(items) if rng.random() < p)


def random_space(rng: random.Random, names, max_outcomes: int = 3, min_outcomes: int = 1) -> Space:
    return Space(FiniteVar(n, tuple(str(i) for i in range(rng.randint(min_outcomes, max_outcomes))))
                 for n in names)


def random_joint(rng: random.Random, n_target: int = 3, n_source: int = 1,
                 max_outcomes: int = 3, zero_prob: float = 0.3) -> Kernel:
    tgt = random_space(rng, [f"x{i}" for i in range(n_target)], max_outcomes)
    src = random_space(rng, [f"t{i}" for i in range(n_source)], max_outcomes)
    return random_kernel(src, tgt, rng, zero_prob=zero_prob)


def random_distribution(rng: random.Random, n: int, max_den: int = 12,
                        zero_prob: float = 0.0) -> list[Fraction]:
    w = [0 if rng.random() < zero_prob else rng.randint(1, max_den) for _ in range(n)]
    if not any(w):
        w[rng.randrange(n)] = 1
    s = sum(w)
    return [Fraction(x, s) for x in w]


def random_trans_space(rng: random.Random, max_w: int = 8, max_t: int = 4,
                       zero_prob: float = 0.3):
    """A random ``K(W|T)`` with a single ``W`` and a single ``T`` variable."""
    from .tci import TransSpace

    w = Space([FiniteVar("w", tuple(str(i) for i in range(rng.randint(1, max_w))))])
    t = Space([FiniteVar("t", tuple(str(i) for i in range(rng.randint(1, max_t))))])
    return TransSpace(random_kernel(t, w, rng, zero_prob=zero_prob))


def random_det_rv(rng: random.Random, ts, name: str, max_outcomes: int = 3,
                  others: list | None = None):
    """A random deterministic variable; sometimes reads only ``w``, only ``t``, or other variables."""
    from .kernel import TransRv

    k = rng.randint(1, max_outcomes)
    cod = Space([FiniteVar(name, tuple(str(i) for i in range(k)))])
    src = ts.source
    mode = rng.choice(["free", "w", "t", "const", "fn"] if others else ["free", "w", "t", "const"])
    wi, ti = src.names.index("w"), src.names.index("t")
    lookup: dict = {}
    base = others[rng.randrange(len(others))] if mode == "fn" else None
    table = {}
    for s in src.assignments:
        if mode == "free":
            key = s
        elif mode == "w":
            key = s[wi]
        elif mode == "t":
            key = s[ti]
        elif mode == "const":
            key = ()
        else:
            key = base.value(s)
        if key not in lookup:
            lookup[key] = str(rng.randrange(k))
        table[s] = (lookup[key],)
    return TransRv.from_map(src, cod, table, name)


def random_tci_instance(rng: random.Random, n_vars: int | None = None, **kw):
    """A random transition space with up to three deterministic generators."""
    ts = random_trans_space(rng, **kw)
    n = rng.randint(1, 3) if n_vars is None else n_vars
    gens: dict = {}
    for i in range(n):
        gens[f"x{i}"] = random_det_rv(rng, ts, f"x{i}", others=list(gens.values()))
    return ts, gens
