"""Causal Bayesian networks over finite spaces.

A :class:`Cbn` is an acyclic CDMG without bidirected edges over ``J ∪ V ∪ U``
(``U`` latent), a finite variable per node and a node kernel
``P(X_v | X_Pa(v))`` per output node. Variables are named after their nodes.
"""

from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .graph import (
    Cdmg,
    GraphError,
    Walk,
    acyclify,
    hard_intervene,
    marginalize_graph,
    soft_extend,
    soft_name,
    topological_order,
)
from .kernel import (
    ONE,
    ZERO,
    FiniteVar,
    Kernel,
    Space,
    disintegrate,
    is_null_set,
    kernels_agree_ae,
    marginalize,
    product,
    random_kernel,
)
from .separation import open_reach, sigma_separated
from .tci import CiVerdict, TransSpace, decide, tci_check

STAR = "⋆"


class CbnError(ValueError):
    """Invalid network, query or intervention."""


class GmpBudgetError(CbnError):
    """All-triples verification refused; ``partial`` holds a sampled report instead."""

    def __init__(self, msg: str, partial: "GmpReport"):
        super().__init__(msg)
        self.partial = partial


@dataclass(frozen=True)
class Cbn:
    graph: Cdmg
    spaces: Mapping[str, FiniteVar]
    kernels: Mapping[str, Kernel]
    latent: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "latent", frozenset(self.latent))
        object.__setattr__(self, "spaces", dict(sorted(self.spaces.items())))
        object.__setattr__(self, "kernels", dict(sorted(self.kernels.items())))
        g = self.graph
        if g.bidirected:
            raise CbnError("a CBN graph has no bidirected edges")
        if topological_order(g) is None:
            raise CbnError("a CBN graph must be acyclic")
        if not self.latent <= g.outputs:
            raise CbnError(f"latent nodes must be output nodes: {sorted(self.latent - g.outputs)}")
        if set(self.spaces) != set(g.nodes):
            raise CbnError("need exactly one variable per node")
        for v, var in self.spaces.items():
            if var.name != v:
                raise CbnError(f"variable for node {v} is named {var.name}")
        if set(self.kernels) != set(g.outputs):
            raise CbnError("need exactly one kernel per output node")
        for v, k in self.kernels.items():
            if k.source != self.space(g._pa[v]):
                raise CbnError(f"kernel of {v} must read exactly its parents {sorted(g._pa[v])}")
            if k.target != self.space([v]):
                raise CbnError(f"kernel of {v} must have target {v}")

    # structure
    @property
    def observed(self) -> frozenset[str]:
        return self.graph.outputs - self.latent

    @property
    def inputs(self) -> frozenset[str]:
        return self.graph.inputs

    def space(self, nodes: Iterable[str]) -> Space:
        return Space(self.spaces[v] for v in nodes)

    @property
    def marginal_graph(self) -> Cdmg:
        return marginalize_graph(self.graph, self.latent)

    # serialization
    def to_dict(self) -> dict:
        return {
            "graph": self.graph.to_dict(),
            "latent": sorted(self.latent),
            "spaces": {v: list(var.outcomes) for v, var in self.spaces.items()},
            "kernels": {v: k.to_dict() for v, k in self.kernels.items()},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Cbn":
        try:
            g = Cdmg.from_dict(d["graph"])
            spaces = {v: FiniteVar(v, tuple(o)) for v, o in d["spaces"].items()}
            kernels = {v: Kernel.from_dict(k) for v, k in d.get("kernels", {}).items()}
            latent = frozenset(d.get("latent", ()))
        except (KeyError, TypeError, AttributeError) as exc:
            raise CbnError(f"malformed CBN description: {exc}") from None
        return cls(g, spaces, kernels, latent)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)


def load_cbn(path: str) -> Cbn:
    with open(path) as fh:
        return Cbn.from_dict(json.load(fh))


def _check_subset(m: Cbn, nodes: Iterable[str], allowed: Iterable[str], what: str) -> frozenset[str]:
    nodes, allowed = frozenset(nodes), frozenset(allowed)
    bad = nodes - allowed
    if bad:
        raise CbnError(f"{what}: invalid node(s) {sorted(bad)}")
    return nodes


# kernels ----------------------------------------------------------------------

def topological_orders(m: Cbn, limit: int = 2) -> list[list[str]]:
    """Up to ``limit`` distinct topological orders of the output nodes."""
    g = m.graph
    out: list[list[str]] = []

    def rec(order: list[str], placed: set[str]) -> None:
        if len(out) >= limit:
            return
        if len(order) == len(g.outputs):
            out.append(list(order))
            return
        for v in sorted(g.outputs - placed):
            if g._pa[v] - g.inputs <= placed:
                placed.add(v)
                order.append(v)
                rec(order, placed)
                order.pop()
                placed.discard(v)

    rec([], set())
    return out


def joint_kernel(m: Cbn, order: Sequence[str] | None = None) -> Kernel:
    """``P(X_{V∪U} | do(X_J))``: the product of node kernels along a topological order."""
    if order is None:
        order = [v for v in topological_order(m.graph) if v in m.graph.outputs]
    if sorted(order) != sorted(m.graph.outputs):
        raise CbnError("order must list every output node once")
    k = Kernel(m.space(m.inputs), m.space(()), [[ONE]] * m.space(m.inputs).size, check=False)
    seen = set(m.inputs)
    for v in order:
        if not m.graph._pa[v] <= seen:
            raise CbnError(f"order is not topological at {v}")
        k = product(m.kernels[v], k)
        seen.add(v)
    return k


def observational_kernel(m: Cbn) -> Kernel:
    """``P(X_V | do(X_J))``: the joint kernel with the latent variables summed out."""
    return marginalize(joint_kernel(m), m.observed)


def hard_intervene_cbn(m: Cbn, w: Iterable[str]) -> Cbn:
    w = _check_subset(m, w, m.inputs | m.observed, "hard intervention")
    return Cbn(hard_intervene(m.graph, w), m.spaces,
               {v: k for v, k in m.kernels.items() if v not in w}, m.latent)


def soft_intervene_cbn(m: Cbn, w: Iterable[str]) -> Cbn:
    """Add an input ``I:w`` per node; ``⋆`` keeps the node's kernel, any other value forces it."""
    w = _check_subset(m, w, m.observed, "soft intervention")
    try:
        g = soft_extend(m.graph, w)
    except GraphError as exc:
        raise CbnError(str(exc)) from None
    spaces = dict(m.spaces)
    kernels = dict(m.kernels)
    for v in sorted(w):
        var = m.spaces[v]
        if STAR in var.outcomes:
            raise CbnError(f"outcome {STAR!r} already used by {v}")
        iv = FiniteVar(soft_name(v), var.outcomes + (STAR,))
        spaces[iv.name] = iv
        old = m.kernels[v]
        src = old.source.union(Space([iv]))
        pick_old = src.picker(old.source.names)
        pos = src.names.index(iv.name)
        rows = []
        for s in src.assignments:
            if s[pos] == STAR:
                rows.append(old.rows[old.source.index[pick_old(s)]])
            else:
                rows.append([ONE if (x,) == (s[pos],) else ZERO for x in var.outcomes])
        kernels[v] = Kernel(src, old.target, rows, check=False)
    return Cbn(g, spaces, kernels, m.latent)


def marginalize_cbn(m: Cbn, w: Iterable[str]) -> Cbn:
    """Reclassify ``w`` as latent; the joint kernel is unchanged."""
    w = _check_subset(m, w, m.observed, "marginalization")
    return Cbn(m.graph, m.spaces, m.kernels, m.latent | w)


def interventional_kernel(m: Cbn, d: Iterable[str] = ()) -> Kernel:
    """``P(X_{V∖D} | do(X_{J∪D}))``."""
    return observational_kernel(hard_intervene_cbn(m, d))


def _lift(q: Kernel, source: Space) -> Kernel:
    """View ``q`` as a kernel on the larger ``source`` that ignores the extra variables."""
    if q.source == source:
        return q
    if not set(q.source.names) <= set(source.names):
        raise CbnError("cannot lift a kernel to a source that lacks its inputs")
    pick = source.picker(q.source.names)
    return Kernel(source, q.target, [q.rows[q.source.index[pick(s)]] for s in source.assignments],
                  check=False)


def _version_ok(q: Kernel, k: Kernel, a: Iterable[str], cond: Iterable[str]) -> bool:
    """Is ``q`` a version of ``K(X_a | X_cond, T)``? Compared off the ``K(X_cond|T)``-null set."""
    a, cond = sorted(a), sorted(cond)
    joint = marginalize(k, a + cond)
    ref = disintegrate(joint, cond)
    base = marginalize(k, cond)
    diff = kernels_agree_ae(_lift(q, ref.source), ref, base)
    return is_null_set(base, diff)


def _witness(k: Kernel, a, b, c) -> CiVerdict:
    """``tci_check`` of ``X_a ⊥ X_b | X_c`` with the witness renamed back to node names."""
    ts = TransSpace(k)
    v = tci_check(ts, ts.proj(sorted(a)), ts.proj(sorted(b)), ts.proj(sorted(c)), verify=True)
    if v.witness is None:
        return v
    full = ts.source
    w = Kernel(full.sub(c), full.sub(a), v.witness.rows, check=False)
    return CiVerdict(True, w, None, v.approximate)


# global Markov property ---------------------------------------------------------

@dataclass
class GmpReport:
    checked: int = 0
    separated: int = 0
    violations: list[tuple[frozenset, frozenset, frozenset]] = field(default_factory=list)
    witnesses: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        show = lambda t: [sorted(s) for s in t]  # noqa: E731
        return {
            "passed": self.passed,
            "checked": self.checked,
            "separated": self.separated,
            "violations": [show(t) for t in self.violations],
        }


def _triples_all(nodes: Sequence[str]):
    for labels in itertools.product(range(4), repeat=len(nodes)):
        a = frozenset(v for v, l in zip(nodes, labels) if l == 1)
        if not a:
            continue
        yield (a, frozenset(v for v, l in zip(nodes, labels) if l == 2),
               frozenset(v for v, l in zip(nodes, labels) if l == 3))


def _triples_sampled(nodes: Sequence[str], n: int, seed: int):
    rng = random.Random(seed)
    for _ in range(n):
        labels = [rng.randrange(4) for _ in nodes]
        a = frozenset(v for v, l in zip(nodes, labels) if l == 1)
        if not a and nodes:
            a = frozenset([rng.choice(list(nodes))])
        yield (a, frozenset(v for v, l in zip(nodes, labels) if l == 2) - a,
               frozenset(v for v, l in zip(nodes, labels) if l == 3) - a)


class _MarginalCells:
    """Integer-mass cells of ``P(X_S | do(X_J))`` for each queried node set ``S``."""

    def __init__(self, obs: Kernel):
        self.obs = obs
        self._cache: dict[frozenset, tuple[tuple[str, ...], list]] = {}

    def get(self, s: frozenset) -> tuple[tuple[str, ...], list]:
        hit = self._cache.get(s)
        if hit is not None:
            return hit
        names = tuple(sorted(s))
        k = marginalize(self.obs, s & set(self.obs.target.names))
        tnames = k.target.names
        spos = [("t", k.source.names.index(n)) if n in k.source else ("w", tnames.index(n))
                for n in names]
        cells = []
        for ti, (t, row) in enumerate(zip(k.source.assignments, k.rows)):
            scale = math.lcm(*(p.denominator for p in row if p))
            for a, p in zip(k.target.assignments, row):
                if p:
                    vals = tuple(t[i] if side == "t" else a[i] for side, i in spos)
                    cells.append((ti, vals, p.numerator * (scale // p.denominator)))
        self._cache[s] = (names, cells)
        return names, cells


def gmp_verify(m: Cbn, scope: str | Sequence = "all", *, seed: int = 0, samples: int = 2000,
               max_nodes: int = 10, witnesses: bool = False) -> GmpReport:
    """Check ``A ⊥σ B | C ⇒ X_A ⊥ X_B | X_C`` under ``P(X_V | do(X_J))``.

    ``scope`` is ``"all"`` (every disjoint triple with nonempty ``A``),
    ``"sample"`` / ``"sample:N"`` (seeded random triples) or an explicit list
    of ``(A, B, C)``. Every separated triple gets an exactly verified witness
    kernel; ``witnesses=True`` keeps them in the report.
    """
    nodes = sorted(m.inputs | m.observed)
    if isinstance(scope, str):
        if scope == "all":
            if len(nodes) > max_nodes:
                partial = gmp_verify(m, f"sample:{samples}", seed=seed, witnesses=witnesses)
                raise GmpBudgetError(
                    f"all-triples mode is limited to {max_nodes} nodes, got {len(nodes)}", partial)
            triples = _triples_all(nodes)
        elif scope.startswith("sample"):
            n = int(scope.split(":", 1)[1]) if ":" in scope else samples
            triples = _triples_sampled(nodes, n, seed)
        else:
            raise CbnError(f"unknown scope {scope!r}")
    else:
        triples = [(frozenset(a), frozenset(b), frozenset(c)) for a, b, c in scope]
        for t in triples:
            for part in t:
                _check_subset(m, part, nodes, "gmp triple")
    g = m.marginal_graph
    acy = acyclify(g)
    obs = observational_kernel(m)
    cells = _MarginalCells(obs)
    reach: dict[tuple[str, frozenset], frozenset] = {}
    report = GmpReport()
    for a, b, c in triples:
        report.checked += 1
        targets = (b | g.inputs) - c
        open_ = False
        for v in sorted(a - c):
            r = reach.get((v, c))
            if r is None:
                r = reach[(v, c)] = open_reach(acy, [v], c, acyclified=True)
            if r & targets:
                open_ = True
                break
        if open_:
            continue
        report.separated += 1
        ok, witness = _gmp_tci(m, cells, a, b, c)
        if not ok:
            report.violations.append((a, b, c))
        elif witnesses:
            report.witnesses[(a, b, c)] = witness
    return report


def _gmp_tci(m: Cbn, cells: _MarginalCells, a, b, c) -> tuple[bool, Kernel | None]:
    """Decide TCI on cached cells and verify the witness against the marginal exactly."""
    names, cs = cells.get(a | b | c)
    ia = [names.index(v) for v in sorted(a)]
    ib = [names.index(v) for v in sorted(b)]
    ic = [names.index(v) for v in sorted(c)]
    rows = [(ti, tuple(s[i] for i in ib), tuple(s[i] for i in ic), tuple(s[i] for i in ia), w)
            for ti, s, w in cs]
    ok, cond, _ = decide(rows)
    if not ok:
        return False, None
    # witness Q(a|c) and an exact factorization check per (t, b, c)
    q = {}
    for z, vec in cond.items():
        tot = sum(v for _, v in vec)
        q[z] = {x: Fraction(v, tot) for x, v in vec}
    joint: dict = {}
    marg: dict = {}
    for ti, y, z, x, w in rows:
        joint[(ti, y, z, x)] = joint.get((ti, y, z, x), 0) + w
        marg[(ti, y, z)] = marg.get((ti, y, z), 0) + w
    for (ti, y, z), w in marg.items():
        xs = set(q[z]) | {x for (t2, y2, z2, x) in joint if (t2, y2, z2) == (ti, y, z)}
        for x in xs:
            if Fraction(joint.get((ti, y, z, x), 0), w) != q[z].get(x, ZERO):
                return False, None
    sa, sc = m.space(sorted(a)), m.space(sorted(c))
    uniform = [Fraction(1, sa.size)] * sa.size
    krows = []
    for z in sc.assignments:
        d = q.get(z)
        krows.append(uniform if d is None else [d.get(x, ZERO) for x in sa.assignments])
    return True, Kernel(sc, sa, krows, check=False)


# do-calculus ----------------------------------------------------------------------

@dataclass
class DoReport:
    rule: str
    applicable: bool
    open_walk: Walk | None = None
    kernel: Kernel | None = None
    checks: list[tuple[str, bool]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(v for _, v in self.checks)

    def to_dict(self) -> dict:
        d: dict = {"rule": self.rule, "applicable": self.applicable}
        if self.open_walk is not None:
            d["open_walk"] = str(self.open_walk)
        if self.kernel is not None:
            d["kernel"] = self.kernel.to_dict()
        if self.applicable:
            d["checks"] = [{"case": n, "ok": v} for n, v in self.checks]
            d["ok"] = self.ok
        return d


@dataclass(frozen=True)
class DoQuery:
    a: frozenset[str]
    b: frozenset[str]
    c: frozenset[str]
    d: frozenset[str]
    mode: str

    @classmethod
    def of(cls, a, b, c=(), d=(), mode="rule1") -> "DoQuery":
        return cls(frozenset(a), frozenset(b), frozenset(c), frozenset(d), str(mode))


def _disjoint(*sets: frozenset) -> bool:
    return sum(len(s) for s in sets) == len(frozenset().union(*sets))


def _subsets(s: frozenset):
    items = sorted(s)
    for k in range(len(items) + 1):
        for sub in itertools.combinations(items, k):
            yield frozenset(sub)


def _name(s) -> str:
    return "{" + ",".join(sorted(s)) + "}"


def do_calculus(m: Cbn, q: DoQuery) -> DoReport:
    a, b, c, d = q.a, q.b, q.c, q.d
    for part, what in ((a, "A"), (b, "B"), (c, "C")):
        _check_subset(m, part, m.observed, what)
    _check_subset(m, d, m.observed | m.inputs, "D")
    if not _disjoint(a, b, c, d):
        raise CbnError("invalid query: A, B, C, D must be pairwise disjoint")
    if not a:
        raise CbnError("invalid query: A must be nonempty")
    md = hard_intervene_cbn(m, d)
    if q.mode == "rule1":
        sep = sigma_separated(md.marginal_graph, a, b, c | d)
        if not sep:
            return DoReport(q.mode, False, sep.witness_walk)
        k = observational_kernel(md)
        verdict = _witness(k, a, b, c | d)
        rep = DoReport(q.mode, True, None, verdict.witness, [("tci", verdict.independent)])
        if verdict.independent:
            for bt in _subsets(b):
                rep.checks.append((f"B~={_name(bt)}", _version_ok(verdict.witness, k, a, bt | c)))
        return rep
    if q.mode in ("rule2", "rule3"):
        soft = soft_intervene_cbn(md, b)
        ib = frozenset(soft_name(v) for v in b)
        given = (b | c | d) if q.mode == "rule2" else (c | d)
        sep = sigma_separated(soft.marginal_graph, a, ib, given)
        if not sep:
            return DoReport(q.mode, False, sep.witness_walk)
        verdict = _witness(observational_kernel(soft), a, ib, given)
        rep = DoReport(q.mode, True, None, verdict.witness, [("tci", verdict.independent)])
        if verdict.independent:
            for b1 in _subsets(b):
                k1 = interventional_kernel(m, d | b1)
                cond = ((b - b1) | c) if q.mode == "rule2" else c
                label = f"do({_name(b1)})"
                rep.checks.append((label, _version_ok(verdict.witness, k1, a, cond)))
        return rep
    raise CbnError(f"unknown do-calculus mode {q.mode!r}")


@dataclass
class BackdoorReport:
    applicable: bool
    open_walk: Walk | None = None
    premise: str = ""
    adjusted: Kernel | None = None
    checks: list[tuple[str, bool]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(v for _, v in self.checks)

    def to_dict(self) -> dict:
        d: dict = {"applicable": self.applicable}
        if not self.applicable:
            d["failed_premise"] = self.premise
            if self.open_walk is not None:
                d["open_walk"] = str(self.open_walk)
            return d
        d["adjusted"] = self.adjusted.to_dict()
        d["checks"] = [{"case": n, "ok": v} for n, v in self.checks]
        d["ok"] = self.ok
        return d


def backdoor_adjust(m: Cbn, a, b, c, f, d) -> BackdoorReport:
    """Conditional backdoor adjustment ``P(X_A | X_C, do(X_B, X_D))`` through ``X_F``."""
    a, b, c, f, d = (frozenset(x) for x in (a, b, c, f, d))
    for part, what in ((a, "A"), (b, "B"), (c, "C"), (f, "F")):
        _check_subset(m, part, m.observed, what)
    _check_subset(m, d, m.observed | m.inputs, "D")
    if not _disjoint(a, b, c, f, d):
        raise CbnError("invalid query: A, B, C, F, D must be pairwise disjoint")
    if not m.inputs <= d:
        raise CbnError("invalid query: D must contain every input node")
    if not a:
        raise CbnError("invalid query: A must be nonempty")
    soft = soft_intervene_cbn(hard_intervene_cbn(m, d), b)
    ib = frozenset(soft_name(v) for v in b)
    g = soft.marginal_graph
    s1 = sigma_separated(g, f, ib, c | d)
    if not s1:
        return BackdoorReport(False, s1.witness_walk, "F ⊥ I_B | C ∪ D")
    s2 = sigma_separated(g, a, ib, b | f | c | d)
    if not s2:
        return BackdoorReport(False, s2.witness_walk, "A ⊥ I_B | B ∪ F ∪ C ∪ D")
    ks = observational_kernel(soft)
    va = _witness(ks, a, ib, b | f | c | d)
    vf = _witness(ks, f, ib, c | d)
    rep = BackdoorReport(True, checks=[("tci A", va.independent), ("tci F", vf.independent)])
    if not (va.independent and vf.independent):
        return rep
    qa, qf = va.witness, vf.witness
    adjusted = marginalize(product(qa, qf), qa.target.names)
    rep.adjusted = adjusted
    k_do = interventional_kernel(m, d | b)
    k_obs = interventional_kernel(m, d)
    rep.checks += [
        ("A | F,C,do(B,D)", _version_ok(qa, k_do, a, f | c)),
        ("A | F,C,B,do(D)", _version_ok(qa, k_obs, a, b | f | c)),
        ("F | C,do(B,D)", _version_ok(qf, k_do, f, c)),
        ("F | C,do(D)", _version_ok(qf, k_obs, f, c)),
        ("adjusted = A | C,do(B,D)", _version_ok(adjusted, k_do, a, c)),
    ]
    return rep


# random instances -------------------------------------------------------------------

def random_cbn(rng: random.Random, *, max_outputs: int = 5, max_latent: int = 2,
               max_inputs: int = 2, max_outcomes: int = 3, p_edge: float = 0.4,
               max_den: int = 12, zero_prob: float = 0.2) -> Cbn:
    """A random CBN with rational node kernels; latent nodes are named ``u1, u2, …``."""
    n_in = rng.randint(0, max_inputs)
    n_obs = rng.randint(1, max_outputs)
    n_lat = rng.randint(0, max_latent)
    inputs = [f"j{i}" for i in range(1, n_in + 1)]
    outs = [f"v{i}" for i in range(1, n_obs + 1)] + [f"u{i}" for i in range(1, n_lat + 1)]
    rng.shuffle(outs)
    directed = set()
    for i, v in enumerate(outs):
        for p in inputs + outs[:i]:
            if rng.random() < p_edge:
                directed.add((p, v))
    g = Cdmg(frozenset(inputs), frozenset(outs), frozenset(directed))
    spaces = {v: FiniteVar(v, tuple(str(x) for x in range(rng.randint(2 if v.startswith("u") else 1,
                                                                       max_outcomes))))
              for v in inputs + outs}
    space = lambda vs: Space(spaces[x] for x in vs)  # noqa: E731
    kernels = {v: random_kernel(space(g._pa[v]), space([v]), rng, max_den=max_den,
                                zero_prob=zero_prob) for v in outs}
    return Cbn(g, spaces, kernels, frozenset(v for v in outs if v.startswith("u")))
