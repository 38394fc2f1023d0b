"""A property-test harness for asymmetric (τ-κ) separoid rule systems.

An instance bundles a finite carrier, a join, a preorder ``≪``, a ternary
relation ``α ⊥ β | γ`` and three distinguished elements (bottom, τ, κ). The
harness instantiates every rule on exhaustive or sampled tuples and records
concrete violations that can be replayed.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field, replace
from functools import reduce
from typing import Callable, Hashable, Iterable, Sequence

Element = Hashable


class SeparoidError(ValueError):
    pass


@dataclass
class SeparoidInstance:
    carrier: Sequence[Element]
    join: Callable[[Element, Element], Element]
    leq: Callable[[Element, Element], bool]
    relation: Callable[[Element, Element, Element], bool]
    bottom: Element
    tau: Element
    kappa: Element
    name: str = "instance"
    equiv: Callable[[Element, Element], bool] | None = None
    sampler: Callable[[random.Random], Element] | None = None
    extra_rules: tuple["Rule", ...] = ()
    _cache: dict = field(default_factory=dict, repr=False)

    def rel(self, a: Element, b: Element, c: Element) -> bool:
        key = (a, b, c)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache[key] = bool(self.relation(a, b, c))
        return hit

    def j(self, *xs: Element) -> Element:
        return reduce(self.join, xs, self.bottom)

    def le(self, a: Element, b: Element) -> bool:
        return self.leq(a, b)

    def eq(self, a: Element, b: Element) -> bool:
        if self.equiv is not None:
            return self.equiv(a, b)
        return self.leq(a, b) and self.leq(b, a)

    def draw(self, rng: random.Random) -> Element:
        if self.sampler is not None:
            return self.sampler(rng)
        return rng.choice(list(self.carrier))


@dataclass(frozen=True)
class Rule:
    name: str
    arity: int
    premise: Callable[..., bool]
    conclusion: Callable[..., bool]
    applies: Callable[[SeparoidInstance], bool] = lambda inst: True


@dataclass
class RuleReport:
    rule: str
    tested: int = 0
    premises_held: int = 0
    failures: list[tuple] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {"rule": self.rule, "tested": self.tested, "premises_held": self.premises_held,
                "failures": [list(map(_show, f)) for f in self.failures]}


def _show(e: Element):
    if isinstance(e, frozenset):
        return sorted(map(str, e))
    return str(e)


def _r(name, arity, premise, conclusion, applies=lambda inst: True) -> Rule:
    return Rule(name, arity, premise, conclusion, applies)


# α, β, γ, λ are written a, b, c, d; the full exchange rule adds e (α') and f (β').
CORE_RULES: tuple[Rule, ...] = (
    _r("kappa-extended left redundancy", 3,
       lambda S, a, b, c: S.le(a, S.j(S.kappa, c)),
       lambda S, a, b, c: S.rel(a, b, c)),
    _r("tau-restricted right redundancy", 2,
       lambda S, a, c: True,
       lambda S, a, c: S.rel(a, S.bottom, S.j(c, S.tau))),
    _r("tau-inverted right decomposition", 3,
       lambda S, a, b, c: S.rel(a, b, c),
       lambda S, a, b, c: S.rel(a, S.j(S.tau, b), c)),
    _r("left decomposition", 4,
       lambda S, a, b, c, d: S.rel(S.j(a, d), b, c),
       lambda S, a, b, c, d: S.rel(d, b, c)),
    _r("right decomposition", 4,
       lambda S, a, b, c, d: S.rel(a, S.j(b, d), c),
       lambda S, a, b, c, d: S.rel(a, d, c)),
    _r("left weak union", 4,
       lambda S, a, b, c, d: S.rel(S.j(a, d), b, c),
       lambda S, a, b, c, d: S.rel(a, b, S.j(d, c))),
    _r("right weak union", 4,
       lambda S, a, b, c, d: S.rel(a, S.j(b, d), c),
       lambda S, a, b, c, d: S.rel(a, b, S.j(d, c))),
    _r("left contraction", 4,
       lambda S, a, b, c, d: S.rel(a, b, S.j(d, c)) and S.rel(d, b, c),
       lambda S, a, b, c, d: S.rel(S.j(a, d), b, c)),
    _r("right contraction", 4,
       lambda S, a, b, c, d: S.rel(a, b, S.j(d, c)) and S.rel(a, d, c),
       lambda S, a, b, c, d: S.rel(a, S.j(b, d), c)),
    _r("right cross contraction", 4,
       lambda S, a, b, c, d: S.rel(a, b, S.j(d, c)) and S.rel(d, a, c),
       lambda S, a, b, c, d: S.rel(a, S.j(b, d), c)),
    _r("flipped left cross contraction", 4,
       lambda S, a, b, c, d: S.rel(a, b, S.j(d, c)) and S.rel(b, d, c),
       lambda S, a, b, c, d: S.rel(b, S.j(a, d), c)),
)

DERIVED_RULES: tuple[Rule, ...] = (
    _r("kappa-extended inverted left decomposition", 4,
       lambda S, a, b, c, d: S.rel(a, b, c) and S.le(d, S.j(a, S.kappa, c)),
       lambda S, a, b, c, d: S.rel(S.j(a, d), b, c)),
    _r("tau-kappa-extended inverted right decomposition", 4,
       lambda S, a, b, c, d: S.rel(a, b, c) and S.le(d, S.j(S.tau, b, S.kappa, c)),
       lambda S, a, b, c, d: S.rel(a, S.j(S.tau, b, d), c)),
    _r("kappa-equivalent exchange", 4,
       lambda S, a, b, c, d: (S.rel(a, b, c) and S.le(c, S.j(S.kappa, d))
                              and S.le(d, S.j(S.kappa, c))),
       lambda S, a, b, c, d: S.rel(a, b, d)),
    _r("full kappa-equivalent exchange", 6,
       lambda S, a, b, c, d, e, f: (S.rel(a, b, c) and S.le(e, S.j(S.kappa, a))
                                    and S.le(f, S.j(S.kappa, b)) and S.le(c, S.j(S.kappa, d))
                                    and S.le(d, S.j(S.kappa, c))),
       lambda S, a, b, c, d, e, f: S.rel(e, f, d)),
    _r("restricted symmetry", 3,
       lambda S, a, b, c: S.rel(a, b, c) and S.rel(b, S.bottom, c),
       lambda S, a, b, c: S.rel(b, a, c)),
    _r("tau-restricted symmetry", 3,
       lambda S, a, b, c: S.rel(a, b, S.j(c, S.tau)),
       lambda S, a, b, c: S.rel(b, a, S.j(c, S.tau))),
    _r("symmetry", 3,
       lambda S, a, b, c: S.rel(a, b, c),
       lambda S, a, b, c: S.rel(b, a, c),
       applies=lambda S: S.eq(S.tau, S.bottom)),
)

ALL_RULES = CORE_RULES + DERIVED_RULES
MAX_ARITY = 6
DEFAULT_EXHAUSTIVE_LIMIT = 16 ** 4  # a carrier of four generators under join, quadruples


def rules_for(inst: SeparoidInstance) -> list[Rule]:
    return [r for r in ALL_RULES + tuple(inst.extra_rules) if r.applies(inst)]


def violates(inst: SeparoidInstance, rule: Rule, args: Sequence[Element]) -> bool:
    return rule.premise(inst, *args) and not rule.conclusion(inst, *args)


def replay(inst: SeparoidInstance, rule_name: str, args: Sequence[Element]) -> bool:
    """True iff ``args`` still violates ``rule_name`` on ``inst``."""
    for rule in ALL_RULES + tuple(inst.extra_rules):
        if rule.name == rule_name:
            return violates(inst, rule, args)
    raise SeparoidError(f"unknown rule {rule_name!r}")


def sample_tuples(inst: SeparoidInstance, samples: int, seed: int) -> list[tuple]:
    rng = random.Random(seed)
    return [tuple(inst.draw(rng) for _ in range(MAX_ARITY)) for _ in range(samples)]


def check_rules(inst: SeparoidInstance, samples: int = 500, seed: int = 0, *,
                exhaustive_limit: int = DEFAULT_EXHAUSTIVE_LIMIT,
                tuples: Iterable[tuple] | None = None,
                max_failures: int = 5) -> list[RuleReport]:
    """Evaluate every applicable rule; exhaustive when the tuple space is small enough."""
    pool = list(tuples) if tuples is not None else None
    reports = []
    carrier = list(inst.carrier)
    for rule in rules_for(inst):
        rep = RuleReport(rule.name)
        if pool is None and len(carrier) ** rule.arity <= exhaustive_limit:
            candidates: Iterable[tuple] = itertools.product(carrier, repeat=rule.arity)
        else:
            if pool is None:
                pool = sample_tuples(inst, samples, seed)
            candidates = (t[: rule.arity] for t in pool)
        for args in candidates:
            rep.tested += 1
            if rule.premise(inst, *args):
                rep.premises_held += 1
                if not rule.conclusion(inst, *args) and len(rep.failures) < max_failures:
                    rep.failures.append(tuple(args))
        reports.append(rep)
    return sorted(reports, key=lambda r: r.rule)


def merge_reports(batches: Iterable[list[RuleReport]]) -> list[RuleReport]:
    merged: dict[str, RuleReport] = {}
    for batch in batches:
        for rep in batch:
            m = merged.setdefault(rep.rule, RuleReport(rep.rule))
            m.tested += rep.tested
            m.premises_held += rep.premises_held
            m.failures.extend(rep.failures)
    return [merged[k] for k in sorted(merged)]


def derive_relation(inst: SeparoidInstance, tau2: Element, kappa2: Element) -> SeparoidInstance:
    """``α ⊥' β | γ  :⇔  α ⊥ τ₂∨β | κ₂∨γ`` with ``τ = τ₁∨τ₂`` and ``κ = κ₁∨κ₂``."""
    if not inst.leq(tau2, tau2):
        raise SeparoidError("tau2 must satisfy tau2 << tau2")
    base = inst

    def rel(a, b, c):
        return base.rel(a, base.join(tau2, b), base.join(kappa2, c))

    return replace(inst, relation=rel, tau=inst.join(inst.tau, tau2),
                   kappa=inst.join(inst.kappa, kappa2), name=f"{inst.name}+",
                   extra_rules=(), _cache={})


def symmetrize(inst: SeparoidInstance) -> SeparoidInstance:
    """OR of both orientations, order ``α ≪ κ∨β``, and ``τ = κ = bottom``."""
    base = inst

    def rel(a, b, c):
        return base.rel(a, b, c) or base.rel(b, a, c)

    def leq(a, b):
        return base.leq(a, base.join(base.kappa, b))

    return replace(inst, relation=rel, leq=leq, equiv=None, tau=inst.bottom,
                   kappa=inst.bottom, name=f"{inst.name}-sym", extra_rules=(), _cache={})


def always_false_instance(n: int = 2) -> SeparoidInstance:
    """A deliberately broken relation on subsets of ``n`` atoms (fails left redundancy)."""
    atoms = range(n)
    carrier = [frozenset(s) for k in range(n + 1) for s in itertools.combinations(atoms, k)]
    return SeparoidInstance(carrier, frozenset.union, frozenset.issubset,
                            lambda a, b, c: False, frozenset(), frozenset(), frozenset(),
                            name="always-false")


def coherence_spot_check(inst: SeparoidInstance, samples: int = 200, seed: int = 0) -> list[str]:
    """Spot-check the preorder/join compatibility conditions; returns violated condition names."""
    rng = random.Random(seed)
    bad = set()
    for _ in range(samples):
        a, b, c = inst.draw(rng), inst.draw(rng), inst.draw(rng)
        if not inst.leq(a, a):
            bad.add("reflexivity")
        if inst.leq(a, b) and inst.leq(b, c) and not inst.leq(a, c):
            bad.add("transitivity")
        if not inst.leq(inst.bottom, a):
            bad.add("bottom")
        if not (inst.leq(a, inst.join(a, b)) and inst.leq(b, inst.join(a, b))):
            bad.add("join upper bound")
        if inst.leq(a, c) and inst.leq(b, c) and not inst.leq(inst.join(a, b), c):
            bad.add("join least")
        if inst.leq(a, b) and not inst.leq(a, inst.join(c, b)):
            bad.add("order extension")
        if not inst.eq(inst.join(a, b), inst.join(b, a)):
            bad.add("join commutative")
        if not inst.eq(inst.join(inst.join(a, b), c), inst.join(a, inst.join(b, c))):
            bad.add("join associative")
    return sorted(bad)


def shrink(inst: SeparoidInstance, rule_name: str, args: Sequence[Element]) -> tuple:
    """Greedily replace arguments by earlier carrier elements while the violation persists."""
    carrier = list(inst.carrier)
    pos = {e: i for i, e in enumerate(carrier)}
    cur = list(args)
    changed = True
    while changed:
        changed = False
        for k in range(len(cur)):
            for cand in carrier[: pos.get(cur[k], len(carrier))]:
                trial = cur[:k] + [cand] + cur[k + 1:]
                if replay(inst, rule_name, trial):
                    cur = trial
                    changed = True
                    break
    return tuple(cur)


def table_instance(d: dict) -> SeparoidInstance:
    """An instance from explicit tables.

    ``d`` holds ``elements`` (names), ``join`` (matrix of element indices),
    ``leq`` (boolean matrix), ``relation`` (list of index triples that hold)
    and the indices ``bottom``, ``tau``, ``kappa``.
    """
    try:
        elements = [str(e) for e in d["elements"]]
        n = len(elements)
        join = [[int(x) for x in row] for row in d["join"]]
        leq = [[bool(x) for x in row] for row in d["leq"]]
        holds = {tuple(int(i) for i in t) for t in d["relation"]}
        bottom, tau, kappa = (int(d[k]) for k in ("bottom", "tau", "kappa"))
    except (KeyError, TypeError, ValueError) as exc:
        raise SeparoidError(f"malformed oracle description: {exc}") from None
    if len(join) != n or any(len(r) != n for r in join) or any(not 0 <= x < n for r in join for x in r):
        raise SeparoidError("join must be an n x n table of element indices")
    if len(leq) != n or any(len(r) != n for r in leq):
        raise SeparoidError("leq must be an n x n boolean table")
    if any(len(t) != 3 or not all(0 <= i < n for i in t) for t in holds):
        raise SeparoidError("relation entries must be index triples")
    if not all(0 <= i < n for i in (bottom, tau, kappa)):
        raise SeparoidError("bottom, tau and kappa must be element indices")
    return SeparoidInstance(
        carrier=list(range(n)),
        join=lambda a, b: join[a][b],
        leq=lambda a, b: leq[a][b],
        relation=lambda a, b, c: (a, b, c) in holds,
        bottom=bottom, tau=tau, kappa=kappa, name="table",
    )
