"""Transitional conditional independence on finite transition probability spaces.

``X ⊥ Y | Z`` w.r.t. ``K(W|T)`` holds iff some kernel ``Q(X|Z)`` satisfies
``K(X,Y,Z|T) = Q(X|Z) ⊗ K(Y,Z|T)``. On finite spaces this is decided exactly:
the conditional law of ``X`` at every positive-mass ``(t, y, z)`` must depend
on ``z`` alone.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Hashable, Iterable, Iterator, Mapping, Sequence

from .kernel import (
    ONE,
    POINT,
    ZERO,
    Assignment,
    FiniteVar,
    Kernel,
    KernelError,
    Space,
    TransRv,
    disintegrate,
    frac_str,
    ismapof,
    marginalize,
    product,
    pushforward,
)


@dataclass(frozen=True)
class TransSpace:
    """``(W × T, K(W|T))``; variables live on the joint ``W ∪ T`` assignments."""

    base: Kernel

    def __post_init__(self) -> None:
        if set(self.base.source.names) & set(self.base.target.names):
            raise KernelError("W and T variables must have distinct names")

    @property
    def w_space(self) -> Space:
        return self.base.target

    @property
    def t_space(self) -> Space:
        return self.base.source

    @cached_property
    def source(self) -> Space:
        return self.base.target.union(self.base.source)

    @cached_property
    def support(self) -> list[tuple[int, int, Fraction]]:
        """``(t index, (w,t) index, probability)`` for every positive entry of the base."""
        order = [(self.w_space.names + self.t_space.names).index(n) for n in self.source.names]
        idx = self.source.index
        out = []
        for ti, (t, row) in enumerate(zip(self.t_space.assignments, self.base.rows)):
            for w, p in zip(self.w_space.assignments, row):
                if p:
                    full = w + t
                    out.append((ti, idx[tuple(full[i] for i in order)], p))
        return out

    @cached_property
    def cells(self) -> list[tuple[int, int, int]]:
        """Like :attr:`support` with masses scaled to integers within each ``t`` row."""
        scale = [math.lcm(*(p.denominator for p in row if p)) for row in self.base.rows]
        return [(ti, si, p.numerator * (scale[ti] // p.denominator)) for ti, si, p in self.support]

    # common variables
    def proj(self, names: Iterable[str], label: str = "") -> TransRv:
        return TransRv.projection(self.source, names, label)

    def t_rv(self) -> TransRv:
        return TransRv.projection(self.source, self.t_space.names, "T")

    def const(self) -> TransRv:
        return TransRv.constant(self.source)

    def rv(self, codomain: Space, f, label: str = "") -> TransRv:
        return TransRv.from_map(self.source, codomain, f, label)

    def check(self, *rvs: TransRv) -> None:
        for x in rvs:
            if x.source != self.source:
                raise KernelError(f"{x!r} is not defined on this transition space")


@dataclass(frozen=True)
class CiVerdict:
    independent: bool
    witness: Kernel | None = None
    counterexample: tuple[tuple[Assignment, Assignment, Assignment],
                          tuple[Assignment, Assignment, Assignment]] | None = None
    approximate: bool = False

    def __bool__(self) -> bool:
        return self.independent

    def to_dict(self) -> dict:
        d: dict = {"independent": self.independent}
        if self.witness is not None:
            d["witness"] = self.witness.to_dict()
        if self.counterexample is not None:
            d["counterexample"] = [
                {"t": list(p[0]), "y": list(p[1]), "z": list(p[2])} for p in self.counterexample
            ]
        if self.approximate:
            d["approximate"] = True
        return d


def rename(space: Space, prefix: str) -> Space:
    return Space(FiniteVar(prefix + v.name, v.outcomes) for v in space.vars)


def role_spaces(ts: TransSpace, rvs: Sequence[TransRv], prefixes: Sequence[str]) -> list[Space]:
    """Codomains, prefixed only when names would collide with each other or with ``T``."""
    names = [n for x in rvs for n in x.codomain.names]
    if len(set(names)) == len(names) and not set(names) & set(ts.t_space.names):
        return [x.codomain for x in rvs]
    return [rename(x.codomain, p) for x, p in zip(rvs, prefixes)]


def joint_pushforward(ts: TransSpace, rvs: Sequence[TransRv],
                      spaces: Sequence[Space] | None = None) -> Kernel:
    """``(X₁ ⊗ … ⊗ Xₙ) ∘ K(W|T)`` as a kernel from ``T``."""
    ts.check(*rvs)
    if spaces is None:
        spaces = role_spaces(ts, rvs, [f"{i}:" for i in range(len(rvs))])
    target = POINT
    for sp in spaces:
        target = target.union(sp)
    if len(target) != sum(len(sp) for sp in spaces):
        raise KernelError("codomain names of the variables collide")
    order = [sum((sp.names for sp in spaces), ()).index(n) for n in target.names]
    outs = [[[(a, p) for a, p in zip(x.codomain.assignments, r) if p] for r in x.kernel.rows]
            for x in rvs]
    rows = [[ZERO] * target.size for _ in range(ts.t_space.size)]
    for ti, si, p0 in ts.support:
        for combo in itertools.product(*(o[si] for o in outs)):
            p = p0
            full: tuple = ()
            for a, q in combo:
                p *= q
                full += a
            rows[ti][target.index[tuple(full[i] for i in order)]] += p
    return Kernel(ts.t_space, target, rows, check=False, approximate=ts.base.approximate)


# core decision ---------------------------------------------------------------

Cell = tuple[Hashable, Hashable, Hashable, Hashable, int]  # (t, y, z, x, mass)


def _primitive(d: Mapping[Hashable, int]) -> tuple:
    items = sorted(d.items())
    g = math.gcd(*(v for _, v in items))
    return tuple((k, v // g) for k, v in items)


def decide(cells: Iterable[Cell], weak: bool = False):
    """Return ``(independent, conditionals by z, counterexample keys)``.

    ``cells`` carry integer masses that may be scaled arbitrarily per ``t``.
    With ``weak`` the conditionals only have to agree within each ``t``.
    """
    acc: dict[tuple, dict] = {}
    for t, y, z, x, m in cells:
        d = acc.setdefault((t, y, z), {})
        d[x] = d.get(x, 0) + m
    by_z: dict = {}
    for key in sorted(acc):
        t, _, z = key
        zk = (t, z) if weak else z
        vec = _primitive(acc[key])
        first = by_z.get(zk)
        if first is None:
            by_z[zk] = (vec, key)
        elif first[0] != vec:
            return False, None, (first[1], key)
    return True, {zk: v for zk, (v, _) in by_z.items()}, None


def _det_cells(ts: TransSpace, x: TransRv, y: TransRv, z: TransRv) -> Iterator[Cell]:
    xt, yt, zt = x.table, y.table, z.table
    for ti, si, m in ts.cells:
        yield ti, yt[si], zt[si], xt[si], m


def _joint_cells(joint: Kernel, xs: Space, ys: Space, zs: Space) -> Iterator[Cell]:
    px, py, pz = (joint.target.picker(s.names) for s in (xs, ys, zs))
    for ti, row in enumerate(joint.rows):
        scale = math.lcm(*(p.denominator for p in row if p))
        for a, p in zip(joint.target.assignments, row):
            if p:
                yield (ti, ys.index[py(a)], zs.index[pz(a)], xs.index[px(a)],
                       p.numerator * (scale // p.denominator))


def _cells(ts: TransSpace, x: TransRv, y: TransRv, z: TransRv):
    xs, ys, zs = role_spaces(ts, (x, y, z), ("X:", "Y:", "Z:"))
    if x.deterministic and y.deterministic and z.deterministic:
        return xs, ys, zs, None, _det_cells(ts, x, y, z)
    joint = joint_pushforward(ts, (x, y, z), (xs, ys, zs))
    return xs, ys, zs, joint, _joint_cells(joint, xs, ys, zs)


def tci_holds(ts: TransSpace, x: TransRv, y: TransRv, z: TransRv) -> bool:
    ts.check(x, y, z)
    return decide(_cells(ts, x, y, z)[4])[0]


def tci_check(ts: TransSpace, x: TransRv, y: TransRv, z: TransRv, *,
              verify: bool = False) -> CiVerdict:
    """Decide ``X ⊥ Y | Z``; returns a witness ``Q(X|Z)`` or a counterexample pair."""
    ts.check(x, y, z)
    xs, ys, zs, joint, cells = _cells(ts, x, y, z)
    ok, cond, cex = decide(cells)
    approx = ts.base.approximate or any(v.kernel.approximate for v in (x, y, z))
    if not ok:
        (t1, y1, z1), (t2, y2, z2) = cex
        ta = ts.t_space.assignments
        return CiVerdict(False, None, ((ta[t1], ys.assignments[y1], zs.assignments[z1]),
                                       (ta[t2], ys.assignments[y2], zs.assignments[z2])), approx)
    uniform = [Fraction(1, xs.size)] * xs.size
    rows = []
    for zi in range(zs.size):
        vec = cond.get(zi)
        if vec is None:
            rows.append(uniform)
            continue
        total = sum(v for _, v in vec)
        row = [ZERO] * xs.size
        for xi, v in vec:
            row[xi] = Fraction(v, total)
        rows.append(row)
    witness = Kernel(zs, xs, rows, check=False)
    if verify:
        if joint is None:
            joint = joint_pushforward(ts, (x, y, z), (xs, ys, zs))
        rhs = product(witness, marginalize(joint, ys.names + zs.names))
        if rhs != joint:  # pragma: no cover - soundness guard
            raise AssertionError("witness does not reproduce the joint kernel")
    return CiVerdict(True, witness, None, approx)


def weak_ci_check(ts: TransSpace, x: TransRv, y: TransRv, z: TransRv) -> bool:
    """Per-``t`` conditional independence: ``P(X|y,z,t) = P(X|z,t)`` on the support."""
    ts.check(x, y, z)
    return decide(_cells(ts, x, y, z)[4], weak=True)[0]


def join_rvs(*rvs: TransRv, label: str = "") -> TransRv:
    """``X₁ ⊗ … ⊗ Xₙ`` on a common source (codomains prefixed when names collide)."""
    if not rvs:
        raise KernelError("need at least one variable")
    src = rvs[0].source
    if any(x.source != src for x in rvs):
        raise KernelError("variables must share a source space")
    names = [n for x in rvs for n in x.codomain.names]
    if len(set(names)) == len(names):
        spaces = [x.codomain for x in rvs]
    else:
        spaces = [rename(x.codomain, f"{i}:") for i, x in enumerate(rvs)]
    target = POINT
    for sp in spaces:
        target = target.union(sp)
    order = [sum((sp.names for sp in spaces), ()).index(n) for n in target.names]
    rows = []
    for i in range(src.size):
        row = [ZERO] * target.size
        parts = [[(a, p) for a, p in zip(x.codomain.assignments, x.kernel.rows[i]) if p] for x in rvs]
        for combo in itertools.product(*parts):
            p, full = ONE, ()
            for a, q in combo:
                p *= q
                full += a
            row[target.index[tuple(full[j] for j in order)]] += p
        rows.append(row)
    det = all(x.deterministic for x in rvs)
    return TransRv(Kernel(src, target, rows, check=False), det,
                   label or "⊗".join(x.label or "?" for x in rvs))


def map_of(ts: TransSpace, x: TransRv, y: TransRv) -> dict | None:
    """``X ⊑_K Y``: a map ``φ`` with ``X = φ(Y)`` almost surely, or None."""
    xs, ys = role_spaces(ts, (x, y), ("X:", "Y:"))
    joint = joint_pushforward(ts, (x, y), (xs, ys))
    return ismapof(joint, xs.names, ys.names)


# comparison notions --------------------------------------------------------------

def variation_ci_check(x: TransRv, y: TransRv, z: TransRv) -> bool:
    """``Range(X | y, z) = Range(X | z)`` for every ``(y, z)`` in the joint range."""
    if not (x.deterministic and y.deterministic and z.deterministic):
        raise KernelError("variation independence needs deterministic variables")
    if not (x.source == y.source == z.source):
        raise KernelError("variables must share a source space")
    by_yz: dict = {}
    by_z: dict = {}
    for xi, yi, zi in zip(x.table, y.table, z.table):
        by_yz.setdefault((yi, zi), set()).add(xi)
        by_z.setdefault(zi, set()).add(xi)
    return all(xs == by_z[zi] for (_, zi), xs in by_yz.items())


@dataclass(frozen=True)
class DeterministicCi:
    independent: bool
    phi: dict | None
    consistent: bool


def deterministic_ci_check(ts: TransSpace, f: TransRv, h: TransRv, y: TransRv) -> DeterministicCi:
    """``F ⊥ Y | H`` for ``F``, ``H`` functions of ``T``, next to a direct search for ``F = φ∘H``."""
    for v in (f, h):
        if not v.deterministic:
            raise KernelError("F and H must be deterministic")
        tpick = ts.source.picker(ts.t_space.names)
        seen: dict = {}
        for s, code in zip(ts.source.assignments, v.table):
            if seen.setdefault(tpick(s), code) != code:
                raise KernelError(f"{v!r} depends on W, not only on T")
    verdict = tci_holds(ts, f, y, h)
    phi: dict | None = {}
    for hc, fc in zip(h.table, f.table):
        ha, fa = h.codomain.assignments[hc], f.codomain.assignments[fc]
        if phi.setdefault(ha, fa) != fa:
            phi = None
            break
    if phi is not None:
        first = tuple(v.outcomes[0] for v in f.codomain.vars)
        for ha in h.codomain.assignments:
            phi.setdefault(ha, first)
    return DeterministicCi(verdict, phi if verdict else None, verdict == (phi is not None))


def mixture_space(ts: TransSpace, q: Sequence[Fraction]) -> TransSpace:
    """``K(W|T) ⊗ Q(T)`` as a probability space (one-point parameter)."""
    qk = Kernel(POINT, ts.t_space, [list(q)])
    return TransSpace(product(ts.base, qk))


def equivalence_battery(ts: TransSpace, x: TransRv, y: TransRv, z: TransRv) -> dict:
    """Evaluate the equivalent formulations of ``X ⊥ Y | Z`` and their consistency."""
    star = ts.const()
    t = ts.t_rv()
    ty = join_rvs(t, y)
    c1 = tci_holds(ts, x, y, z)
    c2 = tci_holds(ts, x, ty, z)
    xstar = tci_check(ts, x, star, z)
    c3 = False
    if xstar.independent:
        xs, ys, zs = role_spaces(ts, (x, y, z), ("X:", "Y:", "Z:"))
        joint = joint_pushforward(ts, (x, y, z), (xs, ys, zs))
        w = xstar.witness
        w = Kernel(zs, xs, w.rows, check=False)
        c3 = product(w, marginalize(joint, ys.names + zs.names)) == joint
    c4 = xstar.independent and weak_ci_check(ts, x, y, z)
    n = ts.t_space.size
    probes = [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]
    probes.append([Fraction(1, n)] * n)
    c5 = True
    for q in probes:
        ms = mixture_space(ts, q)
        xm, tym, zm = (TransRv(Kernel(ms.source, v.codomain, v.kernel.rows, check=False),
                               v.deterministic, v.label) for v in (x, ty, z))
        if not tci_holds(ms, xm, tym, zm):
            c5 = False
            break
    consistent = (c1 == c2 == c3 == c4) and (not c2 or c5)
    return {"1": c1, "2": c2, "3": c3, "4": c4, "5": c5, "consistent": consistent}


# statistics -----------------------------------------------------------------------

def statistic(x: TransRv, f, codomain: Space, label: str = "S") -> TransRv:
    """``S = f ∘ X`` for a map ``f`` on the codomain of a deterministic ``X``."""
    if not x.deterministic:
        raise KernelError("statistics are defined for deterministic X")
    img = {}
    for a in x.codomain.assignments:
        v = f(x.codomain.as_dict(a)) if callable(f) else f[a]
        img[a] = codomain.assign(v)
    src = x.source
    return TransRv.from_map(src, codomain,
                            {s: img[x.codomain.assignments[c]] for s, c in zip(src.assignments, x.table)},
                            label)


def _vector_label(row: Sequence[Fraction]) -> str:
    return "(" + ",".join(frac_str(p) for p in row) + ")"


def row_label_rv(ts: TransSpace, k: Kernel, name: str) -> TransRv:
    """A deterministic variable mapping a point to the (labelled) row of ``k`` it selects."""
    pick = ts.source.picker(k.source.names)
    labels = [_vector_label(k.rows[k.source.index[pick(s)]]) for s in ts.source.assignments]
    outcomes = tuple(sorted(set(labels)))
    cod = Space([FiniteVar(name, outcomes)])
    return ts.rv(cod, {s: (lab,) for s, lab in zip(ts.source.assignments, labels)}, name)


@dataclass
class StatReport:
    ancillary: CiVerdict
    sufficient: CiVerdict
    adequate: CiVerdict | None = None

    def to_dict(self) -> dict:
        d = {"ancillary": self.ancillary.to_dict(), "sufficient": self.sufficient.to_dict()}
        if self.adequate is not None:
            d["adequate"] = self.adequate.to_dict()
        return d


def stat_concepts(model: Kernel, s: TransRv, x: TransRv, y: TransRv | None = None) -> StatReport:
    """Ancillarity ``S ⊥ Θ``, sufficiency ``X ⊥ Θ | S`` and adequacy ``X ⊥ Θ,Y | S``."""
    ts = TransSpace(model)
    theta = ts.t_rv()
    star = ts.const()
    anc = tci_check(ts, s, theta, star)
    suf = tci_check(ts, x, theta, s)
    ade = tci_check(ts, x, join_rvs(theta, y), s) if y is not None else None
    return StatReport(anc, suf, ade)


def fisher_neyman_model(x_space: Space, theta_space: Space, h: Mapping, g: Mapping,
                        s: Mapping) -> Kernel:
    """``P(x|θ) ∝ h(x)·g(S(x);θ)`` with the normalizer computed exactly.

    ``h`` maps x-assignments, ``s`` maps x-assignments to statistic values and
    ``g`` maps ``(statistic value, θ-assignment)`` to nonnegative rationals.
    """
    rows = []
    for th in theta_space.assignments:
        w = [Fraction(h[xa]) * Fraction(g[(s[xa], th)]) for xa in x_space.assignments]
        total = sum(w)
        if total <= 0:
            raise KernelError(f"parameter {th} gives no mass; not a valid model")
        rows.append([v / total for v in w])
    return Kernel(theta_space, x_space, rows)


def invariant_reduction(model: Kernel, u: TransRv, gamma: TransRv) -> tuple[CiVerdict, bool]:
    """``U ⊥ Θ | Γ``; also checks the witness reproduces ``P(U|θ)`` through ``Γ(θ)``."""
    ts = TransSpace(model)
    v = tci_check(ts, u, ts.t_rv(), gamma)
    if not v.independent:
        return v, False
    law = pushforward(model, u)
    tpick = ts.source.picker(ts.t_space.names)
    gamma_of_t = {tpick(s): c for s, c in zip(ts.source.assignments, gamma.table)}
    ok = all(law.rows[i] == v.witness.rows[gamma_of_t[t]]
             for i, t in enumerate(ts.t_space.assignments))
    return v, ok


@dataclass
class PropensityReport:
    e: TransRv
    verdict: CiVerdict
    minimal: dict[str, bool] = field(default_factory=dict)


def propensity(k: Kernel, candidates: Mapping[str, TransRv] | None = None) -> PropensityReport:
    """``E(x) = P(Y|X=x)``; checks ``Y ⊥ X | E`` and ``E ⊑ S`` for sufficient candidates."""
    ts = TransSpace(k)
    e = row_label_rv(ts, k, "E")
    yv = ts.proj(k.target.names, "Y")
    xv = ts.t_rv()
    verdict = tci_check(ts, yv, xv, e)
    minimal = {}
    for name, s in (candidates or {}).items():
        if tci_holds(ts, yv, xv, s):
            minimal[name] = map_of(ts, e, s) is not None
    return PropensityReport(e, verdict, minimal)


@dataclass
class BayesReport:
    posterior: Kernel
    posterior_ci: CiVerdict
    likelihood_ci: CiVerdict
    minimal: dict[str, bool] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"posterior_ci": self.posterior_ci.independent,
                "likelihood_ci": self.likelihood_ci.independent, "minimal": self.minimal}


def bayes_posterior_check(model: Kernel, prior: Kernel,
                          candidates: Mapping[str, TransRv] | None = None) -> BayesReport:
    """Posterior ``Z(x,π) = P(Θ|X=x,Π=π)`` with ``Θ ⊥ X | Z`` and ``X ⊥ Θ,Π | L``."""
    joint = product(model, prior)
    ts = TransSpace(joint)
    x_names, th_names = model.target.names, model.source.names
    post = disintegrate(joint, x_names)
    z = row_label_rv(ts, post, "Z")
    xv, thv = ts.proj(x_names, "X"), ts.proj(th_names, "Theta")
    post_ci = tci_check(ts, thv, xv, z)
    lik = row_label_rv(ts, model, "L")
    lik_ci = tci_check(ts, xv, join_rvs(thv, ts.t_rv()), lik)
    minimal = {}
    for name, s in (candidates or {}).items():
        if tci_holds(ts, thv, xv, s):
            minimal[name] = map_of(ts, z, s) is not None
    return BayesReport(post, post_ci, lik_ci, minimal)


# separoid bridge ------------------------------------------------------------------

def _tci_extra_rules():
    from .separoid import Rule

    return (
        Rule("restricted left weak union", 4,
             lambda S, a, b, c, d: S.rel(S.j(a, d), b, c) and S.rel(a, S.bottom, S.j(d, c)),
             lambda S, a, b, c, d: S.rel(a, b, S.j(d, c))),
        Rule("extended tau-restricted right redundancy", 2,
             lambda S, a, c: S.le(S.tau, c),
             lambda S, a, c: S.rel(a, S.bottom, c)),
    )


class CodedSpace:
    """Deterministic variables on a transition space, stored as per-point codes.

    Elements of the carrier are frozensets of generator names; the join of two
    elements is their union and the element's value at a point is the tuple of
    its generators' values. ``"T"`` names the parameter projection and the
    empty set is the constant ``δ_*``.
    """

    def __init__(self, ts: TransSpace, generators: Mapping[str, TransRv]):
        self.ts = ts
        gens = dict(generators)
        gens.setdefault("T", ts.t_rv())
        for name, g in gens.items():
            ts.check(g)
            if not g.deterministic:
                raise KernelError(f"generator {name} must be deterministic")
        self.names = sorted(gens)
        self.tables = {n: gens[n].table for n in self.names}
        self._codes: dict[frozenset, list] = {}

    @property
    def carrier(self) -> list[frozenset]:
        return [frozenset(s) for k in range(len(self.names) + 1)
                for s in itertools.combinations(self.names, k)]

    def codes(self, e: frozenset) -> list:
        c = self._codes.get(e)
        if c is None:
            tabs = [self.tables[n] for n in sorted(e)]
            c = self._codes[e] = list(zip(*tabs)) if tabs else [()] * self.ts.source.size
        return c

    def holds(self, a: frozenset, b: frozenset, c: frozenset) -> bool:
        xa, yb, zc = self.codes(a), self.codes(b), self.codes(c)
        return decide((ti, yb[si], zc[si], xa[si], m) for ti, si, m in self.ts.cells)[0]

    def leq(self, a: frozenset, b: frozenset) -> bool:
        """``a ⊑_K b``: ``a`` is almost surely a function of ``b``."""
        xa, xb = self.codes(a), self.codes(b)
        phi: dict = {}
        for _, si, _ in self.ts.cells:
            if phi.setdefault(xb[si], xa[si]) != xa[si]:
                return False
        return True

    def instance(self):
        from .separoid import SeparoidInstance

        return SeparoidInstance(
            carrier=self.carrier,
            join=frozenset.union,
            leq=self.leq,
            relation=self.holds,
            bottom=frozenset(),
            tau=frozenset({"T"}),
            kappa=frozenset(),
            name="tci",
            extra_rules=_tci_extra_rules(),
        )


def tci_separoid_instance(ts: TransSpace, generators: Mapping[str, TransRv]):
    """TCI as a ``T``-``*``-separoid over joins of deterministic generators."""
    return CodedSpace(ts, generators).instance()
