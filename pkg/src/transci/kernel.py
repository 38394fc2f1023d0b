"""Exact Markov kernels between finite product spaces.

A :class:`Kernel` maps each assignment of its source variables to a
probability distribution over assignments of its target variables. All
entries are :class:`fractions.Fraction`; variables are aligned by name and
kept in name order, so two kernels over the same variables compare equal
regardless of the order they were declared in.
"""

from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

Assignment = tuple[str, ...]
ZERO = Fraction(0)
ONE = Fraction(1)
DEFAULT_FLOAT_TOL = 1e-9


class KernelError(ValueError):
    """Schema, shape or stochasticity problem with a kernel."""


@dataclass(frozen=True)
class FiniteVar:
    name: str
    outcomes: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "outcomes", tuple(str(o) for o in self.outcomes))
        if not self.name:
            raise KernelError("variable name must be nonempty")
        if not self.outcomes:
            raise KernelError(f"variable {self.name} has no outcomes")
        if len(set(self.outcomes)) != len(self.outcomes):
            raise KernelError(f"variable {self.name} has repeated outcomes")

    def to_dict(self) -> dict:
        return {"name": self.name, "outcomes": list(self.outcomes)}


class Space:
    """An ordered (by name) tuple of finite variables; empty means the one-point space."""

    __slots__ = ("vars", "names", "__dict__")

    def __init__(self, vars: Iterable[FiniteVar] = ()):
        vs = sorted(vars, key=lambda v: v.name)
        names = tuple(v.name for v in vs)
        if len(set(names)) != len(names):
            raise KernelError(f"duplicate variable names in {names}")
        self.vars: tuple[FiniteVar, ...] = tuple(vs)
        self.names: tuple[str, ...] = names

    @classmethod
    def of(cls, **outcomes: Sequence) -> "Space":
        return cls(FiniteVar(n, tuple(map(str, o))) for n, o in outcomes.items())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Space) and self.vars == other.vars

    def __hash__(self) -> int:
        return hash(self.vars)

    def __repr__(self) -> str:
        return "Space(" + ", ".join(f"{v.name}{list(v.outcomes)}" for v in self.vars) + ")"

    def __len__(self) -> int:
        return len(self.vars)

    def __contains__(self, name: str) -> bool:
        return name in self._pos

    @cached_property
    def _pos(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.names)}

    @cached_property
    def assignments(self) -> list[Assignment]:
        """All assignments in mixed-radix order (last variable fastest)."""
        return list(itertools.product(*(v.outcomes for v in self.vars)))

    @cached_property
    def index(self) -> dict[Assignment, int]:
        return {a: i for i, a in enumerate(self.assignments)}

    @property
    def size(self) -> int:
        return math.prod(len(v.outcomes) for v in self.vars)

    def var(self, name: str) -> FiniteVar:
        try:
            return self.vars[self._pos[name]]
        except KeyError:
            raise KernelError(f"unknown variable {name!r}") from None

    def sub(self, names: Iterable[str]) -> "Space":
        return Space(self.var(n) for n in set(names))

    def union(self, other: "Space") -> "Space":
        merged = {v.name: v for v in self.vars}
        for v in other.vars:
            if v.name in merged and merged[v.name] != v:
                raise KernelError(f"schema mismatch for variable {v.name!r}")
            merged[v.name] = v
        return Space(merged.values())

    def minus(self, names: Iterable[str]) -> "Space":
        drop = set(names)
        return Space(v for v in self.vars if v.name not in drop)

    def picker(self, names: Sequence[str]) -> Callable[[Assignment], Assignment]:
        pos = [self._pos[n] for n in names]
        return lambda a: tuple(a[i] for i in pos)

    def assign(self, a: Mapping[str, str] | Sequence[str]) -> Assignment:
        """Normalize a mapping or a tuple into a canonical assignment tuple."""
        if isinstance(a, Mapping):
            try:
                out = tuple(str(a[n]) for n in self.names)
            except KeyError as exc:
                raise KernelError(f"assignment lacks variable {exc}") from None
        elif isinstance(a, str):
            out = (a,)
        else:
            out = tuple(str(x) for x in a)
        if out not in self.index:
            raise KernelError(f"invalid assignment {a!r} for {self!r}")
        return out

    def as_dict(self, a: Assignment) -> dict[str, str]:
        return dict(zip(self.names, a))

    def label(self, a: Assignment) -> str:
        return ",".join(f"{n}={x}" for n, x in zip(self.names, a))

    def parse_label(self, s: str) -> Assignment:
        d = {}
        if s.strip():
            for part in s.split(","):
                n, _, x = part.partition("=")
                d[n.strip()] = x.strip()
        if set(d) != set(self.names):
            raise KernelError(f"label {s!r} does not match variables {self.names}")
        return self.assign(d)

    def to_list(self) -> list[dict]:
        return [v.to_dict() for v in self.vars]

    @classmethod
    def from_list(cls, items: Iterable[Mapping]) -> "Space":
        return cls(FiniteVar(d["name"], tuple(d["outcomes"])) for d in items)


POINT = Space()


def frac_str(p: Fraction) -> str:
    return f"{p.numerator}/{p.denominator}"


def parse_prob(x) -> tuple[Fraction, bool]:
    """Parse a probability; returns ``(value, came_from_float)``."""
    if isinstance(x, float):
        return Fraction(repr(x)), True
    if isinstance(x, int):
        return Fraction(x), False
    return Fraction(str(x).strip()), False


class Kernel:
    """A row-stochastic table ``K(target | source)`` with exact entries."""

    __slots__ = ("source", "target", "rows", "approximate", "__dict__")

    def __init__(self, source: Space, target: Space, rows: Sequence[Sequence[Fraction]],
                 *, check: bool = True, approximate: bool = False):
        self.source = source
        self.target = target
        self.rows: tuple[tuple[Fraction, ...], ...] = tuple(tuple(r) for r in rows)
        self.approximate = approximate
        if check:
            self._validate()

    def _validate(self) -> None:
        if len(self.rows) != self.source.size:
            raise KernelError("one row per source assignment required")
        clash = set(self.source.names) & set(self.target.names)
        for n in clash:
            if self.source.var(n) != self.target.var(n):
                raise KernelError(f"schema mismatch for variable {n!r}")
        for i, r in enumerate(self.rows):
            if len(r) != self.target.size:
                raise KernelError("row length must equal target size")
            if any(p < 0 for p in r):
                raise KernelError(f"negative entry in row {self.source.assignments[i]}")
            if sum(r) != 1:
                raise KernelError(f"row {self.source.assignments[i]} sums to {sum(r)}")

    # construction
    @classmethod
    def from_function(cls, source: Space, target: Space,
                      fn: Callable[[dict[str, str]], Mapping]) -> "Kernel":
        """Build from ``fn(source_dict) -> {target assignment: probability}``."""
        rows = []
        for s in source.assignments:
            row = [ZERO] * target.size
            for t, p in fn(source.as_dict(s)).items():
                row[target.index[target.assign(t)]] += Fraction(p)
            rows.append(row)
        return cls(source, target, rows)

    @classmethod
    def point(cls) -> "Kernel":
        return cls(POINT, POINT, [[ONE]])

    # access
    def prob(self, target: Mapping | Sequence, source: Mapping | Sequence = ()) -> Fraction:
        return self.rows[self.source.index[self.source.assign(source)]][
            self.target.index[self.target.assign(target)]
        ]

    def row(self, source: Mapping | Sequence = ()) -> dict[Assignment, Fraction]:
        r = self.rows[self.source.index[self.source.assign(source)]]
        return {a: p for a, p in zip(self.target.assignments, r) if p}

    def items(self):
        """Yield ``(source, target, p)`` for every positive entry."""
        tas = self.target.assignments
        for s, r in zip(self.source.assignments, self.rows):
            for t, p in zip(tas, r):
                if p:
                    yield s, t, p

    @property
    def is_deterministic(self) -> bool:
        return all(sum(1 for p in r if p) == 1 for r in self.rows)

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, Kernel) and self.source == other.source
                and self.target == other.target and self.rows == other.rows)

    def __hash__(self) -> int:
        return hash((self.source, self.target, self.rows))

    def __repr__(self) -> str:
        return f"Kernel({list(self.target.names)} | {list(self.source.names)})"

    # serialization
    def to_dict(self) -> dict:
        rows = {}
        for s, r in zip(self.source.assignments, self.rows):
            rows[self.source.label(s)] = {
                self.target.label(t): frac_str(p) for t, p in zip(self.target.assignments, r) if p
            }
        return {"source": self.source.to_list(), "target": self.target.to_list(), "rows": rows}

    @classmethod
    def from_dict(cls, d: Mapping, *, tol: float = DEFAULT_FLOAT_TOL) -> "Kernel":
        try:
            source = Space.from_list(d.get("source", []))
            target = Space.from_list(d["target"])
            given = d["rows"]
        except (KeyError, TypeError) as exc:
            raise KernelError(f"malformed kernel description: {exc}") from None
        rows = [[ZERO] * target.size for _ in range(source.size)]
        seen = set()
        approx = False
        for skey, entries in given.items():
            s = source.parse_label(skey)
            seen.add(s)
            row = rows[source.index[s]]
            for tkey, p in entries.items():
                val, was_float = parse_prob(p)
                approx |= was_float
                row[target.index[target.parse_label(tkey)]] += val
        if len(seen) != source.size:
            raise KernelError("kernel description is missing rows")
        if approx:
            for row in rows:
                total = sum(row)
                if abs(total - 1) > Fraction(tol):
                    raise KernelError(f"float row sums to {float(total)}, beyond tolerance {tol}")
                row[:] = [p / total for p in row]
        return cls(source, target, rows, approximate=approx)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _union_checked(*spaces: Space) -> Space:
    out = POINT
    for s in spaces:
        out = out.union(s)
    return out


def delta_kernel(f: Mapping | Callable, source: Space, target: Space) -> Kernel:
    """The deterministic kernel of a total map ``f`` (mapping or callable on dicts)."""
    rows = []
    for s in source.assignments:
        try:
            img = f(source.as_dict(s)) if callable(f) else (f.get(s, f.get(source.label(s))))
        except KeyError:
            img = None
        if img is None:
            raise KernelError(f"map is not defined at {source.label(s)!r}")
        row = [ZERO] * target.size
        row[target.index[target.assign(img)]] = ONE
        rows.append(row)
    return Kernel(source, target, rows)


def identity_kernel(space: Space) -> Kernel:
    return Kernel(space, space, [[ONE if i == j else ZERO for j in range(space.size)]
                                 for i in range(space.size)], check=False)


def marginalize(k: Kernel, keep: Iterable[str]) -> Kernel:
    keep = set(keep)
    unknown = keep - set(k.target.names)
    if unknown:
        raise KernelError(f"unknown target variable(s) {sorted(unknown)}")
    tgt = k.target.sub(keep)
    if tgt == k.target:
        return k
    pick = k.target.picker(tgt.names)
    cols = [tgt.index[pick(a)] for a in k.target.assignments]
    rows = []
    for r in k.rows:
        out = [ZERO] * tgt.size
        for j, p in zip(cols, r):
            if p:
                out[j] += p
        rows.append(out)
    return Kernel(k.source, tgt, rows, check=False, approximate=k.approximate)


def product(q: Kernel, k: Kernel) -> Kernel:
    """``Q(Z|Y,W,T) ⊗ K(W,U|T,X)``: the joint kernel ``(Z,W,U | Y,T,X)``."""
    clash = set(q.target.names) & set(k.target.names)
    if clash:
        raise KernelError(f"target name clash {sorted(clash)}")
    free = q.source.minus(k.target.names)
    source = _union_checked(k.source, free)
    target = _union_checked(q.target, k.target)
    # q may read k's targets; their schemas must agree
    for n in q.source.names:
        if n in k.target:
            if q.source.var(n) != k.target.var(n):
                raise KernelError(f"schema mismatch for variable {n!r}")
    _union_checked(source, target)  # schema check for names on both sides

    ks = source.picker(k.source.names)
    qpos = []
    for n in q.source.names:
        qpos.append(source.names.index(n) if n not in k.target
                    else len(source.names) + k.target.names.index(n))
    tgt_index = target.index
    tpos = [(0, q.target.names.index(n)) if n in q.target else (1, k.target.names.index(n))
            for n in target.names]
    qidx, kidx = q.source.index, k.source.index
    qta, kta = q.target.assignments, k.target.assignments
    rows = []
    for s in source.assignments:
        out = [ZERO] * target.size
        krow = k.rows[kidx[ks(s)]]
        for a, p in zip(kta, krow):
            if not p:
                continue
            full = s + a
            qrow = q.rows[qidx[tuple(full[i] for i in qpos)]]
            for b, r in zip(qta, qrow):
                if r:
                    parts = (b, a)
                    out[tgt_index[tuple(parts[side][i] for side, i in tpos)]] += p * r
        rows.append(out)
    return Kernel(source, target, rows, check=False,
                  approximate=q.approximate or k.approximate)


def compose(q: Kernel, k: Kernel) -> Kernel:
    """``Q ∘ K``: the ``Q``-target marginal of :func:`product`."""
    return marginalize(product(q, k), q.target.names)


def extend_with_identity(k: Kernel) -> Kernel:
    """``K(W,T|T)``: carry a copy of the source alongside the target."""
    clash = set(k.target.names) & set(k.source.names)
    if clash:
        raise KernelError(f"target already names source variable(s) {sorted(clash)}")
    target = _union_checked(k.target, k.source)
    combo_names = k.target.names + k.source.names
    order = [combo_names.index(n) for n in target.names]
    rows = []
    for s, r in zip(k.source.assignments, k.rows):
        out = [ZERO] * target.size
        for a, p in zip(k.target.assignments, r):
            if p:
                full = a + s
                out[target.index[tuple(full[i] for i in order)]] = p
        rows.append(out)
    return Kernel(k.source, target, rows, check=False, approximate=k.approximate)


def is_null_set(k: Kernel, m: Iterable[tuple[Sequence | Mapping, Sequence | Mapping]]) -> bool:
    """True iff every section of ``m`` (pairs ``(target, source)``) has zero mass."""
    for t, s in m:
        if k.prob(t, s):
            return False
    return True


def disintegrate(k: Kernel, on: Iterable[str]) -> Kernel:
    """``K(X|Y,Z)`` from ``K(X,Y|Z)`` with ``Y = on``; uniform where ``K(Y=y|z) = 0``."""
    on = set(on)
    unknown = on - set(k.target.names)
    if unknown:
        raise KernelError(f"unknown target variable(s) {sorted(unknown)}")
    ysp = k.target.sub(on)
    xsp = k.target.minus(on)
    if set(ysp.names) & set(k.source.names):
        raise KernelError("conditioning variables collide with source names")
    source = _union_checked(ysp, k.source)
    py = k.target.picker(ysp.names)
    px = k.target.picker(xsp.names)
    zpick = source.picker(k.source.names)
    ypick = source.picker(ysp.names)
    cells = [(ysp.index[py(a)], xsp.index[px(a)]) for a in k.target.assignments]
    uniform = [Fraction(1, xsp.size)] * xsp.size
    cache: dict[int, list[list[Fraction]]] = {}
    rows = []
    for s in source.assignments:
        zi = k.source.index[zpick(s)]
        if zi not in cache:
            table = [[ZERO] * xsp.size for _ in range(ysp.size)]
            for (yi, xi), p in zip(cells, k.rows[zi]):
                if p:
                    table[yi][xi] += p
            cache[zi] = table
        ytab = cache[zi][ysp.index[ypick(s)]]
        den = sum(ytab)
        rows.append([p / den for p in ytab] if den else uniform)
    return Kernel(source, xsp, rows, check=False, approximate=k.approximate)


def kernels_agree_ae(p: Kernel, q: Kernel, base: Kernel) -> frozenset[tuple[Assignment, Assignment]]:
    """Source points where ``p`` and ``q`` differ, as ``(base target, base source)`` pairs."""
    if p.source != q.source or p.target != q.target:
        raise KernelError("kernels must share source and target spaces")
    if _union_checked(base.target, base.source) != p.source:
        raise KernelError("base kernel must cover the compared kernels' source")
    bt = p.source.picker(base.target.names)
    bs = p.source.picker(base.source.names)
    return frozenset(
        (bt(s), bs(s)) for s, r1, r2 in zip(p.source.assignments, p.rows, q.rows) if r1 != r2
    )


def ismapof(k: Kernel, x: Iterable[str], y: Iterable[str]) -> dict[Assignment, Assignment] | None:
    """A map ``φ`` with ``K(X,Y|T) = δ_φ(X|Y) ⊗ K(Y|T)``, or None if there is none."""
    x, y = set(x), set(y)
    if x & y:
        raise KernelError("x and y must be disjoint")
    m = marginalize(k, x | y)
    xs, ys = m.target.sub(x), m.target.sub(y)
    px, py = m.target.picker(xs.names), m.target.picker(ys.names)
    phi: dict[Assignment, Assignment] = {}
    for _, a, _p in m.items():
        yv, xv = py(a), px(a)
        if phi.setdefault(yv, xv) != xv:
            return None
    first = tuple(v.outcomes[0] for v in xs.vars)
    for yv in ys.assignments:
        phi.setdefault(yv, first)
    return phi


def random_kernel(source: Space, target: Space, rng: random.Random, *,
                  max_den: int = 12, zero_prob: float = 0.2) -> Kernel:
    """Rational rows with denominators at most ``max_den`` (or the support size) and zeros."""
    rows = []
    n = target.size
    for _ in range(source.size):
        support = [j for j in range(n) if rng.random() >= zero_prob] or [rng.randrange(n)]
        den = max(rng.randint(1, max_den), len(support))
        w = [0] * n
        for j in support:
            w[j] = 1
        for _ in range(den - len(support)):
            w[rng.choice(support)] += 1
        rows.append([Fraction(v, den) for v in w])
    return Kernel(source, target, rows, check=False)


def load_kernel(path: str) -> Kernel:
    with open(path) as fh:
        return Kernel.from_dict(json.load(fh))


class TransRv:
    """A transitional random variable: a kernel from the ``(W, T)`` variables to a codomain.

    ``deterministic`` marks variables given by a map table; those get a
    preimage-summation fast path everywhere.
    """

    __slots__ = ("kernel", "deterministic", "label", "__dict__")

    def __init__(self, kernel: Kernel, deterministic: bool | None = None, label: str = ""):
        self.kernel = kernel
        self.deterministic = kernel.is_deterministic if deterministic is None else deterministic
        if self.deterministic and not kernel.is_deterministic:
            raise KernelError("kernel is not deterministic")
        self.label = label

    @property
    def source(self) -> Space:
        return self.kernel.source

    @property
    def codomain(self) -> Space:
        return self.kernel.target

    @classmethod
    def from_map(cls, source: Space, codomain: Space, f: Mapping | Callable, label: str = "") -> "TransRv":
        return cls(delta_kernel(f, source, codomain), True, label)

    @classmethod
    def from_kernel(cls, k: Kernel, label: str = "") -> "TransRv":
        return cls(k, None, label)

    @classmethod
    def projection(cls, source: Space, names: Iterable[str], label: str = "") -> "TransRv":
        """The coordinate projection onto ``names`` (codomain keeps the same names)."""
        codomain = source.sub(names)
        pick = source.picker(codomain.names)
        rows = []
        for s in source.assignments:
            row = [ZERO] * codomain.size
            row[codomain.index[pick(s)]] = ONE
            rows.append(row)
        return cls(Kernel(source, codomain, rows, check=False), True, label or ",".join(codomain.names))

    @classmethod
    def constant(cls, source: Space, label: str = "*") -> "TransRv":
        return cls(Kernel(source, POINT, [[ONE]] * source.size, check=False), True, label)

    @cached_property
    def table(self) -> list[int]:
        """Codomain index of the image of every source assignment (deterministic only)."""
        if not self.deterministic:
            raise KernelError("table is only defined for deterministic variables")
        return [next(j for j, p in enumerate(r) if p) for r in self.kernel.rows]

    def value(self, s: Mapping | Sequence) -> Assignment:
        return self.codomain.assignments[self.table[self.source.index[self.source.assign(s)]]]

    def __repr__(self) -> str:
        kind = "map" if self.deterministic else "kernel"
        return f"TransRv({self.label or list(self.codomain.names)}, {kind})"


def pushforward(k: Kernel, x: TransRv) -> Kernel:
    """``X_* K``: the law of ``x`` under ``K(W|T)``, as a kernel ``K(X|T)``."""
    src = _union_checked(k.target, k.source)
    if x.source != src:
        raise KernelError("variable must be defined on the kernel's target and source")
    tgt = x.codomain
    order = [(k.target.names + k.source.names).index(n) for n in src.names]
    rows = []
    for s, r in zip(k.source.assignments, k.rows):
        out = [ZERO] * tgt.size
        for a, p in zip(k.target.assignments, r):
            if not p:
                continue
            full = a + s
            i = src.index[tuple(full[j] for j in order)]
            if x.deterministic:
                out[x.table[i]] += p
            else:
                for j, q in enumerate(x.kernel.rows[i]):
                    if q:
                        out[j] += p * q
        rows.append(out)
    return Kernel(k.source, tgt, rows, check=False, approximate=k.approximate or x.kernel.approximate)
