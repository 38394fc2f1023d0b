"""Interpolated transitional CDF and transitional quantile function.

For ``K(X|Z)`` with ``X`` embedded in the reals, ``E = F(X;U|Z)`` with
``U`` uniform on ``[0,1]`` is uniform, and ``X = R(E|Z)`` almost surely.
Both facts are checked exactly: ``U`` is never sampled, all checks run on the
piecewise-linear structure with rational breakpoints.
"""

from __future__ import annotations

import json
from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .kernel import ZERO, Assignment, FiniteVar, Kernel, frac_str, parse_prob


class ReparamError(ValueError):
    """Embedding does not match the kernel, or an argument is out of range."""


@dataclass(frozen=True)
class RealEmbedding:
    var: FiniteVar
    values: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        vals = tuple(parse_prob(v)[0] if not isinstance(v, Fraction) else v for v in self.values)
        object.__setattr__(self, "values", vals)
        if len(vals) != len(self.var.outcomes):
            raise ReparamError("one embedded value per outcome required")
        if any(a >= b for a, b in zip(vals, vals[1:])):
            raise ReparamError("embedded values must be strictly increasing in outcome order")

    @classmethod
    def integers(cls, var: FiniteVar) -> "RealEmbedding":
        return cls(var, tuple(Fraction(i) for i in range(len(var.outcomes))))

    def value(self, outcome: str) -> Fraction:
        return self.values[self.var.outcomes.index(outcome)]

    def to_dict(self) -> dict:
        return {"name": self.var.name, "outcomes": list(self.var.outcomes),
                "values": [frac_str(v) for v in self.values]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "RealEmbedding":
        try:
            var = FiniteVar(d["name"], tuple(d["outcomes"]))
            values = tuple(parse_prob(v)[0] for v in d["values"])
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise ReparamError(f"malformed embedding: {exc}") from None
        return cls(var, values)


def load_embedding(path: str) -> RealEmbedding:
    with open(path) as fh:
        return RealEmbedding.from_dict(json.load(fh))


@dataclass(frozen=True)
class Itcdf:
    """Per source point, ``(value, below mass, atom mass)`` for each embedded atom."""

    emb: RealEmbedding
    source: tuple[Assignment, ...]
    steps: tuple[tuple[tuple[Fraction, Fraction, Fraction], ...], ...]

    def _steps(self, z) -> tuple[tuple[Fraction, Fraction, Fraction], ...]:
        z = tuple(z) if not isinstance(z, str) else (z,)
        try:
            return self.steps[self.source.index(z)]
        except ValueError:
            raise ReparamError(f"unknown source point {z}") from None

    def F(self, x, u, z=()) -> Fraction:
        """``K(X < x|z) + u·K(X = x|z)`` for a real ``x`` and ``u ∈ [0,1]``."""
        x, u = Fraction(x), Fraction(u)
        if not 0 <= u <= 1:
            raise ReparamError("u must lie in [0, 1]")
        below, atom = ZERO, ZERO
        for v, _, m in self._steps(z):
            if v < x:
                below += m
            elif v == x:
                atom = m
        return below + u * atom


def itcdf(k: Kernel, emb: RealEmbedding) -> Itcdf:
    if len(k.target) != 1 or k.target.vars[0] != emb.var:
        raise ReparamError("embedding must describe the kernel's single target variable")
    steps = []
    for row in k.rows:
        below = ZERO
        st = []
        for v, m in zip(emb.values, row):
            st.append((v, below, m))
            below += m
        steps.append(tuple(st))
    return Itcdf(emb, tuple(k.source.assignments), tuple(steps))


def tqf(f: Itcdf, e, z=()) -> Fraction:
    """``R(e|z)``: the least embedded ``x`` with ``F(x;1|z) ≥ e``.

    At ``e = 0`` every ``x`` qualifies and the least embedded value is returned.
    """
    e = Fraction(e)
    if not 0 <= e <= 1:
        raise ReparamError("e must lie in [0, 1]")
    steps = f._steps(z)
    cdf = [below + m for _, below, m in steps]
    i = bisect_left(cdf, e)
    return steps[min(i, len(steps) - 1)][0]


def pushforward_cdf(f: Itcdf, e, z=()) -> Fraction:
    """``P(F(X;U|z) ≤ e)`` with ``U`` uniform, in closed form."""
    e = Fraction(e)
    total = ZERO
    for _, below, m in f._steps(z):
        if not m:
            continue
        frac = (e - below) / m
        total += m * min(max(frac, ZERO), Fraction(1))
    return total


@dataclass
class ZReport:
    z: Assignment
    uniform: bool
    inverts: bool
    breakpoints: list[Fraction]
    bad_points: list[Fraction] = field(default_factory=list)
    bad_atoms: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.uniform and self.inverts

    def to_dict(self) -> dict:
        d = {"z": list(self.z), "uniform": self.uniform, "inverts": self.inverts,
             "breakpoints": [frac_str(b) for b in self.breakpoints]}
        if self.bad_points:
            d["bad_points"] = [frac_str(b) for b in self.bad_points]
        if self.bad_atoms:
            d["bad_atoms"] = self.bad_atoms
        return d


@dataclass
class ReparamReport:
    per_z: list[ZReport]
    boundary_e0: bool = True  # R(0|z) is the least embedded value rather than -inf

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.per_z)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "boundary_e0": self.boundary_e0,
                "per_z": [r.to_dict() for r in self.per_z]}


def _check_z(f: Itcdf, z: Assignment) -> ZReport:
    steps = f._steps(z)
    pts = sorted({ZERO, Fraction(1)} | {b for _, b, _ in steps} | {b + m for _, b, m in steps})
    probes = pts + [(a + b) / 2 for a, b in zip(pts, pts[1:])]
    bad = [e for e in sorted(probes) if pushforward_cdf(f, e, z) != e]
    bad_atoms = []
    outcomes = f.emb.var.outcomes
    for i, (v, below, m) in enumerate(steps):
        if not m:
            continue
        # E ranges over (below, below + m] as u ranges over (0, 1]; R must return v on all of it:
        # every lower atom has F(x';1) <= below, and F(v;1) reaches the right end
        lower_ok = all(b2 + m2 <= below for _, b2, m2 in steps[:i])
        upper_ok = f.F(v, 1, z) == below + m
        probe_ok = all(tqf(f, f.F(v, u, z), z) == v for u in (Fraction(1, 2), Fraction(1)))
        if not (lower_ok and upper_ok and probe_ok):
            bad_atoms.append(outcomes[i])
    return ZReport(z, not bad, not bad_atoms, pts, bad, bad_atoms)


def verify_reparam(k: Kernel, emb: RealEmbedding) -> ReparamReport:
    f = itcdf(k, emb)
    return ReparamReport([_check_z(f, z) for z in f.source])


def random_reparam_kernel(rng, max_atoms: int = 5, max_source: int = 3, max_den: int = 12,
                          zero_prob: float = 0.25) -> tuple[Kernel, RealEmbedding]:
    """A random ``K(X|Z)`` and a random strictly increasing rational embedding."""
    from .kernel import Space, random_kernel

    n = rng.randint(1, max_atoms)
    x = FiniteVar("x", tuple(f"a{i}" for i in range(n)))
    z = FiniteVar("z", tuple(str(i) for i in range(rng.randint(1, max_source))))
    k = random_kernel(Space([z]), Space([x]), rng, max_den=max_den, zero_prob=zero_prob)
    vals, cur = [], Fraction(rng.randint(-6, 6), rng.randint(1, 4))
    for _ in range(n):
        vals.append(cur)
        cur += Fraction(rng.randint(1, 9), rng.randint(1, 4))
    return k, RealEmbedding(x, tuple(vals))


def embedding_for(var: FiniteVar, values: Sequence) -> RealEmbedding:
    return RealEmbedding(var, tuple(Fraction(v) for v in values))
