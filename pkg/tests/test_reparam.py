import random
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from strategies import corpus_file
from transci.kernel import FiniteVar, Kernel, Space, load_kernel
from transci.reparam import (
    RealEmbedding, ReparamError, embedding_for, itcdf, load_embedding, pushforward_cdf,
    random_reparam_kernel, tqf, verify_reparam,
)

X = FiniteVar("x", ("a", "b", "c"))


def law(*probs, source=Space()):
    return Kernel(source, Space([X]), [list(map(F, probs))] if not len(source) else probs)


EMB = RealEmbedding.integers(X)


class TestEmbedding:
    def test_strictly_increasing(self):
        with pytest.raises(ReparamError):
            embedding_for(X, [0, 2, 2])

    def test_one_value_per_outcome(self):
        with pytest.raises(ReparamError):
            embedding_for(X, [0, 1])

    def test_roundtrip(self):
        e = embedding_for(X, ["-1/2", 2, "7/3"])
        assert RealEmbedding.from_dict(e.to_dict()) == e

    def test_malformed(self):
        with pytest.raises(ReparamError):
            RealEmbedding.from_dict({"name": "x"})

    def test_mismatch_with_kernel(self):
        other = RealEmbedding.integers(FiniteVar("y", ("0", "1")))
        with pytest.raises(ReparamError):
            itcdf(law(1, 0, 0), other)


class TestItcdf:
    def test_point_mass(self):
        f = itcdf(law(0, 1, 0), EMB)
        for u in (0, F(1, 3), 1):
            assert f.F(1, u) == u

    def test_uniform_two_atoms(self):
        y = FiniteVar("x", ("0", "1"))
        f = itcdf(Kernel(Space(), Space([y]), [[F(1, 2), F(1, 2)]]), RealEmbedding.integers(y))
        assert f.F(0, 1) == F(1, 2)
        assert f.F(1, 0) == F(1, 2)

    def test_total_mass(self):
        k, emb = random_reparam_kernel(random.Random(1), max_source=3)
        f = itcdf(k, emb)
        for z in f.source:
            assert f.F(emb.values[-1], 1, z) == 1

    def test_between_atoms(self):
        f = itcdf(law(F(1, 4), F(1, 4), F(1, 2)), EMB)
        assert f.F(F(3, 2), F(1, 2)) == F(1, 2)

    def test_u_range(self):
        with pytest.raises(ReparamError):
            itcdf(law(1, 0, 0), EMB).F(0, 2)

    def test_unknown_source(self):
        with pytest.raises(ReparamError):
            itcdf(law(1, 0, 0), EMB).F(0, 1, ("nope",))


class TestTqf:
    def test_e_one(self):
        assert tqf(itcdf(law(F(1, 2), F(1, 2), 0), EMB), 1) == 1

    def test_point_mass(self):
        f = itcdf(law(0, 0, 1), EMB)
        for e in (F(1, 100), F(1, 2), 1):
            assert tqf(f, e) == 2

    def test_uniform_step(self):
        y = FiniteVar("x", ("0", "1"))
        f = itcdf(Kernel(Space(), Space([y]), [[F(1, 2), F(1, 2)]]), RealEmbedding.integers(y))
        assert tqf(f, F(1, 2)) == 0
        assert tqf(f, F(1, 2) + F(1, 10**9)) == 1

    def test_e_zero_boundary(self):
        f = itcdf(law(0, F(1, 2), F(1, 2)), embedding_for(X, [-5, 0, 5]))
        assert tqf(f, 0) == -5
        assert verify_reparam(law(0, F(1, 2), F(1, 2)), EMB).boundary_e0

    def test_range(self):
        with pytest.raises(ReparamError):
            tqf(itcdf(law(1, 0, 0), EMB), F(3, 2))


class TestVerify:
    def test_point_mass(self):
        rep = verify_reparam(law(0, 1, 0), EMB)
        assert rep.ok
        f = itcdf(law(0, 1, 0), EMB)
        for e in (0, F(1, 3), 1):
            assert pushforward_cdf(f, e) == e

    def test_uniform_breakpoints(self):
        y = FiniteVar("x", ("0", "1"))
        k = Kernel(Space(), Space([y]), [[F(1, 2), F(1, 2)]])
        rep = verify_reparam(k, RealEmbedding.integers(y))
        assert rep.ok
        assert rep.per_z[0].breakpoints == [0, F(1, 2), 1]

    def test_three_atoms_per_z(self):
        z = Space.of(z="pq")
        k = Kernel(z, Space([X]), [[F(1, 6), F(1, 3), F(1, 2)], [F(2, 7), 0, F(5, 7)]])
        rep = verify_reparam(k, embedding_for(X, [F(-1, 3), 2, F(9, 4)]))
        assert rep.ok and len(rep.per_z) == 2
        assert rep.to_dict()["ok"] is True

    def test_corpus_files(self):
        k = load_kernel(corpus_file("reparam_kernel.json"))
        emb = load_embedding(corpus_file("reparam_embedding.json"))
        assert verify_reparam(k, emb).ok


# properties

@given(st.integers(0, 2**32 - 1))
def test_random_kernels_verify(seed):
    k, emb = random_reparam_kernel(random.Random(seed))
    assert verify_reparam(k, emb).ok


@given(st.integers(0, 2**32 - 1), st.fractions(0, 1), st.fractions(0, 1))
def test_monotone(seed, u, v):
    k, emb = random_reparam_kernel(random.Random(seed))
    f = itcdf(k, emb)
    z = f.source[0]
    lo, hi = min(u, v), max(u, v)
    xs = sorted(set(emb.values) | {emb.values[0] - 1, emb.values[-1] + 1})
    vals = [f.F(x, lo, z) for x in xs]
    assert vals == sorted(vals)
    for x in xs:
        assert f.F(x, lo, z) <= f.F(x, hi, z)
        mid = (lo + hi) / 2
        assert f.F(x, mid, z) == (f.F(x, lo, z) + f.F(x, hi, z)) / 2


@given(st.integers(0, 2**32 - 1), st.fractions(0, 1).filter(lambda u: u > 0))
def test_inversion(seed, u):
    k, emb = random_reparam_kernel(random.Random(seed))
    f = itcdf(k, emb)
    for zi, z in enumerate(f.source):
        for x, p in zip(emb.values, k.rows[zi]):
            if p:
                assert tqf(f, f.F(x, u, z), z) == x


@given(st.integers(0, 2**32 - 1), st.fractions(0, 1))
def test_pushforward_uniform(seed, e):
    k, emb = random_reparam_kernel(random.Random(seed))
    f = itcdf(k, emb)
    for z in f.source:
        assert pushforward_cdf(f, e, z) == e
