import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_map_exists, brute_tci, kernel_entries
from transci.generators import random_det_rv, random_tci_instance, random_trans_space
from transci.kernel import (
    FiniteVar, Kernel, KernelError, Space, TransRv, delta_kernel, marginalize, product,
    random_kernel,
)
from transci.tci import (
    CodedSpace, TransSpace, deterministic_ci_check, equivalence_battery, fisher_neyman_model,
    invariant_reduction, join_rvs, joint_pushforward, map_of, propensity, stat_concepts,
    bayes_posterior_check, tci_check, tci_holds, variation_ci_check, weak_ci_check,
)

B = ("0", "1")


def as_fn(x: TransRv):
    return lambda env: x.value(env)


def brute(ts, x, y, z):
    return brute_tci(ts.base, as_fn(x), as_fn(y), as_fn(z))


class TestJointPushforward:
    def test_identity_rv(self):
        k = random_kernel(Space.of(t=B), Space.of(w="abc"), random.Random(1))
        ts = TransSpace(k)
        assert joint_pushforward(ts, [ts.proj({"w"})]) == k

    def test_diagonal(self):
        k = random_kernel(Space.of(t=B), Space.of(w="abc"), random.Random(1), zero_prob=0)
        ts = TransSpace(k)
        x = ts.proj({"w"})
        j = joint_pushforward(ts, [x, x])
        for _, a, _ in j.items():
            assert a[0] == a[1]

    def test_against_direct_sum(self):
        rng = random.Random(2)
        ts = random_trans_space(rng)
        k = ts.base
        x = random_det_rv(rng, ts, "x")
        y = random_det_rv(rng, ts, "y")
        got = joint_pushforward(ts, [x, y])
        expect = {}
        for t, row in zip(k.source.assignments, k.rows):
            for w, p in zip(k.target.assignments, row):
                env = {"t": t[0], "w": w[0]}
                key = (frozenset({("t", t[0])}),
                       frozenset({("x", x.value(env)[0]), ("y", y.value(env)[0])}))
                expect[key] = expect.get(key, 0) + p
        assert kernel_entries(got) == {k2: v for k2, v in expect.items() if v}


class TestTciCheck:
    def test_classical_independence(self):
        rng = random.Random(3)
        kx = random_kernel(Space(), Space.of(a=B), rng)
        ky = random_kernel(Space(), Space.of(b="xyz"), rng)
        ts = TransSpace(product(kx, ky))
        v = tci_check(ts, ts.proj({"a"}), ts.proj({"b"}), ts.const(), verify=True)
        assert v.independent and v.witness is not None

    def test_t_dependence_breaks_ci(self):
        # W is a copy of T, X = T, Y = T
        k = delta_kernel(lambda d: {"w": d["t"]}, Space.of(t=B), Space.of(w=B))
        ts = TransSpace(k)
        v = tci_check(ts, ts.proj({"w"}), ts.t_rv(), ts.const())
        assert not v.independent
        (t1, _, z1), (t2, _, z2) = v.counterexample
        assert z1 == z2 and t1 != t2

    def test_witness_reproduces_joint(self):
        rng = random.Random(4)
        for _ in range(50):
            ts, gens = random_tci_instance(rng, n_vars=3)
            x, y, z = gens.values()
            v = tci_check(ts, x, y, z, verify=True)
            assert v.independent == brute(ts, x, y, z)

    def test_space_mismatch(self):
        ts = TransSpace(Kernel(Space(), Space.of(w=B), [[F(1, 2)] * 2]))
        other = TransRv.constant(Space.of(q=B))
        with pytest.raises(KernelError):
            tci_check(ts, other, ts.const(), ts.const())

    def test_stochastic_variable(self):
        k = Kernel(Space.of(t=B), Space.of(w=B), [[F(1, 2)] * 2, [F(1, 3), F(2, 3)]])
        ts = TransSpace(k)
        noise = TransRv.from_kernel(Kernel(ts.source, Space.of(x=B), [[F(1, 4), F(3, 4)]] * 4))
        assert tci_holds(ts, noise, ts.t_rv(), ts.const())
        assert not tci_holds(ts, ts.proj({"w"}), ts.t_rv(), ts.const())

    def test_weak_vs_tci(self):
        # per-t the conditional of X given Z is fixed, but it differs across t
        k = Kernel(Space.of(t=B), Space.of(x=B, y=B),
                   [[F(1, 4)] * 4, [F(1, 2), F(1, 2), 0, 0]])
        ts = TransSpace(k)
        x, y, z = ts.proj({"x"}), ts.proj({"y"}), ts.const()
        assert weak_ci_check(ts, x, y, z)
        assert not tci_holds(ts, x, y, z)


class TestVariation:
    def _space(self, pts):
        w = Space([FiniteVar("w", tuple(str(i) for i in range(len(pts))))])
        ts = TransSpace(Kernel(Space(), w, [[F(1, len(pts))] * len(pts)]))
        x = ts.rv(Space.of(x=B), {(str(i),): (p[0],) for i, p in enumerate(pts)})
        y = ts.rv(Space.of(y=B), {(str(i),): (p[1],) for i, p in enumerate(pts)})
        return ts, x, y

    def test_function_of_z(self):
        ts, x, y = self._space([("0", "0"), ("1", "1")])
        assert variation_ci_check(x, y, x)

    def test_rectangle(self):
        ts, x, y = self._space([("0", "0"), ("0", "1"), ("1", "0"), ("1", "1")])
        assert variation_ci_check(x, y, ts.const())

    def test_l_shape(self):
        ts, x, y = self._space([("0", "0"), ("0", "1"), ("1", "0")])
        assert not variation_ci_check(x, y, ts.const())


class TestDeterministic:
    def _ts(self):
        t = Space.of(t1=B, t2="abc")
        return TransSpace(random_kernel(t, Space.of(w=B), random.Random(5)))

    def test_f_equals_h(self):
        ts = self._ts()
        h = ts.proj({"t2"})
        r = deterministic_ci_check(ts, h, h, ts.proj({"w"}))
        assert r.independent and r.consistent
        assert r.phi == {(c,): (c,) for c in "abc"}

    def test_reads_only_t2(self):
        ts = self._ts()
        f = ts.rv(Space.of(f=B), lambda d: {"f": "1" if d["t2"] == "c" else "0"})
        r = deterministic_ci_check(ts, f, ts.proj({"t2"}), ts.proj({"w"}))
        assert r.independent and r.consistent
        assert r.phi == {("a",): ("0",), ("b",): ("0",), ("c",): ("1",)}

    def test_injective_vs_constant(self):
        ts = self._ts()
        r = deterministic_ci_check(ts, ts.t_rv(), ts.const(), ts.proj({"w"}))
        assert not r.independent and r.phi is None and r.consistent

    def test_rejects_w_dependence(self):
        ts = self._ts()
        with pytest.raises(KernelError):
            deterministic_ci_check(ts, ts.proj({"w"}), ts.const(), ts.t_rv())


class TestBattery:
    def test_independent(self):
        rng = random.Random(6)
        kx = random_kernel(Space.of(t=B), Space.of(a=B), rng)
        ky = random_kernel(Space(), Space.of(b=B), rng)
        ts = TransSpace(product(ky, kx))
        r = equivalence_battery(ts, ts.proj({"b"}), ts.proj({"a"}), ts.const())
        assert all(r.values())

    def test_dependent(self):
        k = Kernel(Space(), Space.of(a=B, b=B), [[F(1, 2), 0, 0, F(1, 2)]])
        ts = TransSpace(k)
        r = equivalence_battery(ts, ts.proj({"a"}), ts.proj({"b"}), ts.const())
        assert not any(r[c] for c in "1234") and r["consistent"]

    def test_point_parameter(self):
        k = random_kernel(Space(), Space.of(a=B, b=B), random.Random(7), zero_prob=0)
        ts = TransSpace(k)
        x, y = ts.proj({"a"}), ts.proj({"b"})
        r = equivalence_battery(ts, x, y, ts.const())
        assert r["consistent"] and r["1"] == brute(ts, x, y, ts.const())


class TestStatistics:
    def _model(self):
        xs = Space.of(x="0123")
        th = Space.of(theta="ab")
        s = {("0",): "0", ("1",): "0", ("2",): "1", ("3",): "1"}
        h = {("0",): 1, ("1",): 3, ("2",): 2, ("3",): 5}
        g = {("0", ("a",)): 1, ("1", ("a",)): 4, ("0", ("b",)): 3, ("1", ("b",)): F(1, 2)}
        return fisher_neyman_model(xs, th, h, g, s), s

    def test_fisher_neyman_sufficient(self):
        model, s = self._model()
        ts = TransSpace(model)
        xv = ts.proj({"x"})
        sv = ts.rv(Space.of(s=B), lambda d: {"s": s[(d["x"],)]})
        rep = stat_concepts(model, sv, xv)
        assert rep.sufficient.independent
        assert not rep.ancillary.independent

    def test_identity_sufficient(self):
        model, _ = self._model()
        ts = TransSpace(model)
        xv = ts.proj({"x"})
        rep = stat_concepts(model, xv, xv)
        assert rep.sufficient.independent and rep.sufficient.witness.is_deterministic

    def test_constant_model_ancillary(self):
        model = Kernel(Space.of(theta=B), Space.of(x="abc"), [[F(1, 3)] * 3] * 2)
        ts = TransSpace(model)
        xv = ts.proj({"x"})
        assert stat_concepts(model, xv, xv).ancillary.independent

    def test_zero_total_rejected(self):
        with pytest.raises(KernelError):
            fisher_neyman_model(Space.of(x=B), Space.of(theta="a"), {("0",): 0, ("1",): 0},
                                {("0", ("a",)): 1}, {("0",): "0", ("1",): "0"})

    def test_invariant_reduction(self):
        # U | theta depends on theta only through gamma = theta mod 2
        th = Space.of(theta="0123")
        rows = [[F(1, 3), F(2, 3)], [F(3, 4), F(1, 4)]] * 2
        model = Kernel(th, Space.of(u=B), rows)
        ts = TransSpace(model)
        gamma = ts.rv(Space.of(g=B), lambda d: {"g": str(int(d["theta"]) % 2)})
        v, ok = invariant_reduction(model, ts.proj({"u"}), gamma)
        assert v.independent and ok

    def test_propensity_duplicate_rows(self):
        k = Kernel(Space.of(x="abc"), Space.of(y=B), [[F(1, 3), F(2, 3)], [F(1, 3), F(2, 3)], [1, 0]])
        ts = TransSpace(k)
        rep = propensity(k, {"identity": ts.t_rv()})
        assert rep.verdict.independent
        assert len(rep.e.codomain.vars[0].outcomes) == 2
        assert rep.minimal == {"identity": True}

    def test_propensity_constant(self):
        k = Kernel(Space.of(x="abc"), Space.of(y=B), [[F(1, 2)] * 2] * 3)
        rep = propensity(k)
        assert len(rep.e.codomain.vars[0].outcomes) == 1 and rep.verdict.independent

    def test_bayes_flat_likelihood(self):
        model = Kernel(Space.of(theta=B), Space.of(x="abc"), [[F(1, 3)] * 3] * 2)
        prior = Kernel(Space.of(pi=B), Space.of(theta=B), [[F(1, 4), F(3, 4)], [F(1, 2), F(1, 2)]])
        rep = bayes_posterior_check(model, prior)
        assert rep.posterior_ci.independent and rep.likelihood_ci.independent
        for x in "abc":
            for p in B:
                assert rep.posterior.row({"x": x, "pi": p}) == prior.row({"pi": p})

    def test_bayes_random(self):
        rng = random.Random(11)
        for _ in range(20):
            model = random_kernel(Space.of(theta=B), Space.of(x=B), rng)
            prior = random_kernel(Space.of(pi=B), Space.of(theta=B), rng)
            rep = bayes_posterior_check(model, prior)
            assert rep.posterior_ci.independent and rep.likelihood_ci.independent


class TestCodedSpace:
    def test_matches_map_of(self):
        rng = random.Random(12)
        for _ in range(30):
            ts, gens = random_tci_instance(rng, n_vars=3)
            cs = CodedSpace(ts, gens)
            for a in cs.carrier:
                for b in cs.carrier:
                    ja = join_rvs(*(cs_gen(cs, ts, gens, n) for n in sorted(a))) if a else ts.const()
                    jb = join_rvs(*(cs_gen(cs, ts, gens, n) for n in sorted(b))) if b else ts.const()
                    assert cs.leq(a, b) == (map_of(ts, ja, jb) is not None)

    def test_rejects_stochastic(self):
        ts = TransSpace(Kernel(Space(), Space.of(w=B), [[F(1, 2)] * 2]))
        noise = TransRv.from_kernel(Kernel(ts.source, Space.of(x=B), [[F(1, 2)] * 2] * 2))
        with pytest.raises(KernelError):
            CodedSpace(ts, {"n": noise})


def cs_gen(cs, ts, gens, n):
    return ts.t_rv() if n == "T" else gens[n]


# properties

@given(st.integers(0, 2**32 - 1))
def test_tci_matches_brute(seed):
    rng = random.Random(seed)
    ts, gens = random_tci_instance(rng, n_vars=3)
    x, y, z = gens.values()
    for args in ((x, y, z), (y, x, z), (x, ts.t_rv(), z), (x, y, ts.const()), (x, join_rvs(y, ts.t_rv()), z)):
        assert tci_holds(ts, *args) == brute(ts, *args)


@given(st.integers(0, 2**32 - 1))
def test_tci_implies_weak(seed):
    rng = random.Random(seed)
    ts, gens = random_tci_instance(rng, n_vars=3)
    x, y, z = gens.values()
    if tci_holds(ts, x, y, z):
        assert weak_ci_check(ts, x, y, z)


@given(st.integers(0, 2**32 - 1))
def test_weak_equals_tci_for_point_parameter(seed):
    rng = random.Random(seed)
    ts, gens = random_tci_instance(rng, n_vars=3, max_t=1)
    x, y, z = gens.values()
    assert weak_ci_check(ts, x, y, z) == tci_holds(ts, x, y, z)


@given(st.integers(0, 2**32 - 1))
def test_battery_consistent(seed):
    rng = random.Random(seed)
    ts, gens = random_tci_instance(rng, n_vars=3)
    x, y, z = gens.values()
    assert equivalence_battery(ts, x, y, z)["consistent"]


@given(st.integers(0, 2**32 - 1))
def test_map_of_matches_brute(seed):
    rng = random.Random(seed)
    ts, gens = random_tci_instance(rng, n_vars=2)
    x, y = gens.values()
    assert (map_of(ts, x, y) is not None) == brute_map_exists(ts.base, as_fn(x), as_fn(y))


@given(st.integers(0, 2**32 - 1))
def test_deterministic_ci_theorem(seed):
    rng = random.Random(seed)
    ts = random_trans_space(rng, max_t=5)
    tname = ts.t_space.names[0]
    outs = ts.t_space.vars[0].outcomes
    fmap = {o: str(rng.randrange(3)) for o in outs}
    hmap = {o: str(rng.randrange(3)) for o in outs}
    f = ts.rv(Space.of(f="012"), lambda d: {"f": fmap[d[tname]]})
    h = ts.rv(Space.of(h="012"), lambda d: {"h": hmap[d[tname]]})
    r = deterministic_ci_check(ts, f, h, ts.proj({"w"}))
    assert r.consistent
    assert r.independent == brute_map_exists(ts.base, as_fn(f), as_fn(h))


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_counterexample_rows_differ(seed):
    rng = random.Random(seed)
    ts, gens = random_tci_instance(rng, n_vars=3)
    x, y, z = gens.values()
    v = tci_check(ts, x, y, z)
    if not v.independent:
        (t1, y1, z1), (t2, y2, z2) = v.counterexample
        assert z1 == z2
        assert (t1, y1) != (t2, y2)
