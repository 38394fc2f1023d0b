import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_joint, kernel_entries
from strategies import corpus_file
from transci.cbn import (
    STAR, Cbn, CbnError, DoQuery, GmpBudgetError, backdoor_adjust, do_calculus,
    gmp_verify, hard_intervene_cbn, interventional_kernel, joint_kernel, load_cbn,
    marginalize_cbn, observational_kernel, random_cbn, soft_intervene_cbn, topological_orders,
)
from transci.graph import Cdmg, marginalize_graph
from transci.kernel import FiniteVar, Kernel, Space, compose, disintegrate, marginalize, product
from transci.separation import sigma_separated
from transci.tci import TransSpace, tci_check

B = ("0", "1")


def make_cbn(inputs, outputs, edges, rows, latent=(), outcomes=B):
    g = Cdmg.build(inputs, outputs, edges)
    spaces = {v: FiniteVar(v, outcomes) for v in g.nodes}
    sp = lambda vs: Space(spaces[x] for x in vs)  # noqa: E731
    kernels = {v: Kernel(sp(g._pa[v]), sp([v]), rows[v]) for v in outputs}
    return Cbn(g, spaces, kernels, frozenset(latent))


@pytest.fixture(scope="module")
def chain():
    return load_cbn(corpus_file("chain_cbn.json"))


@pytest.fixture(scope="module")
def confounder():
    return load_cbn(corpus_file("confounder_cbn.json"))


@pytest.fixture(scope="module")
def fig1():
    return load_cbn(corpus_file("fig1_cbn.json"))


class TestValidation:
    def test_rejects_cycles(self):
        g = Cdmg.build((), ["a", "b"], [("a", "b"), ("b", "a")])
        with pytest.raises(CbnError):
            Cbn(g, {v: FiniteVar(v, B) for v in "ab"}, {})

    def test_rejects_bidirected(self):
        g = Cdmg.build((), ["a", "b"], bidirected=[("a", "b")])
        with pytest.raises(CbnError):
            Cbn(g, {v: FiniteVar(v, B) for v in "ab"}, {})

    def test_kernel_must_read_parents(self):
        g = Cdmg.build((), ["a", "b"], [("a", "b")])
        spaces = {v: FiniteVar(v, B) for v in "ab"}
        bad = {"a": Kernel(Space(), Space([spaces["a"]]), [[1, 0]]),
               "b": Kernel(Space(), Space([spaces["b"]]), [[1, 0]])}
        with pytest.raises(CbnError):
            Cbn(g, spaces, bad)

    def test_json_roundtrip(self, confounder):
        assert Cbn.from_dict(confounder.to_dict()) == confounder

    def test_malformed(self):
        with pytest.raises(CbnError):
            Cbn.from_dict({"graph": {}})


class TestJoint:
    def test_single_node(self):
        m = make_cbn((), ["v"], [], {"v": [[F(1, 3), F(2, 3)]]})
        assert joint_kernel(m) == m.kernels["v"]

    def test_chain_entries(self, chain):
        k = joint_kernel(chain)
        pa, pb = chain.kernels["a"], chain.kernels["b"]
        for j in B:
            for a in B:
                for b in B:
                    expect = pa.prob({"a": a}, {"j": j}) * pb.prob({"b": b}, {"a": a})
                    assert k.prob({"a": a, "b": b}, {"j": j}) == expect

    def test_fig1_brute(self, fig1):
        k = joint_kernel(fig1)
        assert all(sum(r) == 1 for r in k.rows)
        assert kernel_entries(k) == brute_joint(fig1)

    def test_order_invariance(self, fig1):
        orders = topological_orders(fig1, limit=3)
        assert len(orders) == 3
        ks = [joint_kernel(fig1, o) for o in orders]
        assert ks[0] == ks[1] == ks[2]

    def test_bad_order(self, chain):
        with pytest.raises(CbnError):
            joint_kernel(chain, ["b", "a"])


class TestObservational:
    def test_no_latent(self, fig1):
        assert observational_kernel(fig1) == joint_kernel(fig1)

    def test_confounder_dependence(self, confounder):
        obs = observational_kernel(confounder)
        assert obs.target.names == ("a", "b")
        ts = TransSpace(obs)
        assert not tci_check(ts, ts.proj({"a"}), ts.proj({"b"}), ts.const()).independent
        assert marginalize_graph(confounder.graph, {"u"}).bidirected == {("a", "b")}

    def test_deterministic(self):
        m = make_cbn(["j"], ["a", "b"], [("j", "a"), ("a", "b")],
                     {"a": [[0, 1], [1, 0]], "b": [[1, 0], [0, 1]]})
        assert observational_kernel(m).is_deterministic


class TestInterventions:
    def test_hard_empty(self, fig1):
        assert hard_intervene_cbn(fig1, set()) == fig1

    def test_hard_chain(self, chain):
        k = interventional_kernel(chain, {"a"})
        assert k.source.names == ("a", "j")
        for a in B:
            for j in B:
                assert k.row({"a": a, "j": j}) == chain.kernels["b"].row({"a": a})

    def test_do_differs_from_conditioning(self, confounder):
        do = interventional_kernel(confounder, {"a"})
        cond = disintegrate(observational_kernel(confounder), {"a"})
        assert do.prob({"b": "1"}, {"a": "1"}) == F(7, 10)
        assert cond.prob({"b": "1"}, {"a": "1"}) == F(41, 50)

    def test_soft_star_is_observational(self, fig1):
        soft = soft_intervene_cbn(fig1, {"v4", "v7"})
        k = observational_kernel(soft)
        obs = observational_kernel(fig1)
        for s in obs.source.assignments:
            src = dict(zip(obs.source.names, s), **{"I:v4": STAR, "I:v7": STAR})
            assert k.row(src) == obs.row(s)

    def test_soft_point_is_hard(self, fig1):
        soft = observational_kernel(soft_intervene_cbn(fig1, {"v4"}))
        hard = interventional_kernel(fig1, {"v4"})
        for s in hard.source.assignments:
            src = dict(zip(hard.source.names, s))
            row = soft.row(dict(src, **{"I:v4": src.pop("v4")}))
            got = {}
            for t, p in row.items():
                d = dict(zip(soft.target.names, t))
                assert d.pop("v4") == dict(zip(hard.source.names, s))["v4"]
                key = tuple(d[n] for n in hard.target.names)
                got[key] = got.get(key, 0) + p
            assert got == hard.row(s)

    def test_soft_empty(self, fig1):
        assert soft_intervene_cbn(fig1, set()) == fig1

    def test_soft_star_collision(self):
        m = make_cbn((), ["v"], [], {"v": [[F(1, 2), F(1, 2)]]}, outcomes=("0", STAR))
        with pytest.raises(CbnError):
            soft_intervene_cbn(m, {"v"})

    def test_soft_on_input_rejected(self, chain):
        with pytest.raises(CbnError):
            soft_intervene_cbn(chain, {"j"})


class TestMarginalize:
    def test_empty(self, fig1):
        assert marginalize_cbn(fig1, set()) == fig1

    def test_chain(self):
        m = make_cbn((), ["a", "m", "b"], [("a", "m"), ("m", "b")],
                     {"a": [[F(1, 3), F(2, 3)]], "m": [[F(1, 4), F(3, 4)], [1, 0]],
                      "b": [[F(1, 2), F(1, 2)], [F(1, 5), F(4, 5)]]})
        mm = marginalize_cbn(m, {"m"})
        obs = observational_kernel(mm)
        pb_a = compose(m.kernels["b"], m.kernels["m"])
        assert obs == product(pb_a, m.kernels["a"])
        assert joint_kernel(mm) == joint_kernel(m)
        assert mm.marginal_graph.directed == {("a", "b")}


class TestGmp:
    def test_fig1_separated_pairs(self, fig1):
        rep = gmp_verify(fig1, [({"v7"}, {"v1"}, {"v2"}), ({"v7"}, {"v1", "v5"}, {"v2", "v4", "v6"})],
                         witnesses=True)
        assert rep.separated == 2 and rep.passed
        w = rep.witnesses[(frozenset({"v7"}), frozenset({"v1"}), frozenset({"v2"}))]
        assert w.source.names == ("v2",) and w.target.names == ("v7",)

    def test_ancestral_set(self, fig1):
        a = {"v4", "v1"}
        g = fig1.graph
        va, ja, jna = a & g.outputs, a & g.inputs, g.inputs - a
        assert sigma_separated(g, va, jna, ja)
        rep = gmp_verify(fig1, [(va, jna, ja)])
        assert rep.separated == 1 and rep.passed

    def test_all_triples(self, fig1):
        rep = gmp_verify(fig1)
        assert rep.checked == 4 ** 8 - 3 ** 8
        assert rep.passed and rep.separated > 0

    def test_empty_graph(self):
        rep = gmp_verify(Cbn(Cdmg.build(), {}, {}))
        assert rep.passed and rep.checked == 0

    def test_budget(self, fig1):
        with pytest.raises(GmpBudgetError) as exc:
            gmp_verify(fig1, max_nodes=4, samples=50)
        assert exc.value.partial.checked == 50 and exc.value.partial.passed

    def test_unknown_scope(self, fig1):
        with pytest.raises(CbnError):
            gmp_verify(fig1, "bogus")


class TestDoCalculus:
    def test_rule1_disconnected(self):
        m = make_cbn((), ["a", "b", "c"], [("a", "b")],
                     {"a": [[F(1, 3), F(2, 3)]], "b": [[F(1, 4), F(3, 4)], [F(1, 2), F(1, 2)]],
                      "c": [[F(2, 5), F(3, 5)]]})
        rep = do_calculus(m, DoQuery.of({"b"}, {"c"}, {"a"}))
        assert rep.applicable and rep.ok
        assert rep.kernel.source.names == ("a",)

    def test_rule2_unconfounded(self):
        m = make_cbn((), ["a", "b"], [("a", "b")],
                     {"a": [[F(1, 3), F(2, 3)]], "b": [[F(1, 4), F(3, 4)], [F(1, 2), F(1, 2)]]})
        rep = do_calculus(m, DoQuery.of({"b"}, {"a"}, mode="rule2"))
        assert rep.applicable and rep.ok
        assert [n for n, _ in rep.checks] == ["tci", "do({})", "do({a})"]

    def test_rule2_confounded(self, confounder):
        rep = do_calculus(confounder, DoQuery.of({"b"}, {"a"}, mode="rule2"))
        assert not rep.applicable and rep.kernel is None
        assert str(rep.open_walk) == "b <-> a <- I:a"

    def test_rule3(self, chain):
        # b does not depend on an intervention on a node downstream of it
        m = make_cbn((), ["a", "b"], [("a", "b")],
                     {"a": [[F(1, 3), F(2, 3)]], "b": [[F(1, 4), F(3, 4)], [F(1, 2), F(1, 2)]]})
        rep = do_calculus(m, DoQuery.of({"a"}, {"b"}, mode="rule3"))
        assert rep.applicable and rep.ok

    def test_not_disjoint(self, chain):
        with pytest.raises(CbnError):
            do_calculus(chain, DoQuery.of({"a"}, {"a"}))

    def test_unknown_mode(self, chain):
        with pytest.raises(CbnError):
            do_calculus(chain, DoQuery.of({"b"}, {"a"}, mode="rule9"))


class TestBackdoor:
    def test_observed_confounder(self, confounder):
        m = Cbn(confounder.graph, confounder.spaces, confounder.kernels)
        rep = backdoor_adjust(m, {"b"}, {"a"}, set(), {"u"}, set())
        assert rep.applicable and rep.ok
        assert rep.adjusted.prob({"b": "1"}, {"a": "1"}) == F(7, 10)

    def test_latent_confounder_blocks(self, confounder):
        rep = backdoor_adjust(confounder, {"b"}, {"a"}, set(), set(), set())
        assert not rep.applicable and rep.open_walk is not None

    def test_no_backdoor(self, chain):
        rep = backdoor_adjust(chain, {"b"}, {"a"}, set(), set(), {"j"})
        assert rep.applicable and rep.ok
        assert rep.adjusted == interventional_kernel(chain, {"a", "j"})

    def test_requires_inputs_in_d(self, chain):
        with pytest.raises(CbnError):
            backdoor_adjust(chain, {"b"}, {"a"}, set(), set(), set())


# properties

@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_random_joint_matches_brute(seed):
    m = random_cbn(random.Random(seed), max_outputs=4)
    assert kernel_entries(joint_kernel(m)) == brute_joint(m)
    orders = topological_orders(m, limit=2)
    assert all(joint_kernel(m, o) == joint_kernel(m) for o in orders)


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1))
def test_random_gmp(seed):
    m = random_cbn(random.Random(seed), max_outputs=4, max_inputs=1)
    assert gmp_verify(m).passed


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["rule1", "rule2", "rule3"]))
def test_random_do_calculus_sound(seed, rule):
    rng = random.Random(seed)
    m = random_cbn(rng, max_outputs=4)
    obs = sorted(m.observed)
    labels = [rng.randrange(4) for _ in obs]
    a = {v for v, l in zip(obs, labels) if l == 0} or {obs[0]}
    b = {v for v, l in zip(obs, labels) if l == 1} - a
    c = {v for v, l in zip(obs, labels) if l == 2} - a
    rep = do_calculus(m, DoQuery.of(a, b, c, set(), rule))
    if rep.applicable:
        assert rep.ok
    else:
        assert rep.open_walk is not None
