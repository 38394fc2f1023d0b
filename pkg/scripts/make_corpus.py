"""Regenerate the bundled corpus under src/transci/corpus (deterministic)."""

from __future__ import annotations

import json
import random
from fractions import Fraction as F
from pathlib import Path

from transci.cbn import Cbn
from transci.graph import Cdmg
from transci.kernel import FiniteVar, Kernel, Space, random_kernel
from transci.reparam import RealEmbedding

OUT = Path(__file__).resolve().parents[1] / "src" / "transci" / "corpus"

FIG1 = Cdmg.build(
    ["v1", "v2"], ["v3", "v4", "v5", "v6", "v7", "v8"],
    [("v1", "v4"), ("v2", "v6"), ("v2", "v7"), ("v4", "v5"), ("v4", "v6"),
     ("v3", "v8"), ("v3", "v7"), ("v6", "v5")],
)
FIG2 = Cdmg.build(
    ["v2", "v3"], ["v1", "v4", "v5", "v6", "v7", "v8"],
    [("v2", "v4"), ("v3", "v6"), ("v1", "v4"), ("v1", "v5"), ("v4", "v7"),
     ("v5", "v7"), ("v7", "v8"), ("v6", "v8")],
    [("v1", "v6")],
)


def dump(name: str, obj) -> None:
    (OUT / name).write_text(json.dumps(obj, indent=1, sort_keys=True, ensure_ascii=False) + "\n")


def binary(v: str) -> FiniteVar:
    return FiniteVar(v, ("0", "1"))


def table(m_spaces, v, parents, rows) -> Kernel:
    src = Space(m_spaces[p] for p in parents)
    return Kernel(src, Space([m_spaces[v]]), [[F(p) for p in r] for r in rows])


def random_cbn_on(g: Cdmg, seed: int, latent=()) -> Cbn:
    rng = random.Random(seed)
    spaces = {v: binary(v) for v in g.nodes}
    kernels = {v: random_kernel(Space(spaces[p] for p in g._pa[v]), Space([spaces[v]]), rng,
                                max_den=6, zero_prob=0.0) for v in g.outputs}
    return Cbn(g, spaces, kernels, frozenset(latent))


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    dump("fig1.json", FIG1.to_dict())
    dump("fig2.json", FIG2.to_dict())
    dump("fig1_cbn.json", random_cbn_on(FIG1, 1).to_dict())

    # latent confounder u of a and b, with a -> b
    g = Cdmg.build([], ["u", "a", "b"], [("u", "a"), ("u", "b"), ("a", "b")])
    sp = {v: binary(v) for v in "uab"}
    conf = Cbn(g, sp, {
        "u": table(sp, "u", [], [["1/2", "1/2"]]),
        "a": table(sp, "a", ["u"], [["4/5", "1/5"], ["1/5", "4/5"]]),
        "b": table(sp, "b", ["a", "u"], [["9/10", "1/10"], ["1/2", "1/2"],
                                         ["1/2", "1/2"], ["1/10", "9/10"]]),
    }, frozenset({"u"}))
    dump("confounder_cbn.json", conf.to_dict())

    # observed confounder z of a and b; z blocks the backdoor a <- z -> b
    g = Cdmg.build([], ["z", "a", "b"], [("z", "a"), ("z", "b"), ("a", "b")])
    sp = {v: binary(v) for v in "zab"}
    back = Cbn(g, sp, {
        "z": table(sp, "z", [], [["1/3", "2/3"]]),
        "a": table(sp, "a", ["z"], [["3/4", "1/4"], ["1/4", "3/4"]]),
        "b": table(sp, "b", ["a", "z"], [["1/2", "1/2"], ["1/3", "2/3"],
                                         ["1/5", "4/5"], ["1/6", "5/6"]]),
    })
    dump("backdoor_cbn.json", back.to_dict())

    # input j -> a -> b chain
    g = Cdmg.build(["j"], ["a", "b"], [("j", "a"), ("a", "b")])
    sp = {v: binary(v) for v in "jab"}
    chain = Cbn(g, sp, {
        "a": table(sp, "a", ["j"], [["2/3", "1/3"], ["1/4", "3/4"]]),
        "b": table(sp, "b", ["a"], [["1/2", "1/2"], ["0", "1"]]),
    })
    dump("chain_cbn.json", chain.to_dict())

    # a transition space K(w1, w2 | t) with w1 independent of t and w2 a copy of t
    t = FiniteVar("t", ("0", "1"))
    w1, w2 = FiniteVar("w1", ("0", "1")), FiniteVar("w2", ("0", "1"))
    ts = Kernel(Space([t]), Space([w1, w2]), [[F(1, 3), F(0), F(2, 3), F(0)],
                                             [F(0), F(1, 3), F(0), F(2, 3)]])
    dump("space.json", ts.to_dict())
    dump("x_w1.json", {"project": ["w1"]})
    dump("x_w2.json", {"project": ["w2"]})
    dump("y_t.json", {"project": ["t"]})
    dump("z_none.json", {"project": []})

    # deterministic kernels for composition
    x, y = FiniteVar("x", ("0", "1", "2")), FiniteVar("y", ("0", "1"))
    z = FiniteVar("z", ("a", "b"))
    k = Kernel(Space([x]), Space([y]), [[1, 0], [0, 1], [0, 1]])
    q = Kernel(Space([y]), Space([z]), [[0, 1], [1, 0]])
    dump("delta_k.json", k.to_dict())
    dump("delta_q.json", q.to_dict())

    # reparameterization: K(X|Z) over three atoms with an embedding
    xv = FiniteVar("x", ("lo", "mid", "hi"))
    zv = FiniteVar("z", ("0", "1"))
    rk = Kernel(Space([zv]), Space([xv]), [[F(1, 2), F(0), F(1, 2)], [F(1, 6), F(1, 3), F(1, 2)]])
    dump("reparam_kernel.json", rk.to_dict())
    dump("reparam_embedding.json", RealEmbedding(xv, (F(-1), F(1, 2), F(3))).to_dict())


if __name__ == "__main__":
    main()
