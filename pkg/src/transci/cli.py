"""``tci`` command line.

Exit codes: 0 success/true, 1 false or not applicable, 2 input error (with a
JSON error object on stdout). Paths may be written ``corpus:<name>`` to read a
bundled example.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from importlib import resources
from typing import Sequence

from . import __version__
from .cbn import (
    Cbn,
    CbnError,
    DoQuery,
    GmpBudgetError,
    backdoor_adjust,
    do_calculus,
    gmp_verify,
    hard_intervene_cbn,
    observational_kernel,
    soft_intervene_cbn,
)
from .graph import (
    Cdmg,
    GraphError,
    acyclify,
    ancestors,
    descendants,
    hard_intervene,
    marginalize_graph,
    soft_extend,
    topological_order,
)
from .kernel import Kernel, KernelError, TransRv, compose, disintegrate, marginalize, product
from .reparam import RealEmbedding, ReparamError, verify_reparam
from .separation import sigma_separated, sigma_separated_oracle
from .separoid import SeparoidError, check_rules, merge_reports, shrink, table_instance
from .tci import TransSpace, tci_check

EXIT_TRUE, EXIT_FALSE, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D401 - argparse hook
        raise InputError(message)


# input helpers ------------------------------------------------------------------

def _read_json(path: str):
    try:
        if path.startswith("corpus:"):
            name = path.split(":", 1)[1]
            if not name.endswith(".json"):
                name += ".json"
            text = resources.files("transci").joinpath("corpus", name).read_text()
        else:
            with open(path) as fh:
                text = fh.read()
        return json.loads(text)
    except (OSError, FileNotFoundError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None


def _nodes(values: Sequence[str] | None) -> list[str]:
    out: list[str] = []
    for v in values or ():
        out += [x for x in v.split(",") if x]
    return out


def _rv(ts: TransSpace, spec: str | None) -> TransRv:
    """A variable from a file (``{"project": [...]}`` or a kernel) or a comma list of names."""
    if spec is None or spec in ("", "*"):
        return ts.const()
    if spec.endswith(".json") or spec.startswith("corpus:"):
        d = _read_json(spec)
        if isinstance(d, dict) and "project" in d:
            names = list(d["project"])
            if not names:
                return ts.const()
            unknown = set(names) - set(ts.source.names)
            if unknown:
                raise InputError(f"unknown variable(s) {sorted(unknown)}")
            return ts.proj(names)
        k = Kernel.from_dict(d)
        if k.source != ts.source:
            raise InputError("variable kernels must read exactly the W and T variables")
        return TransRv.from_kernel(k)
    names = _nodes([spec])
    unknown = set(names) - set(ts.source.names)
    if unknown:
        raise InputError(f"unknown variable(s) {sorted(unknown)}")
    return ts.proj(names)


def _seed(args) -> int:
    env = os.environ.get("TCI_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise InputError(f"TCI_SEED must be an integer, got {env!r}") from None
    return args.seed


# output -------------------------------------------------------------------------------

def _emit(obj, fmt: str) -> None:
    if fmt == "pretty":
        sys.stdout.write(_pretty(obj) + "\n")
    else:
        sys.stdout.write(json.dumps(obj, sort_keys=True, ensure_ascii=False) + "\n")


def _pretty(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        lines = []
        for k in sorted(obj):
            v = obj[k]
            if isinstance(v, (dict, list)) and v:
                lines.append(f"{pad}{k}:")
                lines.append(_pretty(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {json.dumps(v, ensure_ascii=False)}")
        return "\n".join(lines)
    if isinstance(obj, list):
        if all(not isinstance(v, (dict, list)) for v in obj):
            return pad + ", ".join(json.dumps(v, ensure_ascii=False) for v in obj)
        return "\n".join(f"{pad}-\n{_pretty(v, indent + 1)}" for v in obj)
    return pad + json.dumps(obj, ensure_ascii=False)


# commands -------------------------------------------------------------------------------

def cmd_sep(args):
    g = Cdmg.from_dict(_read_json(args.graph))
    a, b, c = _nodes(args.a), _nodes(args.b), _nodes(args.c)
    if args.oracle:
        sep = sigma_separated_oracle(g, a, b, c, raw=args.raw)
        return {"separated": sep}, sep
    v = sigma_separated(g, a, b, c, raw=args.raw)
    out = {"separated": v.separated}
    if v.witness_walk is not None:
        out["witness_walk"] = str(v.witness_walk)
    return out, v.separated


def cmd_graph(args):
    g = Cdmg.from_dict(_read_json(args.graph))
    nodes = _nodes(args.nodes)
    op = args.op
    if op == "info":
        order = topological_order(g)
        out = {"graph": g.to_dict(), "acyclic": order is not None,
               "topological_order": order,
               "strongly_connected": sorted(sorted(s) for s in {frozenset(x) for x in g._sc.values()})}
        if nodes:
            out["ancestors"] = sorted(ancestors(g, nodes))
            out["descendants"] = sorted(descendants(g, nodes))
        return out, True
    fn = {"acyclify": lambda: acyclify(g), "marginalize": lambda: marginalize_graph(g, nodes),
          "hard": lambda: hard_intervene(g, nodes), "soft": lambda: soft_extend(g, nodes)}[op]
    return fn().to_dict(), True


def cmd_kernel(args):
    if args.op in ("compose", "product"):
        if not (args.left and args.right):
            raise InputError("compose/product need --left and --right")
        q = Kernel.from_dict(_read_json(args.left))
        k = Kernel.from_dict(_read_json(args.right))
        res = compose(q, k) if args.op == "compose" else product(q, k)
    else:
        if not args.kernel:
            raise InputError(f"{args.op} needs --kernel")
        k = Kernel.from_dict(_read_json(args.kernel))
        names = _nodes(args.vars)
        res = marginalize(k, names) if args.op == "marginalize" else disintegrate(k, names)
    out = res.to_dict()
    if res.approximate:
        out["approximate"] = True
    return out, True


def cmd_ci(args):
    base = Kernel.from_dict(_read_json(args.space))
    ts = TransSpace(base)
    x, y, z = _rv(ts, args.x), _rv(ts, args.y), _rv(ts, args.z)
    v = tci_check(ts, x, y, z, verify=True)
    return v.to_dict(), v.independent


def _fuzz_instances(args, seed):
    from .generators import random_cdmg, random_tci_instance
    from .separation import sigma_separoid_instance
    from .tci import tci_separoid_instance

    rng = random.Random(seed)
    rel = args.relation
    if rel.startswith("file:"):
        inst = table_instance(_read_json(rel[5:]))
        return [inst]
    out = []
    for _ in range(args.instances):
        if rel == "sigma":
            out.append(sigma_separoid_instance(random_cdmg(rng, args.max_nodes)))
        elif rel == "tci":
            ts, gens = random_tci_instance(rng)
            out.append(tci_separoid_instance(ts, gens))
        else:
            raise InputError(f"unknown relation {rel!r}")
    return out


def cmd_fuzz(args):
    seed = _seed(args)
    insts = _fuzz_instances(args, seed)
    batches, shrunk = [], {}
    for i, inst in enumerate(insts):
        reps = check_rules(inst, samples=args.samples, seed=seed + i,
                           exhaustive_limit=args.exhaustive_limit)
        for r in reps:
            if r.failures and r.rule not in shrunk:
                shrunk[r.rule] = [str(x) if not isinstance(x, frozenset) else sorted(map(str, x))
                                  for x in shrink(inst, r.rule, r.failures[0])]
        batches.append(reps)
    merged = merge_reports(batches)
    ok = all(r.passed for r in merged)
    rules = []
    for r in merged:
        d = {"rule": r.rule, "tested": r.tested, "premises_held": r.premises_held,
             "failures": len(r.failures), "passed": r.passed}
        if r.rule in shrunk:
            d["counterexample"] = shrunk[r.rule]
        rules.append(d)
    return {"relation": args.relation, "instances": len(insts), "seed": seed,
            "passed": ok, "rules": rules}, ok


def cmd_cbn(args):
    m = Cbn.from_dict(_read_json(args.model))
    if args.op == "verify-gmp":
        try:
            rep = gmp_verify(m, args.scope, seed=_seed(args))
        except GmpBudgetError as exc:
            out = exc.partial.to_dict()
            out["budget_error"] = str(exc)
            return out, False
        return rep.to_dict(), rep.passed
    if args.op == "docalc":
        q = DoQuery.of(_nodes(args.a), _nodes(args.b), _nodes(args.c), _nodes(args.d),
                       f"rule{args.rule}")
        rep = do_calculus(m, q)
        return rep.to_dict(), rep.applicable and rep.ok
    if args.op == "backdoor":
        d = _nodes(args.d) or sorted(m.inputs)
        rep = backdoor_adjust(m, _nodes(args.a), _nodes(args.b), _nodes(args.c), _nodes(args.f), d)
        return rep.to_dict(), rep.applicable and rep.ok
    if args.op == "intervene":
        out = m
        if args.hard:
            out = hard_intervene_cbn(out, _nodes(args.hard))
        if args.soft:
            out = soft_intervene_cbn(out, _nodes(args.soft))
        res = out.to_dict()
        if args.observational:
            res["observational"] = observational_kernel(out).to_dict()
        return res, True
    raise InputError(f"unknown cbn command {args.op!r}")  # pragma: no cover


def cmd_reparam(args):
    k = Kernel.from_dict(_read_json(args.kernel))
    emb = RealEmbedding.from_dict(_read_json(args.embedding))
    rep = verify_reparam(k, emb)
    return rep.to_dict(), rep.ok


# parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("json", "pretty"), default="json")
    common.add_argument("--pretty", action="store_const", dest="format", const="pretty")
    common.add_argument("--seed", type=int, default=0)

    p = _Parser(prog="tci", description="Transitional conditional independence toolkit.")
    p.add_argument("--version", action="version", version=f"tci {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sep", parents=[common], help="σ-separation query")
    s.add_argument("--graph", required=True)
    for n in ("a", "b", "c"):
        s.add_argument(f"--{n}", action="append", default=[], help="comma separated nodes")
    s.add_argument("--raw", action="store_true", help="do not add the input nodes to B")
    s.add_argument("--oracle", action="store_true", help="use the walk-state search instead")
    s.set_defaults(func=cmd_sep)

    s = sub.add_parser("graph", parents=[common], help="graph surgeries and facts")
    s.add_argument("op", choices=("info", "acyclify", "marginalize", "hard", "soft"))
    s.add_argument("--graph", required=True)
    s.add_argument("--nodes", action="append", default=[])
    s.set_defaults(func=cmd_graph)

    s = sub.add_parser("kernel", parents=[common], help="kernel algebra")
    s.add_argument("op", choices=("compose", "product", "marginalize", "disintegrate"))
    s.add_argument("--left")
    s.add_argument("--right")
    s.add_argument("--kernel")
    s.add_argument("--vars", action="append", default=[])
    s.set_defaults(func=cmd_kernel)

    s = sub.add_parser("ci", parents=[common], help="transitional conditional independence")
    s.add_argument("--space", required=True, help="kernel K(W|T)")
    s.add_argument("--x", required=True)
    s.add_argument("--y")
    s.add_argument("--z")
    s.set_defaults(func=cmd_ci)

    s = sub.add_parser("fuzz", parents=[common], help="rule fuzzers")
    s.add_argument("target", choices=("separoid",))
    s.add_argument("--relation", default="sigma", help="sigma | tci | file:<oracle.json>")
    s.add_argument("--instances", type=int, default=20)
    s.add_argument("--samples", type=int, default=200)
    s.add_argument("--max-nodes", type=int, default=5)
    s.add_argument("--exhaustive-limit", type=int, default=0)
    s.set_defaults(func=cmd_fuzz)

    s = sub.add_parser("cbn", parents=[common], help="causal Bayesian networks")
    s.add_argument("op", choices=("verify-gmp", "docalc", "backdoor", "intervene"))
    s.add_argument("model")
    s.add_argument("--scope", default="all", help="all | sample | sample:N")
    s.add_argument("--rule", choices=("1", "2", "3"), default="1")
    for n in ("a", "b", "c", "d", "f", "hard", "soft"):
        s.add_argument(f"--{n}", action="append", default=[])
    s.add_argument("--observational", action="store_true")
    s.set_defaults(func=cmd_cbn)

    s = sub.add_parser("reparam", parents=[common], help="quantile reparameterization")
    s.add_argument("op", choices=("verify",))
    s.add_argument("--kernel", required=True)
    s.add_argument("--embedding", required=True)
    s.set_defaults(func=cmd_reparam)
    return p


def run(argv: Sequence[str] | None = None) -> int:
    fmt = "json"
    try:
        args = build_parser().parse_args(argv)
        fmt = args.format
        out, verdict = args.func(args)
    except InputError as exc:
        _emit({"error": {"type": "usage", "message": str(exc)}}, fmt)
        return EXIT_INPUT
    except (GraphError, KernelError, CbnError, ReparamError, SeparoidError) as exc:
        _emit({"error": {"type": type(exc).__name__, "message": str(exc)}}, fmt)
        return EXIT_INPUT
    _emit(out, fmt)
    return EXIT_TRUE if verdict else EXIT_FALSE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
