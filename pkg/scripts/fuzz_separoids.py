"""Fuzz the separoid rules for σ-separation and TCI over several seeds.

    python scripts/fuzz_separoids.py --seeds 5 --instances 50 --samples 200
"""

from __future__ import annotations

import argparse
import random
import time

from transci.generators import random_cdmg, random_tci_instance
from transci.separation import sigma_separoid_instance
from transci.separoid import check_rules, merge_reports
from transci.tci import tci_separoid_instance


def run(relation: str, seed: int, instances: int, samples: int) -> tuple[int, list[str]]:
    rng = random.Random(seed)
    batches = []
    for i in range(instances):
        if relation == "sigma":
            inst = sigma_separoid_instance(random_cdmg(rng, 6))
        else:
            inst = tci_separoid_instance(*random_tci_instance(rng))
        batches.append(check_rules(inst, samples=samples, seed=seed * 10_000 + i, exhaustive_limit=0))
    reports = merge_reports(batches)
    return sum(r.premises_held for r in reports), [r.rule for r in reports if not r.passed]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--instances", type=int, default=50)
    ap.add_argument("--samples", type=int, default=200)
    args = ap.parse_args()
    failed = False
    for relation in ("sigma", "tci"):
        for seed in range(args.seeds):
            t0 = time.perf_counter()
            held, bad = run(relation, seed, args.instances, args.samples)
            failed |= bool(bad)
            print(f"{relation:5s} seed={seed} premises_held={held} "
                  f"violated={bad or 'none'} {time.perf_counter() - t0:.1f}s")
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
