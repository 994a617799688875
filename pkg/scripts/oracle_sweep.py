"""Compare the Dijkstra metric with the cover oracle on seeded random arcs."""

import argparse
import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from oracles import cover_distances  # noqa: E402
from qctree.arc import QuasiArc  # noqa: E402
from qctree.dyadic import generate  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--arcs", type=int, default=100)
    ap.add_argument("--max-K", type=int, default=6)
    ap.add_argument("--pairs", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    t0, bad = time.perf_counter(), 0
    for s in range(args.arcs):
        K = rng.randint(1, args.max_K)
        tree = generate("random", K, seed=args.seed * 10_000 + s, normalized=bool(s % 2))
        arc, ref = QuasiArc(tree), cover_distances(tree)
        n = arc.cells + 1
        miss = sum(arc.d(i, j) != ref[i][j]
                   for i, j in ((rng.randrange(n), rng.randrange(n)) for _ in range(args.pairs)))
        if miss:
            print(f"seed {s} K={K}: {miss} mismatches")
        bad += miss
    print(f"{args.arcs} arcs, {bad} mismatches, {time.perf_counter() - t0:.2f}s")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
