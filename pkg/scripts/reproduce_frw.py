"""Print the FRW outcome tables and halting numbers.

Shows each partition's exact distribution, the uniform-prior mixture, the
halting probability per prior, and a seeded Monte Carlo check of the
{I,II} halting probability and the mean number of rounds to halt.

    python scripts/reproduce_frw.py --rounds 1000000 --trials 10000
"""

import argparse
import time

import numpy as np

from obspart import builtin_frw
from obspart.engine import BLANK, exact_distribution, halt_probability, mixture_distribution
from obspart.sampler import batch_counts, halt_trials, sample_batch
from obspart.scenario import PartitionPrior, format_partition


def table(dist):
    for t in sorted(dist.entries):
        p = dist.entries[t]
        if p > 0:
            print(f"  {' '.join(f'{x:8s}' for x in t)}  {p:.6f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rounds", type=int, default=10**6)
    ap.add_argument("--trials", type=int, default=10**4)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    s = builtin_frw()
    for p in s.partitions():
        print(f"partition {format_partition(p, s)}")
        table(exact_distribution(s, p))
    uniform = PartitionPrior.uniform(s.partitions())
    print("uniform mixture")
    table(mixture_distribution(s, uniform))

    print("halting probability")
    for p in s.partitions():
        print(f"  point mass {format_partition(p, s):8s} {halt_probability(s, PartitionPrior.point(p)):.6f}")
    print(f"  uniform prior       {halt_probability(s, uniform):.6f}")

    both = PartitionPrior.point({"I", "II"})
    t0 = time.perf_counter()
    counts = batch_counts(s, sample_batch(s, both, args.seed, args.rounds))
    freq = counts.get((BLANK, BLANK, "okbar", "ok"), 0) / args.rounds
    print(f"sampled halting frequency under {{I,II}}: {freq:.6f} over {args.rounds} rounds ({time.perf_counter() - t0:.1f} s)")
    t0 = time.perf_counter()
    rounds = [r for r in halt_trials(s, both, args.seed, 10**4, args.trials) if r is not None]
    print(f"mean rounds to halt: {np.mean(rounds):.3f} over {len(rounds)} trials ({time.perf_counter() - t0:.1f} s)")


if __name__ == "__main__":
    main()
