"""Sampling spread of the EM and LS estimates on uniformized FRW data.

For each seed, draws N rounds from a known prior, fills blanks uniformly and
re-estimates the partition weights. Prints the L1 error of EM, the L1 gap
between EM and LS, and their quantiles over seeds.

    python scripts/calibrate_inference.py --seeds 20 --rounds 1000000
"""

import argparse
import time

import numpy as np

from obspart import builtin_frw
from obspart.inference import build_model_matrix, estimate_em, estimate_ls
from obspart.sampler import batch_counts, fill_blanks, sample_batch
from obspart.scenario import PartitionPrior

TRUTH = (0.1, 0.2, 0.3, 0.4)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--rounds", type=int, default=10**6)
    ap.add_argument("--first-seed", type=int, default=100)
    args = ap.parse_args()

    s = builtin_frw()
    parts = s.partitions()
    prior = PartitionPrior(dict(zip(parts, TRUTH)))
    m = build_model_matrix(s, parts)
    truth = np.array(TRUTH)
    em_err, gap = [], []
    print("seed\tem_l1\tem_ls_l1\tseconds")
    for seed in range(args.first_seed, args.first_seed + args.seeds):
        t0 = time.perf_counter()
        counts = batch_counts(s, fill_blanks(s, sample_batch(s, prior, seed, args.rounds), seed))
        em = estimate_em(m, counts).weights(parts)
        ls = estimate_ls(m, counts).weights(parts)
        em_err.append(np.abs(em - truth).sum())
        gap.append(np.abs(em - ls).sum())
        print(f"{seed}\t{em_err[-1]:.5f}\t{gap[-1]:.5f}\t{time.perf_counter() - t0:.1f}", flush=True)
    for name, xs in (("em_l1", em_err), ("em_ls_l1", gap)):
        q = np.quantile(xs, [0.5, 0.9, 1.0])
        print(f"{name}: median {q[0]:.5f}  p90 {q[1]:.5f}  max {q[2]:.5f}")


if __name__ == "__main__":
    main()
