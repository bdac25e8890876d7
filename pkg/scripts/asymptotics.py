"""Large-n behaviour of exact ESC-NB prior draws: K/n, M_s/n, max size share, size distribution.

Example:
    python3 scripts/asymptotics.py --n 100 1000 10000 --reps 200
"""
from __future__ import annotations

import argparse

import numpy as np

from esc_partitions.asymptotics import convergence_table, tv_distance
from esc_partitions.prior import TruncNegBin


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--r", type=float, default=1.0)
    ap.add_argument("--p", type=float, default=0.5)
    ap.add_argument("--n", type=int, nargs="+", default=[100, 1000, 10_000])
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--smax", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()

    mu = TruncNegBin(a.r, a.p)
    s = np.arange(1, a.smax + 1)
    # limits for the occupancy shares: M_s/n -> mu_s / E[S]
    print(f"limits: K/n -> {1 / mu.mean():.4f}, M1/n -> {float(mu.pmf(1)) / mu.mean():.4f}")
    print(f"{'n':>7} {'K/n':>8} {'M1/n':>8} {'max/n':>8} {'size TV':>8}")
    for e in convergence_table(mu, a.n, a.reps, np.random.default_rng(a.seed), smax=a.smax):
        tv = tv_distance(e.cluster_size_hist, mu.pmf(s))
        print(f"{e.n:>7} {e.k_over_n:8.4f} {e.occupancy[0]:8.4f} {e.max_over_n:8.4f} {tv:8.4f}")


if __name__ == "__main__":
    main()
