"""Fit ESC-D, ESC-NB, DP and PY to generated scenario data and tabulate pairwise FNR/FDR.

Example:
    python3 scripts/simulation_study.py --scenario 1 --datasets 3 --iterations 20000 --out study.csv
"""
from __future__ import annotations

import argparse
import logging
import time

import numpy as np

from esc_partitions.evaluation import posterior_rates, posterior_summaries
from esc_partitions.io import write_csv
from esc_partitions.likelihood import RecordTable
from esc_partitions.mcmc import ChainConfig, ModelSpec, run_chain
from esc_partitions.mcmc.chain import FAMILIES
from esc_partitions.synthetic import SCENARIOS, generate_dataset, scenario, scenario_partition


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="1", choices=sorted(SCENARIOS))
    ap.add_argument("--beta", type=float, nargs="+", default=[0.01])
    ap.add_argument("--models", nargs="+", default=["esc-d", "dp"], choices=FAMILIES)
    ap.add_argument("--datasets", type=int, default=1)
    ap.add_argument("--iterations", type=int, default=20_000)
    ap.add_argument("--burn-in", type=int, default=5000)
    ap.add_argument("--moves", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="simulation_study.csv")
    a = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    rows = []
    for beta in a.beta:
        spec = scenario(a.scenario, beta=beta)
        truth = scenario_partition(spec)
        for d in range(a.datasets):
            generated, _ = generate_dataset(truth, spec, np.random.default_rng(a.seed + d))
            records = RecordTable.from_codes(generated.codes)
            for family in a.models:
                t0 = time.perf_counter()
                cfg = ChainConfig(model=ModelSpec(family), iterations=a.iterations, burn_in=a.burn_in,
                                  partition_moves_per_iter=a.moves, seed=a.seed + 1)
                trace = run_chain(cfg, records)
                r = posterior_rates(trace, truth)
                s = posterior_summaries(trace)
                secs = time.perf_counter() - t0
                rows.append([a.scenario, beta, d, family, 100 * r.fnr, 100 * r.fdr, s.mean_K, round(secs, 1)])
                logging.info("beta=%g dataset=%d %s: FNR %.2f FDR %.2f E[K] %.1f (%.0f s)",
                             beta, d, family, 100 * r.fnr, 100 * r.fdr, s.mean_K, secs)
    write_csv(a.out, ["scenario", "beta", "dataset", "model", "fnr_pct", "fdr_pct", "mean_K", "seconds"], rows)


if __name__ == "__main__":
    main()
