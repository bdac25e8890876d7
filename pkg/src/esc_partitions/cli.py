"""Command-line entry point.

Exit status: 0 on success, 2 on usage or config errors, 1 on runtime failures.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .asymptotics import asymptotic_estimates
from .baselines import CrpParams, crp_sample
from .evaluation import QUANTILES, posterior_rates, posterior_summaries
from .mcmc.chain import FAMILIES, run_chains
from .mcmc.diagnostics import MIN_SAMPLES, diagnostics
from .prior import TruncNegBin, default_truncation, fixed_mu, sample_mu_prior
from .sampling import SamplerTimeout, importance_sample, rejection_sample
from .synthetic import SCENARIOS, generate_dataset, scenario, scenario_partition

log = logging.getLogger("esc_partitions")


class UsageError(Exception):
    pass


def _out(path):
    if path:
        return open(path, "w", newline="", encoding="utf-8")
    return contextlib.nullcontext(sys.stdout)


def cmd_simulate(a) -> None:
    spec = scenario(a.scenario, L=a.fields, D=a.categories, beta=a.beta)
    truth = scenario_partition(spec)
    records, labels = generate_dataset(truth, spec, np.random.default_rng(a.seed))
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_records(out / "data.csv", records.codes)
    io.write_truth(out / "truth.csv", labels)
    print(f"wrote {records.n} records (K={truth.K}) to {out}")


def cmd_fit(a) -> None:
    values = io.load_config(a.config) if a.config else {}
    for key in ("model", "iterations", "burn_in", "partition_moves_per_iter", "chains", "seed"):
        v = getattr(a, key)
        if v is not None:
            values[key] = v
    cfg, chains = io.build_chain_config(values)
    records, _ = io.load_records(a.data)
    traces = run_chains(cfg, records, chains)
    out = Path(a.out)
    if chains == 1:
        io.write_trace(out, traces[0])
        print(f"wrote {len(traces[0])} draws to {out}")
        return
    for k, tr in enumerate(traces):
        path = out.with_name(f"{out.stem}.chain{k}{out.suffix}")
        io.write_trace(path, tr)
        print(f"wrote {len(tr)} draws to {path}")


def cmd_prior_sample(a) -> None:
    rng = np.random.default_rng(a.seed)
    fam = a.model
    if fam in ("dp", "py"):
        if a.method != "rejection":
            raise UsageError("importance sampling applies to ESC models only")
        params = CrpParams(a.theta, a.sigma if fam == "py" else 0.0)
        draws = [(crp_sample(a.n, params, rng), 1.0) for _ in range(a.draws)]
    else:
        if fam == "esc-nb":
            prior = fixed_mu(TruncNegBin(a.r, a.p))
        else:
            # (r, p) fixed at the flags; mu redrawn from its Dirichlet each time
            m = default_truncation(a.n)
            prior = lambda g: sample_mu_prior(a.alpha, a.r, a.p, m, g)
        draws = []
        for _ in range(a.draws):
            if a.method == "rejection":
                draws.append((rejection_sample(prior, a.n, rng), 1.0))
            else:
                w = importance_sample(prior, a.n, rng)
                draws.append((w.partition, w.weight))
    with _out(a.out) as fh:
        for k, (p, w) in enumerate(draws):
            fh.write(json.dumps({"draw": k, "weight": w, "K": p.K,
                                 "z": " ".join(map(str, p.allocations.tolist()))}) + "\n")


def cmd_asymptotics(a) -> None:
    mu = TruncNegBin(a.r, a.p)
    rng = np.random.default_rng(a.seed)
    rows = []
    for n in a.n:
        e = asymptotic_estimates(mu, n, a.reps, rng, smax=a.smax)
        rows.append([n, a.reps, e.k_over_n, *e.occupancy.tolist(), e.max_over_n, *e.cluster_size_hist.tolist()])
    header = (["n", "reps", "K_over_n"] + [f"M{s}_over_n" for s in range(1, a.smax + 1)]
              + ["max_over_n"] + [f"size_hist_{s}" for s in range(1, a.smax + 1)])
    with _out(a.out) as fh:
        io.write_csv(fh, header, rows)


def cmd_evaluate(a) -> None:
    trace = io.read_trace(a.trace)
    truth = io.load_truth(a.truth, trace.n)
    r = posterior_rates(trace, truth)
    s = posterior_summaries(trace)
    with _out(a.out) as fh:
        io.write_csv(fh, ["fnr", "fdr", "fnr_mcse", "fdr_mcse", "mean_K", "se_K", "draws"],
                     [[r.fnr, r.fdr, r.fnr_mcse, r.fdr_mcse, s.mean_K, s.se_K, len(trace)]])
    if a.boxplot:
        with open(a.boxplot, "w", encoding="utf-8") as fh:
            for size, q in zip(s.sizes.tolist(), s.occupancy_quantiles.tolist()):
                fh.write(json.dumps({"size": size, "quantiles": dict(zip(map(str, QUANTILES), q))}) + "\n")


def cmd_diagnose(a) -> None:
    trace = io.read_trace(a.trace)
    if len(trace) < MIN_SAMPLES:
        raise UsageError(f"trace has {len(trace)} draws; diagnostics need at least {MIN_SAMPLES}")
    series = {"K": trace.K, "r": trace.r, "p": trace.p, "concentration": trace.concentration, "sigma": trace.sigma}
    series.update({f"beta{l + 1}": trace.beta[:, l] for l in range(trace.beta.shape[1])})
    rows = []
    for name, x in series.items():
        x = np.asarray(x, dtype=float)
        if np.all(np.isnan(x)):
            continue
        d = diagnostics(x)
        rows.append([name, d.mean, d.mcse, d.ess])
    with _out(a.out) as fh:
        io.write_csv(fh, ["parameter", "mean", "mcse", "ess"], rows)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="esc-partitions", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate records for a preset scenario")
    p.add_argument("--scenario", default="1", choices=sorted(SCENARIOS))
    p.add_argument("--beta", type=float, default=0.01)
    p.add_argument("--fields", type=int, default=5)
    p.add_argument("--categories", type=int, default=10)
    p.add_argument("--out", default=".")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="run posterior chains on a record file")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--model", choices=FAMILIES)
    p.add_argument("--iterations", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--moves", dest="partition_moves_per_iter", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--out", default="trace.jsonl")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("prior-sample", help="draw partitions from a prior")
    p.add_argument("--model", choices=FAMILIES, default="esc-nb")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--draws", type=int, default=100)
    p.add_argument("--method", choices=("rejection", "importance"), default="rejection")
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_prior_sample)

    p = sub.add_parser("asymptotics", help="large-n summaries under TruncNegBin(r, p) sizes")
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--n", type=int, nargs="+", default=[100, 1000, 10000])
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--smax", type=int, default=10)
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_asymptotics)

    p = sub.add_parser("evaluate", help="posterior FNR/FDR of a trace against the truth")
    p.add_argument("--trace", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--boxplot", help="write per-size occupancy quantiles as JSON lines")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; unused")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("diagnose", help="ESS and MCSE of trace scalars")
    p.add_argument("--trace", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; unused")
    p.set_defaults(func=cmd_diagnose)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(message)s")
    try:
        a.func(a)
    except (UsageError, io.ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (io.LoadError, SamplerTimeout, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
