"""Monte Carlo checks of large-n behaviour under exact prior draws."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple

import numpy as np

from .sampling import DEFAULT_MAX_TRIES, SamplerTimeout, _resolve, _sizes_until


class AsymptoticEstimates(NamedTuple):
    """Means over replicate draws at a single n.

    ``occupancy[s-1]`` is the mean of M_s / n for s = 1..smax. ``cluster_size_hist[s-1]``
    is the distribution of the size of a uniformly chosen cluster, averaged
    over draws (each draw contributes M_s / K exactly rather than one sampled cluster).
    """

    n: int
    reps: int
    k_over_n: float
    occupancy: np.ndarray
    max_over_n: float
    cluster_size_hist: np.ndarray


def exact_sizes(mu, n: int, rng: np.random.Generator, max_tries: int = DEFAULT_MAX_TRIES) -> np.ndarray:
    """Cluster sizes of one exact prior draw (order irrelevant)."""
    mu = _resolve(mu, n, rng)
    for _ in range(max_tries):
        sizes = _sizes_until(mu, n, rng)
        if sizes.sum() == n:
            return sizes
    raise SamplerTimeout(f"no acceptance in {max_tries} attempts (n={n})")


def asymptotic_estimates(
    mu, n: int, reps: int, rng: np.random.Generator, smax: int = 10, workers: int = 1
) -> AsymptoticEstimates:
    if reps < 1 or n < 1:
        raise ValueError("need n >= 1 and reps >= 1")
    if not float(np.asarray(mu.pmf(1))) > 0:
        raise ValueError("mu_1 must be positive")
    streams = rng.spawn(reps)

    def one(g):
        s = exact_sizes(mu, n, g)
        occ = np.bincount(s, minlength=smax + 1)[1 : smax + 1]
        return s.size, occ, s.max()

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            out = list(pool.map(one, streams))
    else:
        out = [one(g) for g in streams]
    K = np.array([o[0] for o in out], dtype=float)
    occ = np.array([o[1] for o in out], dtype=float)
    mx = np.array([o[2] for o in out], dtype=float)
    return AsymptoticEstimates(
        n, reps, float(K.mean() / n), occ.mean(axis=0) / n, float(mx.mean() / n),
        (occ / K[:, None]).mean(axis=0),
    )


def tv_distance(p, q) -> float:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    return 0.5 * float(np.abs(p - q).sum())


def convergence_table(mu, ns, reps: int, rng: np.random.Generator, smax: int = 10) -> list[AsymptoticEstimates]:
    return [asymptotic_estimates(mu, int(n), reps, rng, smax) for n in ns]
