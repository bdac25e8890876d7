"""Dirichlet-process and Pitman-Yor partition priors used as comparison models."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .partition import Partition


@dataclass(frozen=True)
class CrpParams:
    theta: float
    sigma: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.sigma < 1.0:
            raise ValueError("discount sigma must lie in [0, 1)")
        if not self.theta > -self.sigma:
            raise ValueError("need theta > -sigma")


def crp_realloc_weights(sizes_minus_i: Sequence[int], params: CrpParams) -> np.ndarray:
    s = np.asarray(sizes_minus_i, dtype=float)
    return np.append(s - params.sigma, params.theta + params.sigma * s.size)


def log_eppf_py(p, params: CrpParams) -> float:
    """Exact Pitman-Yor EPPF; sigma = 0 gives the Ewens (DP) formula."""
    sizes = p.sizes if isinstance(p, Partition) else np.asarray(p, dtype=np.int64)
    n = int(sizes.sum())
    k = sizes.size
    th, sg = params.theta, params.sigma
    out = gammaln(th + 1.0) - gammaln(th + n)
    out += np.sum(np.log(th + sg * np.arange(1, k)))
    out += np.sum(gammaln(sizes - sg) - gammaln(1.0 - sg))
    return float(out)


def log_cond_concentration(
    K: int,
    n: int,
    theta: float,
    prior_shape: float,
    prior_rate: float,
    sigma: float = 0.0,
) -> float:
    """Unnormalized log density of the concentration given K clusters among n records.

    Gamma(shape, rate) prior times the theta-dependent part of the partition
    probability. For sigma > 0 this is the Pitman-Yor analogue.
    """
    if not theta > 0:
        return -np.inf
    prior = (prior_shape - 1.0) * np.log(theta) - prior_rate * theta
    if sigma == 0.0:
        lik = K * np.log(theta) + gammaln(theta) - gammaln(theta + n)
    else:
        lik = np.sum(np.log(theta + sigma * np.arange(1, K))) + gammaln(theta + 1.0) - gammaln(theta + n)
    return float(prior + lik)


def concentration_prior(n: int) -> tuple[float, float]:
    """Gamma(1, rate 2/n): mean n/2, matching a vague belief E[K] = n/2."""
    return 1.0, 2.0 / n


def crp_sample(n: int, params: CrpParams, rng: np.random.Generator) -> Partition:
    """Sequential Chinese-restaurant draw of a partition of n records."""
    z = np.empty(n, dtype=np.int64)
    sizes: list[float] = []
    for i in range(n):
        w = crp_realloc_weights(sizes, params)
        j = int(np.searchsorted(np.cumsum(w), rng.random() * w.sum(), side="right"))
        j = min(j, len(sizes))
        if j == len(sizes):
            sizes.append(1)
        else:
            sizes[j] += 1
        z[i] = j + 1
    return Partition.from_allocations(z)
