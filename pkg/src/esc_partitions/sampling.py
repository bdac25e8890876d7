"""Exact and weighted prior samplers for ESC random partitions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .partition import Partition
from .prior import ExplicitSizes, size_pmf_array

DEFAULT_MAX_TRIES = 10**6


class SamplerTimeout(RuntimeError):
    pass


@dataclass(frozen=True)
class WeightedPartition:
    partition: Partition
    weight: float

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError("importance weight must be positive")


def _as_prior(mu_prior):
    if callable(mu_prior):
        return mu_prior
    return lambda rng: mu_prior


def _resolve(mu, n: int, rng: np.random.Generator):
    # tail draws must unambiguously mean "larger than n"
    if isinstance(mu, ExplicitSizes) and mu.m < n and mu.log_tail > -np.inf:
        return mu.extended(n, rng)
    return mu


def _mean_guess(mu) -> float:
    try:
        return max(float(mu.mean()), 1.0)
    except ValueError:
        return 1.0


def _sizes_until(mu, n: int, rng: np.random.Generator) -> np.ndarray:
    """Cluster sizes S_1..S_R with R the first index whose partial sum reaches n."""
    chunk = max(8, int(1.2 * n / _mean_guess(mu)) + 8)
    sizes = mu.sample(rng, chunk)
    total = np.cumsum(sizes)
    while total[-1] < n:
        more = mu.sample(rng, chunk)
        sizes = np.concatenate([sizes, more])
        total = np.concatenate([total, total[-1] + np.cumsum(more)])
    R = int(np.searchsorted(total, n, side="left")) + 1
    return sizes[:R]


def _permuted_partition(sizes: np.ndarray, rng: np.random.Generator) -> Partition:
    labels = np.repeat(np.arange(1, sizes.size + 1), sizes)
    return Partition.from_allocations(rng.permutation(labels))


def rejection_sample(
    mu_prior, n: int, rng: np.random.Generator, max_tries: int = DEFAULT_MAX_TRIES
) -> Partition:
    """Exact draw from the ESC prior on partitions of ``n`` records.

    ``mu_prior`` is either a size law or a callable ``rng -> size law``.
    """
    draw_mu = _as_prior(mu_prior)
    for _ in range(max_tries):
        mu = _resolve(draw_mu(rng), n, rng)
        sizes = _sizes_until(mu, n, rng)
        if sizes.sum() == n:
            return _permuted_partition(sizes, rng)
    raise SamplerTimeout(f"no acceptance in {max_tries} attempts (n={n})")


def importance_sample(mu_prior, n: int, rng: np.random.Generator) -> WeightedPartition:
    """One weighted draw: the last cluster is cut to the remaining deficit."""
    mu = _resolve(_as_prior(mu_prior)(rng), n, rng)
    sizes = _sizes_until(mu, n, rng)
    deficits = n - np.concatenate([[0], np.cumsum(sizes)[:-1]])
    w_k = size_pmf_array(mu, n)[deficits - 1]
    W = float(w_k.sum())
    if not W > 0:
        raise ValueError("importance weight vanished; mu_1 must be positive")
    K = int(np.searchsorted(np.cumsum(w_k), rng.random() * W, side="right")) + 1
    K = min(K, sizes.size)
    final = np.append(sizes[: K - 1], deficits[K - 1])
    return WeightedPartition(_permuted_partition(final, rng), W)


def self_normalized_mean(draws: Sequence[WeightedPartition], h: Callable[[Partition], float]) -> float:
    if len(draws) == 0:
        raise ValueError("no draws")
    w = np.array([d.weight for d in draws])
    v = np.array([h(d.partition) for d in draws], dtype=float)
    return float(np.dot(w, v) / w.sum())


def self_normalized_stats(weights: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Self-normalized estimate and its delta-method standard error."""
    w = np.asarray(weights, dtype=float)
    v = np.asarray(values, dtype=float)
    if w.size == 0:
        raise ValueError("no draws")
    est = np.dot(w, v) / w.sum()
    se = np.sqrt(np.sum(w**2 * (v - est) ** 2)) / w.sum()
    return float(est), float(se)


# Vectorised variants for a fixed size law; these return raw (non-canonical)
# allocation rows, which is what frequency checks need.


def _labels_from_cuts(cuts: np.ndarray, n: int) -> np.ndarray:
    # label of position t is the number of cut points at or below t
    t = np.arange(n)
    return (cuts[:, :, None] <= t[None, None, :]).sum(axis=1)


def _permute_rows(labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    perm = np.argsort(rng.random(labels.shape), axis=1)
    return np.take_along_axis(labels, perm, axis=1)


def rejection_sample_batch(mu, n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` exact draws for fixed ``mu``, as an (size, n) array of labels."""
    mu = _resolve(mu, n, rng)
    out = []
    got = 0
    while got < size:
        batch = max(2 * (size - got), 1024)
        S = mu.sample(rng, batch * n).reshape(batch, n)
        C = np.cumsum(S, axis=1)
        hit = (C == n).any(axis=1)
        C = C[hit]
        # cut points of all but the last cluster; entries >= n are inert
        labels = _labels_from_cuts(np.where(C < n, C, n), n)
        out.append(_permute_rows(labels, rng))
        got += C.shape[0]
    return np.concatenate(out)[:size]


def importance_sample_batch(
    mu, n: int, size: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """``size`` weighted draws for fixed ``mu``: (labels array, weights)."""
    mu = _resolve(mu, n, rng)
    f = size_pmf_array(mu, n)
    S = mu.sample(rng, size * n).reshape(size, n)
    C = np.cumsum(S, axis=1)
    prev = np.concatenate([np.zeros((size, 1), dtype=C.dtype), C[:, :-1]], axis=1)
    D = n - prev
    valid = D >= 1
    wk = np.where(valid, f[np.clip(D, 1, n) - 1], 0.0)
    W = wk.sum(axis=1)
    cw = np.cumsum(wk, axis=1)
    K = (cw < (rng.random(size) * W)[:, None]).sum(axis=1) + 1
    K = np.minimum(K, valid.sum(axis=1))
    # first K-1 clusters keep their sampled sizes; the K-th takes the deficit
    j = np.arange(n)[None, :]
    cuts = np.where(j < (K - 1)[:, None], C, n)
    labels = _labels_from_cuts(cuts, n)
    return _permute_rows(labels, rng), W


def canonical_keys(rows: np.ndarray) -> list[tuple[int, ...]]:
    """Canonical allocation tuple for each row of a label array."""
    uniq, inverse = np.unique(rows, axis=0, return_inverse=True)
    keys = [Partition.from_allocations(u + 1).key() for u in uniq]
    return [keys[i] for i in inverse.ravel()]
