"""Categorical spike-and-slab record likelihood with the latent entity summed out.

Within a cluster each field value is either copied from the cluster's latent
entity value (probability 1 - beta) or redrawn from the field frequencies
theta (probability beta). Summing out the latent value gives, per cluster and
field, ``prod_i beta theta_{x_i} * f`` with

    f = 1 - sum_u theta_u + sum_u theta_u * rho_u ** q_u,
    rho_u = (beta theta_u + 1 - beta) / (beta theta_u),

over the unique values ``u`` in the cluster with multiplicities ``q_u``. The
prefactor does not depend on the partition, so MCMC moves only track log f.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .slice import slice_sample_1d
from .partition import Partition

BETA_EPS = 1e-8
SMALL_BETA = 1e-6


@dataclass
class RecordTable:
    """n x L table of 0-based category codes with per-field frequencies."""

    codes: np.ndarray
    cat_counts: np.ndarray
    theta: list[np.ndarray]
    field_names: Optional[list[str]] = None
    categories: Optional[list[list[str]]] = None

    def __post_init__(self):
        self.codes = np.ascontiguousarray(self.codes, dtype=np.int64)
        self.cat_counts = np.asarray(self.cat_counts, dtype=np.int64)
        if self.codes.ndim != 2:
            raise ValueError("codes must be an n x L array")
        if self.cat_counts.size != self.L or len(self.theta) != self.L:
            raise ValueError("need one category count and one theta vector per field")
        for l in range(self.L):
            col = self.codes[:, l]
            if col.size and (col.min() < 0 or col.max() >= self.cat_counts[l]):
                raise ValueError(f"field {l}: code outside [0, {self.cat_counts[l]})")
            th = np.asarray(self.theta[l], dtype=float)
            if th.size != self.cat_counts[l] or abs(th.sum() - 1.0) > 1e-9:
                raise ValueError(f"field {l}: theta must have D entries summing to 1")
            self.theta[l] = th

    @classmethod
    def from_codes(cls, codes, cat_counts=None, theta=None, **kw) -> "RecordTable":
        codes = np.asarray(codes, dtype=np.int64)
        if codes.ndim == 1:
            codes = codes[:, None]
        if cat_counts is None:
            cat_counts = codes.max(axis=0) + 1
        if theta is None:
            theta = empirical_theta(codes, cat_counts)
        return cls(codes, np.asarray(cat_counts), [np.asarray(t, dtype=float) for t in theta], **kw)

    @property
    def n(self) -> int:
        return int(self.codes.shape[0])

    @property
    def L(self) -> int:
        return int(self.codes.shape[1])

    def theta_matrix(self) -> np.ndarray:
        """theta padded with zeros to shape (L, max D)."""
        out = np.zeros((self.L, int(self.cat_counts.max(initial=1))))
        for l, th in enumerate(self.theta):
            out[l, : th.size] = th
        return out


@dataclass
class DistortionVector:
    beta: np.ndarray
    prior_a: float = 1.0
    prior_b: float = 1.0

    def __post_init__(self):
        self.beta = np.clip(np.atleast_1d(np.asarray(self.beta, dtype=float)), BETA_EPS, 1 - BETA_EPS)


def empirical_theta(codes, cat_counts=None) -> list[np.ndarray]:
    codes = np.asarray(codes, dtype=np.int64)
    if codes.ndim == 1:
        codes = codes[:, None]
    if codes.shape[0] == 0:
        raise ValueError("empty record table")
    if cat_counts is None:
        cat_counts = codes.max(axis=0) + 1
    n = codes.shape[0]
    return [np.bincount(codes[:, l], minlength=int(cat_counts[l])) / n for l in range(codes.shape[1])]


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def cluster_field_loglik(values: Sequence[int], beta_l: float, theta_l: Sequence[float]) -> float:
    """Log marginal probability of one field's values within one cluster."""
    values = np.asarray(values, dtype=np.int64)
    if values.size == 0:
        raise ValueError("cluster must be nonempty")
    theta_l = np.asarray(theta_l, dtype=float)
    uniq, q = np.unique(values, return_counts=True)
    th = theta_l[uniq]
    if np.any(th <= 0):
        raise ValueError("observed value has zero frequency")
    log_th = np.log(th)
    if values.size == 1:
        # a lone record's value is distributed as theta whatever beta is
        return float(log_th[0])
    rest = max(1.0 - th.sum(), 0.0)
    if beta_l >= SMALL_BETA:
        log_rho = np.log(beta_l * th + 1.0 - beta_l) - np.log(beta_l * th)
        log_f = logsumexp(np.append(log_th + q * log_rho, _log(rest)))
        return float(values.size * np.log(beta_l) + np.sum(q * log_th) + log_f)
    # direct form without dividing by beta: latent value d contributes
    # theta_d * prod_i (beta theta_{x_i} + (1 - beta) 1[x_i = d])
    slab = q * (_log(beta_l) + log_th)
    off_diag = ~np.eye(uniq.size, dtype=bool)
    others = np.where(off_diag, slab[None, :], 0.0).sum(axis=1)
    terms = log_th + others + q * np.log(beta_l * th + 1.0 - beta_l)
    absent = _log(rest) + slab.sum()
    return float(logsumexp(np.append(terms, absent)))


def partition_loglik(records: RecordTable, partition: Partition, beta, theta=None) -> float:
    beta = np.asarray(getattr(beta, "beta", beta), dtype=float)
    theta = records.theta if theta is None else theta
    if partition.n != records.n:
        raise ValueError(f"partition has {partition.n} records, table has {records.n}")
    if beta.size != records.L:
        raise ValueError("need one distortion probability per field")
    total = 0.0
    for block in partition.blocks():
        rows = records.codes[block]
        for l in range(records.L):
            total += cluster_field_loglik(rows[:, l], beta[l], theta[l])
    return total


def field_counts(records: RecordTable, allocations: np.ndarray, l: int) -> np.ndarray:
    """(K, D_l) matrix of category counts per cluster for field l."""
    z = np.asarray(allocations) - 1
    K = int(z.max()) + 1
    D = int(records.cat_counts[l])
    return np.bincount(z * D + records.codes[:, l], minlength=K * D).reshape(K, D)


def field_loglik_from_counts(counts: np.ndarray, beta_l: float, theta_l: np.ndarray) -> float:
    """Sum over clusters of the field's log marginal, from a (K, D) count matrix."""
    theta_l = np.asarray(theta_l, dtype=float)
    present = counts > 0
    log_th = _log(theta_l)
    log_rho = np.log(beta_l * theta_l + 1.0 - beta_l) - _log(beta_l * theta_l)
    with np.errstate(invalid="ignore"):
        terms = np.where(present, log_th[None, :] + counts * log_rho[None, :], -np.inf)
    rest = np.clip(1.0 - present @ theta_l, 0.0, None)
    log_f = logsumexp(np.column_stack([terms, _log(rest)]), axis=1)
    n_per_value = counts.sum(axis=0)
    const = np.sum(n_per_value[n_per_value > 0] * (np.log(beta_l) + log_th[n_per_value > 0]))
    return float(const + log_f.sum())


class StaleCacheError(RuntimeError):
    pass


class LikelihoodCache:
    """Per-cluster category counts and log f terms for incremental moves.

    Cluster labels here are internal slots ``0..n-1`` and need not be
    canonical. The cache remembers which (beta, theta) it was built for.
    """

    def __init__(self, records: RecordTable, allocations, beta, theta=None):
        theta = records.theta if theta is None else theta
        beta = np.clip(np.asarray(getattr(beta, "beta", beta), dtype=float), BETA_EPS, 1 - BETA_EPS)
        self.n, self.L = records.n, records.L
        self.Dmax = int(records.cat_counts.max(initial=1))
        th = np.zeros((self.L, self.Dmax))
        for l in range(self.L):
            th[l, : len(theta[l])] = theta[l]
        self.tables = likelihood_tables(beta, th)
        self.checksum = _checksum(beta, th)
        self.codes = records.codes
        z = np.asarray(allocations, dtype=np.int64)
        _, z = np.unique(z, return_inverse=True)
        self.z = z.ravel().astype(np.int64)
        self.sizes = np.bincount(self.z, minlength=self.n).astype(np.int64)
        self.counts = np.zeros((self.n, self.L, self.Dmax), dtype=np.int32)
        for l in range(self.L):
            np.add.at(self.counts, (self.z, l, self.codes[:, l]), 1)
        self.logf = np.zeros((self.n, self.L))
        for c in np.flatnonzero(self.sizes):
            for l in range(self.L):
                self.logf[c, l] = _logf_row(self.counts[c, l], self.tables, l)
        self.const = float(np.sum(self.tables.log_beta[None, :] + self.tables.log_theta[np.arange(self.L)[None, :], self.codes]))

    def check(self, beta, theta) -> None:
        beta = np.clip(np.asarray(getattr(beta, "beta", beta), dtype=float), BETA_EPS, 1 - BETA_EPS)
        th = np.zeros((self.L, self.Dmax))
        for l in range(self.L):
            th[l, : len(theta[l])] = theta[l]
        if _checksum(beta, th) != self.checksum:
            raise StaleCacheError("cache was built for different beta/theta")

    def total(self) -> float:
        return self.const + float(self.logf.sum())

    def free_slot(self) -> int:
        return int(np.flatnonzero(self.sizes == 0)[0])

    def _update(self, c: int, i: int, sign: int) -> None:
        self.sizes[c] += sign
        for l in range(self.L):
            self.counts[c, l, self.codes[i, l]] += sign
            self.logf[c, l] = _logf_row(self.counts[c, l], self.tables, l) if self.sizes[c] else 0.0


@dataclass
class LikelihoodTables:
    log_beta: np.ndarray
    theta: np.ndarray
    log_theta: np.ndarray
    log_rho: np.ndarray
    log_rho_m1: np.ndarray


def likelihood_tables(beta: np.ndarray, theta: np.ndarray) -> LikelihoodTables:
    """Per-field, per-category constants used by the incremental updates."""
    b = beta[:, None]
    log_theta = _log(theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_rho = np.log(b * theta + 1.0 - b) - _log(b * theta)
        log_rho_m1 = np.log1p(-b) - np.log(b) - log_theta
    zero = theta <= 0
    log_rho[zero] = 0.0
    log_rho_m1[zero] = -np.inf
    return LikelihoodTables(np.log(beta), theta, log_theta, log_rho, log_rho_m1)


def _logf_row(counts_row: np.ndarray, tables: LikelihoodTables, l: int) -> float:
    present = counts_row > 0
    th = tables.theta[l]
    terms = tables.log_theta[l][present] + counts_row[present] * tables.log_rho[l][present]
    rest = max(1.0 - th[present].sum(), 0.0)
    return float(logsumexp(np.append(terms, _log(rest))))


def _checksum(beta: np.ndarray, theta: np.ndarray) -> int:
    return hash((beta.tobytes(), theta.tobytes()))


def loglik_delta_move(
    cache: LikelihoodCache,
    records: RecordTable,
    i: int,
    from_cluster: int,
    to_cluster,
    beta,
    theta=None,
) -> float:
    """Move record ``i`` inside ``cache`` and return the change in log likelihood.

    ``to_cluster`` is a cache slot or ``"new"``. Only the two affected
    clusters are recomputed.
    """
    theta = records.theta if theta is None else theta
    cache.check(beta, theta)
    if cache.z[i] != from_cluster:
        raise StaleCacheError(f"record {i} is in slot {cache.z[i]}, not {from_cluster}")
    if isinstance(to_cluster, str):
        if to_cluster != "new":
            raise ValueError(f"invalid target {to_cluster!r}")
        to_cluster = cache.free_slot() if cache.sizes[from_cluster] > 1 else from_cluster
    elif cache.sizes[to_cluster] == 0:
        raise ValueError(f"slot {to_cluster} is empty")
    if to_cluster == from_cluster:
        return 0.0
    before = cache.logf[from_cluster].sum() + cache.logf[to_cluster].sum()
    cache._update(from_cluster, i, -1)
    cache._update(to_cluster, i, +1)
    cache.z[i] = to_cluster
    after = cache.logf[from_cluster].sum() + cache.logf[to_cluster].sum()
    return float(after - before)


def beta_prior_from_moments(mean: float, sd: float) -> tuple[float, float]:
    """Beta(a, b) shapes with the given mean and standard deviation."""
    if not 0 < mean < 1:
        raise ValueError("mean must lie in (0, 1)")
    if not 0 < sd**2 < mean * (1 - mean):
        raise ValueError("variance must be below mean * (1 - mean)")
    c = mean * (1 - mean) / sd**2 - 1
    return mean * c, (1 - mean) * c


def sample_beta(
    records: RecordTable,
    partition: Partition,
    beta: DistortionVector,
    theta,
    prior: tuple[float, float],
    rng: np.random.Generator,
) -> DistortionVector:
    """Slice-sample each field's distortion probability given the partition."""
    theta = records.theta if theta is None else theta
    a, b = prior
    new = beta.beta.copy()
    for l in range(records.L):
        counts = field_counts(records, partition.allocations, l)

        def logpost(x, counts=counts, l=l):
            if not BETA_EPS < x < 1 - BETA_EPS:
                return -np.inf
            return (a - 1) * np.log(x) + (b - 1) * np.log1p(-x) + field_loglik_from_counts(counts, x, theta[l])

        new[l], _ = slice_sample_1d(new[l], logpost, rng, width=0.1, lower=BETA_EPS, upper=1 - BETA_EPS)
    return DistortionVector(new, a, b)


def sample_records(partition: Partition, theta, beta, rng: np.random.Generator) -> RecordTable:
    """Generate a record table: latent entity per cluster, then per-field distortion."""
    beta = np.asarray(getattr(beta, "beta", beta), dtype=float)
    L = len(theta)
    n, K = partition.n, partition.K
    z = partition.allocations - 1
    codes = np.empty((n, L), dtype=np.int64)
    for l in range(L):
        th = np.asarray(theta[l], dtype=float)
        cdf = np.cumsum(th)
        cdf /= cdf[-1]
        y = np.searchsorted(cdf, rng.random(K), side="right")
        fresh = np.searchsorted(cdf, rng.random(n), side="right")
        distort = rng.random(n) < beta[l]
        codes[:, l] = np.where(distort, fresh, y[z])
    D = np.array([len(t) for t in theta])
    return RecordTable(codes, D, [np.asarray(t, dtype=float).copy() for t in theta])
