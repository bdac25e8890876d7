"""Posterior samplers for ESC-NB, ESC-D, DP and PY partition models."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import gammaln

from ..baselines import concentration_prior, log_cond_concentration
from ..likelihood import DistortionVector, RecordTable, beta_prior_from_moments, sample_beta
from ..prior import (
    EscHyper,
    ExplicitSizes,
    default_truncation,
    log_cond_rp_escd,
    log_cond_rp_nb,
    log_gamma_const,
    sample_mu_posterior,
)
from . import kernels
from .chaperones import ChaperoneSampler
from ..slice import slice_sample_1d
from .state import PartitionState
from .trace import Trace

log = logging.getLogger(__name__)

FAMILIES = ("esc-nb", "esc-d", "dp", "py")


@dataclass(frozen=True)
class ModelSpec:
    """Partition prior and its hyperparameters.

    ``update_hyper=False`` freezes (r, p) or the concentration at their
    initial values; ESC-D still redraws mu every iteration.
    """

    family: str = "esc-d"
    hyper: EscHyper = field(default_factory=EscHyper)
    r0: float = 1.0
    p0: float = 0.5
    conc_shape: Optional[float] = None
    conc_rate: Optional[float] = None
    theta0: Optional[float] = None
    sigma: float = 0.5
    update_sigma: bool = False
    update_hyper: bool = True

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}; choose from {FAMILIES}")
        if self.family == "py" and not 0 <= self.sigma < 1:
            raise ValueError("PY discount must lie in [0, 1)")

    @property
    def discount(self) -> float:
        return self.sigma if self.family == "py" else 0.0


@dataclass(frozen=True)
class ChainConfig:
    model: ModelSpec = field(default_factory=ModelSpec)
    iterations: int = 20_000
    partition_moves_per_iter: int = 1000
    burn_in: int = 5000
    thin: int = 1
    seed: int = 0
    beta_mode: str = "fixed"
    beta: Sequence[float] | float = 0.01
    beta_prior: tuple[float, float] = beta_prior_from_moments(0.005, 0.01)
    chaperone_bias: bool = True
    scan_every: int = 100
    init: str = "singletons"

    def __post_init__(self):
        if not self.iterations > self.burn_in >= 0:
            raise ValueError("need iterations > burn_in >= 0")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")
        if self.beta_mode not in ("fixed", "inferred"):
            raise ValueError("beta_mode must be 'fixed' or 'inferred'")
        if self.init not in ("singletons", "one-cluster"):
            raise ValueError("init must be 'singletons' or 'one-cluster'")
        if self.partition_moves_per_iter < 0 or self.scan_every < 0:
            raise ValueError("move counts must be nonnegative")


class PriorWeights(NamedTuple):
    """Reallocation weights in the form the kernels consume."""

    log_w_exist: np.ndarray
    new_slope: float
    new_intercept: float
    new_log_scale: float


class ChainState:
    def __init__(self, partition: PartitionState, model: ModelSpec, n: int):
        self.partition = partition
        self.model = model
        self.n = n
        self.r = model.r0
        self.p = model.p0
        shape, rate = _conc_prior(model, n)
        self.theta = model.theta0 if model.theta0 is not None else shape / rate
        self.sigma = model.discount
        self.mu: Optional[ExplicitSizes] = None
        self.scan_offset = 0


def _conc_prior(model: ModelSpec, n: int) -> tuple[float, float]:
    shape, rate = concentration_prior(n)
    return (model.conc_shape if model.conc_shape is not None else shape,
            model.conc_rate if model.conc_rate is not None else rate)


def prior_weights(state: ChainState) -> PriorWeights:
    n = state.n
    s = np.arange(n + 1, dtype=float)
    fam = state.model.family
    if fam == "esc-nb":
        lw = np.log(s + state.r)
        return PriorWeights(lw, 1.0, 1.0, log_gamma_const(state.r, state.p) + np.log(state.r))
    if fam == "esc-d":
        mu = state.mu
        log_mu = np.concatenate([[-np.inf], mu.log_probs[: n + 1]])
        lw = np.full(n + 1, -np.inf)
        ok = np.isfinite(log_mu[1:n + 1])
        idx = np.flatnonzero(ok) + 1
        lw[idx] = np.log(idx + 1.0) + log_mu[idx + 1] - log_mu[idx]
        return PriorWeights(lw, 1.0, 1.0, float(mu.log_probs[0]))
    with np.errstate(divide="ignore", invalid="ignore"):
        lw = np.log(s - state.sigma)
    lw[0] = -np.inf
    return PriorWeights(lw, state.sigma, state.theta, 0.0)


_NO_RECORD = np.zeros(0, dtype=np.int64)
MAX_ENCODED_N = 12


def decode_state(code: int, n: int) -> np.ndarray:
    """Canonical allocations (labels 1..K) from a recorded state code."""
    z = np.empty(n, dtype=np.int64)
    for i in range(n):
        code, z[i] = divmod(int(code), n)
    return z + 1


def _seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**32 - 1))


def gibbs_scan(state: ChainState, weights: PriorWeights, rng: np.random.Generator) -> ChainState:
    """Resample every record's cluster from its full conditional."""
    kernels.gibbs_scan_kernel(_seed(rng), *state.partition.kernel_args(), *weights)
    return state


def chaperones_move(
    state: ChainState,
    weights: PriorWeights,
    rng: np.random.Generator,
    pair: Optional[tuple[int, int]] = None,
    sampler: Optional[ChaperoneSampler] = None,
) -> ChainState:
    """One restricted Gibbs sweep over the two chaperones' clusters."""
    if pair is None:
        if sampler is None:
            sampler = ChaperoneSampler(state.partition.codes, bias=True)
        pairs = sampler.sample(1, rng)
    else:
        pairs = np.array([pair], dtype=np.int64)
    kernels.partition_sweep(_seed(rng), pairs, 0, 0, *state.partition.kernel_args(), *weights, _NO_RECORD)
    return state


def slice_update_rp(
    r: float, p: float, log_cond_fn: Callable[[float, float], float], rng: np.random.Generator
) -> tuple[float, float]:
    """Slice updates of r on (0, inf) then p on (0, 1)."""
    f0 = log_cond_fn(r, p)
    if not np.isfinite(f0):
        raise ValueError("log density not finite at current (r, p)")
    r, f0 = slice_sample_1d(r, lambda x: log_cond_fn(x, p), rng, width=1.0, lower=0.0, logf_x0=f0)
    p, _ = slice_sample_1d(p, lambda x: log_cond_fn(r, x), rng, width=0.25, lower=0.0, upper=1.0, logf_x0=f0)
    return r, p


def _log_cond_sigma(sizes: np.ndarray, theta: float, sigma: float) -> float:
    if not 0 <= sigma < 1:
        return -np.inf
    K = sizes.size
    return float(np.sum(np.log(theta + sigma * np.arange(1, K)))
                 + np.sum(gammaln(sizes - sigma) - gammaln(1 - sigma)))


def global_update(state: ChainState, rng: np.random.Generator) -> None:
    model = state.model
    part = state.partition
    fam = model.family
    if fam == "esc-nb":
        if model.update_hyper:
            sizes = part.cluster_sizes()
            state.r, state.p = slice_update_rp(
                state.r, state.p, lambda r, p: log_cond_rp_nb(sizes, r, p, model.hyper), rng)
    elif fam == "esc-d":
        occ = part.occupancy()
        if model.update_hyper:
            state.r, state.p = slice_update_rp(
                state.r, state.p, lambda r, p: log_cond_rp_escd(occ, r, p, model.hyper), rng)
        m = default_truncation(max(occ))
        mu = sample_mu_posterior(occ, model.hyper.alpha, state.r, state.p, m, rng)
        # resolve every size a cluster can reach before moving records
        state.mu = mu.extended(state.n + 1, rng)
    else:
        K, n = part.K, state.n
        if model.update_hyper:
            shape, rate = _conc_prior(model, n)
            state.theta, _ = slice_sample_1d(
                state.theta, lambda t: log_cond_concentration(K, n, t, shape, rate, state.sigma),
                rng, width=max(1.0, state.theta), lower=0.0)
        if fam == "py" and model.update_sigma:
            sizes = part.cluster_sizes()
            state.sigma, _ = slice_sample_1d(
                state.sigma, lambda s: _log_cond_sigma(sizes, state.theta, s), rng,
                width=0.2, lower=0.0, upper=1.0)


def _initial_allocations(config: ChainConfig, n: int) -> np.ndarray:
    if config.init == "singletons":
        return np.arange(n)
    return np.zeros(n, dtype=np.int64)


def run_chain(config: ChainConfig, records: Optional[RecordTable], n: Optional[int] = None,
              init_allocations=None, progress: bool = False,
              on_moves: Optional[Callable[[np.ndarray], None]] = None) -> Trace:
    """Run one chain; ``records=None`` targets the prior (constant likelihood).

    ``on_moves`` receives, once per outer iteration, the encoded partition
    after each chaperones move (see ``decode_state``); small n only.
    """
    if records is not None:
        n = records.n
    if n is None or n < 1:
        raise ValueError("need records or a positive n")
    record = None
    if on_moves is not None:
        if n > MAX_ENCODED_N:
            raise ValueError(f"state recording supports n <= {MAX_ENCODED_N}")
        record = np.zeros(config.partition_moves_per_iter, dtype=np.int64)
    rng = np.random.default_rng(config.seed)
    model = config.model
    L = records.L if records is not None else 0
    beta0 = np.broadcast_to(np.asarray(config.beta, dtype=float), (L,)).copy()
    z0 = _initial_allocations(config, n) if init_allocations is None else np.asarray(init_allocations)
    part = PartitionState(records, z0, beta0)
    state = ChainState(part, model, n)
    sampler = ChaperoneSampler(part.codes, n=n, bias=config.chaperone_bias) if n >= 2 else None

    trace = Trace.empty(
        n=n, L=L,
        meta={"model": model.family, "seed": config.seed, "iterations": config.iterations,
              "burn_in": config.burn_in, "thin": config.thin,
              "partition_moves_per_iter": config.partition_moves_per_iter},
    )
    moves = config.partition_moves_per_iter
    for t in range(1, config.iterations + 1):
        global_update(state, rng)
        if config.beta_mode == "inferred" and L > 0:
            dv = DistortionVector(part.beta, *config.beta_prior)
            dv = sample_beta(records, part.partition(), dv, None, config.beta_prior, rng)
            part.set_beta(dv.beta)
        weights = prior_weights(state)
        if sampler is not None and moves > 0:
            pairs = sampler.sample(moves, rng)
            state.scan_offset = kernels.partition_sweep(
                _seed(rng), pairs, config.scan_every, state.scan_offset, *part.kernel_args(), *weights,
                record if record is not None else _NO_RECORD)
            if record is not None:
                on_moves(record)
        elif sampler is None or config.scan_every > 0:
            kernels.gibbs_scan_kernel(_seed(rng), *part.kernel_args(), *weights)
        if t > config.burn_in and (t - config.burn_in) % config.thin == 0:
            trace.append(t, part.partition().allocations, state, part.beta)
        if progress and t % max(1, config.iterations // 20) == 0:
            log.info("iteration %d/%d K=%d", t, config.iterations, part.K)
    return trace.freeze()


def run_chains(config: ChainConfig, records: Optional[RecordTable], chains: int, n: Optional[int] = None) -> list[Trace]:
    """Independent chains with seeds seed, seed+1, ...; traces returned in chain order."""
    configs = [replace(config, seed=config.seed + k) for k in range(chains)]
    if chains == 1:
        return [run_chain(configs[0], records, n)]
    with ThreadPoolExecutor(max_workers=chains) as pool:
        return list(pool.map(lambda c: run_chain(c, records, n), configs))
