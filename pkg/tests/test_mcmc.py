import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare, kstest

from esc_partitions.baselines import CrpParams, log_eppf_py
from esc_partitions.likelihood import RecordTable, partition_loglik
from esc_partitions.mcmc import ChainConfig, ChaperoneSampler, ModelSpec, chaperone_pair, run_chain, run_chains
from esc_partitions.mcmc.chain import ChainState, chaperones_move, decode_state, gibbs_scan, prior_weights
from esc_partitions.mcmc.state import PartitionState
from esc_partitions.partition import enumerate_partitions, from_allocations, log_eppf_conditional
from esc_partitions.prior import TruncNegBin, p_event_en
from esc_partitions.sampling import rejection_sample_batch
from esc_partitions.slice import slice_sample_1d

from .chainutil import tv, visit_frequencies


def esc_target(mu, n):
    lpe = math.log(p_event_en(mu, n))
    return {p.key(): math.exp(log_eppf_conditional(p, mu, lpe)) for p in enumerate_partitions(n)}


# ---------------------------------------------------------------- chaperone pairs


def test_two_records_always_pair_up():
    rng = np.random.default_rng(0)
    pairs = ChaperoneSampler(np.array([[0], [1]])).sample(200, rng)
    assert set(map(frozenset, pairs.tolist())) == {frozenset({0, 1})}


def test_unbiased_pairs_are_uniform():
    rng = np.random.default_rng(1)
    n = 6
    pairs = ChaperoneSampler(None, n=n, bias=False).sample(60_000, rng)
    keys = np.minimum(pairs[:, 0], pairs[:, 1]) * n + np.maximum(pairs[:, 0], pairs[:, 1])
    obs = np.array(list(Counter(keys.tolist()).values()))
    assert obs.size == n * (n - 1) // 2
    assert chisquare(obs).pvalue > 1e-3


def test_bias_favours_agreeing_records():
    codes = np.array([[0, 0, 0], [0, 0, 0], [1, 2, 3], [2, 3, 1], [3, 1, 2]])
    rng = np.random.default_rng(2)
    pairs = ChaperoneSampler(codes, bias=True).sample(40_000, rng)
    twin = np.mean((pairs.min(axis=1) == 0) & (pairs.max(axis=1) == 1))
    assert twin > 2 / (5 * 4)  # above the uniform share 1/10
    # every pair still gets proposed
    seen = {tuple(sorted(p)) for p in pairs.tolist()}
    assert len(seen) == 10


@given(st.integers(2, 30), st.integers(1, 4), st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_pairs_are_distinct_and_in_range(n, L, seed):
    rng = np.random.default_rng(seed)
    codes = rng.integers(0, 3, size=(n, L))
    pairs = ChaperoneSampler(codes).sample(50, rng)
    assert pairs.shape == (50, 2)
    assert np.all(pairs[:, 0] != pairs[:, 1])
    assert pairs.min() >= 0 and pairs.max() < n
    i, j = chaperone_pair(codes, rng)
    assert i != j


def test_too_few_records():
    with pytest.raises(ValueError):
        ChaperoneSampler(np.zeros((1, 2), dtype=int))


# ---------------------------------------------------------------- stationarity


def prior_config(model, iterations=4000, moves=100, seed=3):
    return ChainConfig(model=model, iterations=iterations, burn_in=1, partition_moves_per_iter=moves,
                       scan_every=5, seed=seed)


def test_two_records_escnb_half_merged():
    freq, _ = visit_frequencies(prior_config(ModelSpec("esc-nb", r0=1.0, p0=0.5, update_hyper=False)), n=2)
    assert abs(freq.get((1, 1), 0.0) - 0.5) < 0.02


def test_prior_stationarity_escnb_n4():
    mu = TruncNegBin(2.0, 0.3)
    freq, total = visit_frequencies(prior_config(ModelSpec("esc-nb", r0=2.0, p0=0.3, update_hyper=False)), n=4)
    assert total == 4000 * 100
    assert tv(freq, esc_target(mu, 4)) < 0.02


def test_prior_stationarity_py_n4():
    params = CrpParams(0.8, 0.3)
    target = {p.key(): math.exp(log_eppf_py(p, params)) for p in enumerate_partitions(4)}
    freq, _ = visit_frequencies(prior_config(ModelSpec("py", theta0=0.8, sigma=0.3, update_hyper=False)), n=4)
    assert tv(freq, target) < 0.02


def test_chaperones_alone_keep_k():
    state = ChainState(PartitionState(None, [0, 0, 1, 1, 2]), ModelSpec("dp", theta0=1.0), 5)
    w = prior_weights(state)
    rng = np.random.default_rng(4)
    for _ in range(200):
        chaperones_move(state, w, rng, sampler=ChaperoneSampler(None, n=5, bias=False))
        assert state.partition.K == 3


def test_posterior_stationarity_with_likelihood():
    """n=4, one binary field, fixed distortion: chain matches prior x likelihood."""
    rec = RecordTable.from_codes(np.array([[0], [0], [1], [0]]), [2], [np.array([0.3, 0.7])])
    beta = 0.4
    mu = TruncNegBin(1.0, 0.5)
    prior = esc_target(mu, 4)
    post = {}
    for p in enumerate_partitions(4):
        post[p.key()] = prior[p.key()] * math.exp(partition_loglik(rec, p, [beta]))
    Z = sum(post.values())
    post = {k: v / Z for k, v in post.items()}
    cfg = ChainConfig(model=ModelSpec("esc-nb", r0=1.0, p0=0.5, update_hyper=False), iterations=4000,
                      burn_in=1, partition_moves_per_iter=100, scan_every=5, beta=beta, seed=5)
    freq, _ = visit_frequencies(cfg, rec)
    assert tv(freq, post) < 0.02


def test_prior_k_histogram_matches_rejection():
    n = 30
    mu = TruncNegBin(1.0, 0.5)
    cfg = ChainConfig(model=ModelSpec("esc-nb", r0=1.0, p0=0.5, update_hyper=False), iterations=10_000,
                      burn_in=500, partition_moves_per_iter=50, scan_every=5, seed=6)
    trace = run_chain(cfg, None, n=n)
    rows = rejection_sample_batch(mu, n, 50_000, np.random.default_rng(7))
    k_rej = np.array([np.unique(r).size for r in rows])
    a = np.bincount(trace.K, minlength=n + 1) / len(trace)
    b = np.bincount(k_rej, minlength=n + 1) / k_rej.size
    assert 0.5 * np.abs(a - b).sum() < 0.03


# ---------------------------------------------------------------- kernel bookkeeping


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=8, deadline=None)
def test_cached_likelihood_tracks_moves(seed):
    rng = np.random.default_rng(seed)
    codes = rng.integers(0, 4, size=(25, 3))
    rec = RecordTable.from_codes(codes, [4, 4, 4])
    beta = rng.uniform(0.05, 0.5, size=3)
    part = PartitionState(rec, rng.integers(0, 5, size=25), beta)
    state = ChainState(part, ModelSpec("esc-nb", r0=1.0, p0=0.5), 25)
    # the cache drops a partition-free constant
    offset = part.log_f_total() - partition_loglik(rec, part.partition(), beta)
    w = prior_weights(state)
    sampler = ChaperoneSampler(codes)
    for _ in range(30):
        chaperones_move(state, w, rng, sampler=sampler)
    gibbs_scan(state, w, rng)
    got = part.log_f_total() - partition_loglik(rec, part.partition(), beta)
    assert got == pytest.approx(offset, abs=1e-8)
    assert part.cluster_sizes().sum() == 25
    assert part.K == part.partition().K


def test_decode_state_round_trip():
    from esc_partitions.mcmc.kernels import encode_state

    for p in enumerate_partitions(5):
        z = (p.allocations - 1).astype(np.int64)
        code = encode_state(z, np.full(5, -1, dtype=np.int64))
        assert tuple(decode_state(code, 5)) == p.key()


# ---------------------------------------------------------------- slice sampler


def test_slice_flat_interval_is_uniform():
    rng = np.random.default_rng(8)
    x, xs = 0.5, []
    for _ in range(5000):
        x, _ = slice_sample_1d(x, lambda v: 0.0, rng, width=0.25, lower=0.0, upper=1.0)
        xs.append(x)
    assert kstest(xs, "uniform").pvalue > 1e-3


def test_slice_exponential_mean():
    rng = np.random.default_rng(9)
    x, xs = 1.0, []
    for _ in range(20_000):
        x, _ = slice_sample_1d(x, lambda v: -v if v > 0 else -np.inf, rng, width=1.0, lower=0.0)
        xs.append(x)
    assert abs(np.mean(xs) - 1.0) < 0.05


def test_slice_rejects_start_outside_support():
    with pytest.raises(ValueError):
        slice_sample_1d(-1.0, lambda v: -np.inf, np.random.default_rng(0))


# ---------------------------------------------------------------- traces and configs


def small_data(seed=10, n=40):
    rng = np.random.default_rng(seed)
    z = np.repeat(np.arange(n // 2), 2)
    base = rng.integers(0, 6, size=(n // 2, 3))
    return RecordTable.from_codes(base[z], [6, 6, 6])


@pytest.mark.parametrize("family", ["esc-nb", "esc-d", "dp", "py"])
def test_trace_shape_and_determinism(family):
    rec = small_data()
    cfg = ChainConfig(model=ModelSpec(family), iterations=60, burn_in=20, thin=4, partition_moves_per_iter=50,
                      seed=11, beta_mode="inferred")
    a = run_chain(cfg, rec)
    b = run_chain(cfg, rec)
    assert len(a) == (60 - 20) // 4
    assert a.allocations.shape == (10, rec.n) and a.beta.shape == (10, rec.L)
    assert np.array_equal(a.allocations, b.allocations) and np.array_equal(a.K, b.K)
    assert np.array_equal(a.beta, b.beta)
    assert np.all(a.K == [p.max() for p in a.allocations])
    esc = family.startswith("esc")
    assert np.isnan(a.r).all() != esc and np.isnan(a.concentration).all() == esc


def test_parallel_chains_are_reproducible():
    rec = small_data()
    cfg = ChainConfig(model=ModelSpec("dp"), iterations=30, burn_in=10, partition_moves_per_iter=30, seed=12)
    a = run_chains(cfg, rec, 2)
    b = run_chains(cfg, rec, 2)
    assert all(np.array_equal(x.allocations, y.allocations) for x, y in zip(a, b))
    solo = run_chain(cfg, rec)
    assert np.array_equal(a[0].allocations, solo.allocations)


def test_duplicates_get_linked():
    rec = small_data(n=60)
    cfg = ChainConfig(model=ModelSpec("esc-nb"), iterations=300, burn_in=150, partition_moves_per_iter=200, seed=13)
    trace = run_chain(cfg, rec)
    assert abs(trace.K.mean() - 30) < 6


@pytest.mark.parametrize(
    "kw",
    [dict(iterations=10, burn_in=10), dict(thin=0), dict(beta_mode="learned"), dict(init="random"),
     dict(scan_every=-1)],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        ChainConfig(**kw)


def test_model_validation():
    with pytest.raises(ValueError):
        ModelSpec("crp")
    with pytest.raises(ValueError):
        ModelSpec("py", sigma=1.0)
    with pytest.raises(ValueError):
        run_chain(ChainConfig(iterations=2, burn_in=1), None)


def test_single_record_chain():
    trace = run_chain(ChainConfig(model=ModelSpec("dp"), iterations=5, burn_in=1), None, n=1)
    assert np.all(trace.K == 1)
