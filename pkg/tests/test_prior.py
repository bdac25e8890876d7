import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esc_partitions.partition import enumerate_partitions, from_allocations, log_eppf_conditional
from esc_partitions.prior import (
    EscHyper,
    ExplicitSizes,
    TruncNegBin,
    default_truncation,
    log_cond_rp_escd,
    log_cond_rp_nb,
    log_eppf_escd_unnormalized,
    log_gamma_variates,
    p_event_en,
    realloc_weights,
    realloc_weights_nb,
    sample_mu_posterior,
    trunc_negbin_mean,
    trunc_negbin_pmf,
)

from .oracles import dirichlet_eppf_escd, nb_pmf, p_hit

GEO = TruncNegBin(1.0, 0.5)
HYPER = EscHyper()

rs = st.floats(0.05, 20.0)
ps = st.floats(0.01, 0.95)


def norm(w):
    w = np.asarray(w, dtype=float)
    return w / w.sum()


@pytest.mark.parametrize("s, r, p, want", [(1, 1, 0.5, 0.5), (3, 1, 0.5, 0.125), (2, 2, 0.5, 0.25)])
def test_pmf_examples(s, r, p, want):
    assert trunc_negbin_pmf(s, r, p) == pytest.approx(want, rel=1e-13)


@pytest.mark.parametrize("r, p", [(0.0, 0.5), (-1.0, 0.5), (1.0, 0.0), (1.0, 1.0)])
def test_pmf_rejects_bad_parameters(r, p):
    with pytest.raises(ValueError):
        trunc_negbin_pmf(1, r, p)


def test_pmf_rejects_size_zero():
    with pytest.raises(ValueError):
        trunc_negbin_pmf(0, 1.0, 0.5)


@pytest.mark.parametrize("r, p, want", [(1, 0.5, 2.0), (2, 0.5, 8 / 3), (0.5, 0.5, 1.7071067811865475)])
def test_mean_examples(r, p, want):
    assert trunc_negbin_mean(r, p) == pytest.approx(want, rel=1e-12)


@given(rs, ps)
def test_pmf_matches_oracle_and_sums_to_one(r, p):
    mu = TruncNegBin(r, p)
    s = np.arange(1, 8)
    want = [nb_pmf(int(k), r, p) for k in s]
    assert np.allclose(mu.pmf(s), want, rtol=1e-9, atol=0)
    m = 50
    while mu.tail(m) > 1e-12:
        m *= 2
    assert mu.pmf(np.arange(1, m + 1)).sum() + mu.tail(m) == pytest.approx(1.0, abs=1e-10)
    assert mu.pmf(1) > 0


@given(rs, st.floats(0.01, 0.9))
@settings(max_examples=40)
def test_mean_matches_partial_sums(r, p):
    mu = TruncNegBin(r, p)
    s = np.arange(1, 4000)
    assert float(np.sum(s * mu.pmf(s))) == pytest.approx(trunc_negbin_mean(r, p), rel=1e-8)


def test_gamma_stable_for_tiny_p():
    mu = TruncNegBin(1.0, 1e-12)
    assert mu.pmf(1) == pytest.approx(1.0, abs=1e-11)


def test_renewal_all_singletons():
    mu = ExplicitSizes.from_probs([1.0])
    assert [p_event_en(mu, n) for n in range(6)] == [1.0] * 6


def test_renewal_geometric_half():
    for n in range(1, 60):
        assert p_event_en(GEO, n) == pytest.approx(0.5, abs=1e-12)


def test_renewal_parity():
    mu = ExplicitSizes.from_probs([0.0, 1.0])
    assert [p_event_en(mu, n) for n in range(7)] == [1, 0, 1, 0, 1, 0, 1]


@pytest.mark.parametrize("r, p", [(1, 0.5), (2, 0.5), (0.5, 0.5), (3.0, 0.2)])
def test_renewal_matches_compositions(r, p):
    mu = TruncNegBin(r, p)
    for n in range(1, 11):
        assert p_event_en(mu, n) == pytest.approx(p_hit(n, lambda s: nb_pmf(s, r, p)), rel=1e-11)


def test_renewal_limit():
    assert abs(p_event_en(GEO, 500) - 1 / trunc_negbin_mean(1, 0.5)) < 1e-6


def test_realloc_examples():
    assert norm(realloc_weights([], GEO)).tolist() == [1.0]
    assert np.allclose(norm(realloc_weights([2, 1], GEO)), [0.375, 0.25, 0.375], atol=1e-14)
    assert np.allclose(norm(realloc_weights([1], GEO)), [0.5, 0.5], atol=1e-14)


def test_realloc_nb_examples():
    assert np.allclose(realloc_weights_nb([2, 1], 1, 0.5), [3, 2, 3])
    assert np.allclose(norm(realloc_weights_nb([2, 1], 2, 0.5)), [4 / 9, 3 / 9, 2 / 9], atol=1e-14)
    assert norm(realloc_weights_nb([], 1.7, 0.3)).tolist() == [1.0]


def test_realloc_zero_mass_slot():
    # growing the pair to size 3 is impossible; growing the singleton is not
    mu = ExplicitSizes.from_probs([0.5, 0.5, 0.0])
    w = realloc_weights([2, 1], mu)
    assert w[0] == 0.0 and w[1] == pytest.approx(2.0) and w[2] == pytest.approx(1.5)


@given(st.lists(st.integers(1, 30), max_size=10), rs, ps)
def test_nb_weights_specialize_general(sizes, r, p):
    a = norm(realloc_weights_nb(sizes, r, p))
    b = norm(realloc_weights(sizes, TruncNegBin(r, p)))
    assert np.allclose(a, b, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_gibbs_balance(n):
    mu = TruncNegBin(1.7, 0.35)
    lpe = math.log(p_event_en(mu, n))
    for part in enumerate_partitions(n):
        for i in range(n):
            rest = from_allocations(np.delete(part.allocations, i))
            sizes = rest.sizes.tolist()
            w = norm(realloc_weights(sizes, mu))
            probs = []
            for t in range(1, rest.K + 2):
                z = np.insert(rest.allocations, i, t)
                probs.append(math.exp(log_eppf_conditional(from_allocations(z), mu, lpe)))
            assert np.allclose(w, norm(probs), rtol=1e-10)


def test_cond_rp_nb_examples():
    assert log_cond_rp_nb([2, 1], 1, 0.5, HYPER) == pytest.approx(math.log(math.exp(-1) * 0.5**5 * 2), abs=1e-10)
    assert log_cond_rp_nb([1], 1, 0.5, HYPER) == pytest.approx(-3.0794415416798357, abs=1e-10)
    assert log_cond_rp_nb([2, 1], 2, 0.5, HYPER) == pytest.approx(-5.178, abs=1e-3)


def test_cond_rp_outside_support():
    for f in (lambda r, p: log_cond_rp_nb([1], r, p, HYPER), lambda r, p: log_cond_rp_escd({1: 1}, r, p, HYPER)):
        assert f(0.0, 0.5) == -np.inf and f(1.0, 1.0) == -np.inf and f(1.0, 0.0) == -np.inf


@pytest.mark.parametrize(
    "occ, inner",
    [({1: 1}, 0.25 * 0.5), ({1: 1, 2: 1}, 0.25 * 0.125), ({1: 2}, 0.25 * 0.75)],
)
def test_cond_rp_escd_examples(occ, inner):
    assert log_cond_rp_escd(occ, 1, 0.5, HYPER) == pytest.approx(math.log(math.exp(-1) * inner), abs=1e-10)


@given(st.dictionaries(st.integers(1, 6), st.integers(1, 4), min_size=1, max_size=4))
@settings(max_examples=30)
def test_escd_approaches_nb_for_large_alpha(occ):
    hyper = EscHyper(alpha=1e8)
    sizes = [s for s, c in occ.items() for _ in range(c)]
    pts = [(1.0, 0.5), (2.0, 0.3), (0.7, 0.6)]
    d_escd = [log_cond_rp_escd(occ, r, p, hyper) for r, p in pts]
    d_nb = [log_cond_rp_nb(sizes, r, p, HYPER) for r, p in pts]
    assert np.allclose(np.diff(d_escd), np.diff(d_nb), atol=1e-3)


def test_escd_eppf_matches_oracle():
    n, r, p, a = 5, 1.3, 0.4, 2.0
    for part in enumerate_partitions(n):
        want = dirichlet_eppf_escd(part.sizes.tolist(), r, p, a, n)
        assert math.exp(log_eppf_escd_unnormalized(part, r, p, a)) == pytest.approx(want, rel=1e-10)


def test_mu_posterior_parameters_by_moments():
    rng = np.random.default_rng(11)
    draws = np.array([sample_mu_posterior({1: 2, 2: 1}, 1.0, 1.0, 0.5, 3, rng).probs for _ in range(20000)])
    # Dirichlet(2.5, 1.25, 0.125, 0.125): total 4
    want = np.array([2.5, 1.25, 0.125]) / 4
    se = np.sqrt(want * (1 - want) / 5) / np.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - want) < 4 * se)


def test_mu_prior_mean_is_base():
    rng = np.random.default_rng(5)
    draws = np.array([sample_mu_posterior({}, 1.0, 2.0, 0.5, 4, rng).probs for _ in range(20000)])
    base = TruncNegBin(2.0, 0.5).pmf(np.arange(1, 5))
    se = np.sqrt(base * (1 - base) / 2) / np.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - base) < 4 * se)


def test_mu_posterior_simplex_and_truncation_guard():
    rng = np.random.default_rng(0)
    mu = sample_mu_posterior({1: 3, 4: 1}, 0.5, 1.0, 0.5, default_truncation(4), rng)
    assert np.all(mu.probs >= 0)
    assert mu.probs.sum() + mu.tail == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        sample_mu_posterior({5: 1}, 1.0, 1.0, 0.5, 4, rng)


def test_extension_preserves_resolved_components():
    rng = np.random.default_rng(2)
    mu = sample_mu_posterior({1: 3}, 1.0, 1.0, 0.5, 32, rng)
    big = mu.extended(200, rng)
    assert big.m == 200
    assert np.array_equal(big.log_probs[:32], mu.log_probs)
    assert big.probs.sum() + big.tail == pytest.approx(1.0, abs=1e-12)


def test_explicit_rejects_bad_mass():
    with pytest.raises(ValueError):
        ExplicitSizes.from_probs([0.5, 0.4])


def test_tail_sizes_refuse_to_evaluate():
    mu = ExplicitSizes.from_probs([0.5], tail=0.5)
    with pytest.raises(ValueError):
        mu.logpmf([2])


def test_log_gamma_variates_tiny_shapes():
    rng = np.random.default_rng(1)
    out = log_gamma_variates(np.array([1e-320, 1e-30, 0.0, 2.0]), rng)
    assert out[2] == -np.inf and np.isfinite(out[3]) and not np.isnan(out).any()
