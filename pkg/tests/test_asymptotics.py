import numpy as np
import pytest

from esc_partitions.asymptotics import asymptotic_estimates, convergence_table, exact_sizes, tv_distance
from esc_partitions.prior import ExplicitSizes, TruncNegBin

GEO = TruncNegBin(1.0, 0.5)


def test_exact_sizes_sum():
    rng = np.random.default_rng(0)
    for n in (1, 7, 300):
        assert exact_sizes(GEO, n, rng).sum() == n


def test_all_singletons_when_mu_is_point_mass():
    mu = ExplicitSizes.from_probs([1.0])
    est = asymptotic_estimates(mu, 50, 3, np.random.default_rng(1), smax=3)
    assert est.k_over_n == 1.0 and est.max_over_n == 1 / 50
    assert np.allclose(est.occupancy, [1, 0, 0]) and np.allclose(est.cluster_size_hist, [1, 0, 0])


def test_geometric_limits_small_run():
    est = asymptotic_estimates(GEO, 2000, 40, np.random.default_rng(2))
    assert abs(est.k_over_n - 0.5) < 0.02
    assert abs(est.occupancy[0] - 0.25) < 0.02
    s = np.arange(1, 11)
    assert tv_distance(est.cluster_size_hist, GEO.pmf(s)) < 0.03


def test_workers_match_serial():
    a = asymptotic_estimates(GEO, 500, 8, np.random.default_rng(3))
    b = asymptotic_estimates(GEO, 500, 8, np.random.default_rng(3), workers=4)
    assert a.k_over_n == b.k_over_n and np.array_equal(a.occupancy, b.occupancy)


def test_max_share_shrinks():
    rows = convergence_table(GEO, [100, 1000, 10_000], 30, np.random.default_rng(4))
    m = [r.max_over_n for r in rows]
    assert m[0] > m[1] > m[2]


def test_input_checks():
    with pytest.raises(ValueError):
        asymptotic_estimates(GEO, 0, 5, np.random.default_rng(0))
    with pytest.raises(ValueError):
        asymptotic_estimates(ExplicitSizes.from_probs([0.0, 1.0]), 4, 1, np.random.default_rng(0))


def test_tv_examples():
    assert tv_distance([1, 0], [0, 1]) == 1.0
    assert tv_distance([0.5, 0.5], [0.5, 0.5]) == 0.0
