"""Cluster-size distributions and the ESC prior's conditional densities.

Two size laws are supported: the zero-truncated negative binomial
(``TruncNegBin``) used by ESC-NB and as the base measure of ESC-D, and an
explicit probability vector with a lumped tail (``ExplicitSizes``), which is
what a Dirichlet draw of ``mu`` looks like after truncation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np
from scipy.special import gammaln, logsumexp
from scipy.stats import nbinom

from .partition import Partition


@dataclass(frozen=True)
class EscHyper:
    """Hyperparameters of the ESC-NB / ESC-D priors.

    ``r ~ Gamma(shape=eta_r, scale=s_r)``, ``p ~ Beta(u_p, v_p)``; ``alpha`` is
    the Dirichlet concentration (ESC-D only).
    """

    eta_r: float = 1.0
    s_r: float = 1.0
    u_p: float = 2.0
    v_p: float = 2.0
    alpha: float = 1.0

    def __post_init__(self):
        for name in ("eta_r", "s_r", "u_p", "v_p", "alpha"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    def log_prior_r(self, r: float) -> float:
        return (self.eta_r - 1.0) * np.log(r) - r / self.s_r

    def log_prior_p(self, p: float) -> float:
        return (self.u_p - 1.0) * np.log(p) + (self.v_p - 1.0) * np.log1p(-p)


def _check_rp(r: float, p: float) -> None:
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")


def log_gamma_const(r: float, p: float) -> float:
    """log of (1-p)^r / (1 - (1-p)^r), stable for small p and large r."""
    a = r * np.log1p(-p)
    return a - np.log(-np.expm1(a))


@dataclass(frozen=True)
class TruncNegBin:
    """Negative binomial on {1, 2, ...}: mu_s = gamma Gamma(s+r) p^s / (Gamma(r) s!)."""

    r: float
    p: float

    def __post_init__(self):
        _check_rp(self.r, self.p)

    @property
    def gamma(self) -> float:
        return float(np.exp(self.log_gamma))

    @property
    def log_gamma(self) -> float:
        return float(log_gamma_const(self.r, self.p))

    def logpmf(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        out = (
            self.log_gamma
            + gammaln(s + self.r)
            + s * np.log(self.p)
            - gammaln(self.r)
            - gammaln(s + 1.0)
        )
        return np.where(s >= 1, out, -np.inf)

    def pmf(self, s) -> np.ndarray:
        return np.exp(self.logpmf(s))

    def mean(self) -> float:
        return trunc_negbin_mean(self.r, self.p)

    def tail(self, m: int) -> float:
        """P(S > m)."""
        p0 = np.exp(self.r * np.log1p(-self.p))
        return float(nbinom.sf(m, self.r, 1.0 - self.p) / (1.0 - p0))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        p0 = float(np.exp(self.r * np.log1p(-self.p)))
        if p0 > 0.8:
            # zero-rejection would waste most draws
            u = p0 + rng.random(size) * (1.0 - p0)
            out = nbinom.ppf(u, self.r, 1.0 - self.p).astype(np.int64)
            return np.maximum(out, 1)
        out = rng.negative_binomial(self.r, 1.0 - self.p, size=size)
        bad = out == 0
        while bad.any():
            out[bad] = rng.negative_binomial(self.r, 1.0 - self.p, size=int(bad.sum()))
            bad = out == 0
        return out.astype(np.int64)


class ExplicitSizes:
    """Explicit size law: probabilities for sizes 1..m plus a lumped tail mass.

    When built from a Dirichlet around a ``TruncNegBin`` base (``base`` and
    ``alpha`` set), the tail can be split into further components on demand
    with :meth:`extended`, which is exact because no observed cluster lies in
    the tail.
    """

    def __init__(
        self,
        log_probs: Sequence[float],
        log_tail: float = -np.inf,
        base: Optional[TruncNegBin] = None,
        alpha: Optional[float] = None,
    ):
        self.log_probs = np.asarray(log_probs, dtype=float)
        self.log_tail = float(log_tail)
        self.base = base
        self.alpha = alpha
        if self.log_probs.ndim != 1 or self.log_probs.size == 0:
            raise ValueError("need at least one size probability")
        total = np.exp(logsumexp(np.append(self.log_probs, self.log_tail)))
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"size probabilities sum to {total!r}, not 1")

    @classmethod
    def from_probs(cls, probs: Sequence[float], tail: float = 0.0, **kw) -> "ExplicitSizes":
        probs = np.asarray(probs, dtype=float)
        if np.any(probs < 0) or tail < 0:
            raise ValueError("probabilities must be nonnegative")
        with np.errstate(divide="ignore"):
            return cls(np.log(probs), np.log(tail), **kw)

    @property
    def m(self) -> int:
        return int(self.log_probs.size)

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    @property
    def tail(self) -> float:
        return float(np.exp(self.log_tail))

    def logpmf(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=np.int64)
        if np.any(s > self.m) and self.log_tail > -np.inf:
            raise ValueError(f"size {int(s.max())} lies in the unresolved tail (m={self.m})")
        out = np.full(s.shape, -np.inf)
        ok = (s >= 1) & (s <= self.m)
        out[ok] = self.log_probs[s[ok] - 1]
        return out

    def pmf(self, s) -> np.ndarray:
        return np.exp(self.logpmf(s))

    def mean(self) -> float:
        if self.log_tail > -np.inf:
            raise ValueError("mean undefined with unresolved tail mass")
        return float(np.sum(np.arange(1, self.m + 1) * self.probs))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw sizes; a draw of ``m + 1`` stands for "some size beyond m"."""
        p = np.append(self.probs, self.tail)
        cdf = np.cumsum(p)
        cdf /= cdf[-1]
        return np.searchsorted(cdf, rng.random(size), side="right").astype(np.int64) + 1

    def extended(self, m_new: int, rng: np.random.Generator) -> "ExplicitSizes":
        """Resolve sizes m+1..m_new out of the tail by Dirichlet aggregation."""
        if m_new <= self.m:
            return self
        if self.log_tail == -np.inf:
            pad = np.full(m_new - self.m, -np.inf)
            return ExplicitSizes(np.append(self.log_probs, pad), -np.inf, self.base, self.alpha)
        if self.base is None or self.alpha is None:
            raise ValueError("cannot split the tail without a base measure")
        s = np.arange(self.m + 1, m_new + 1)
        shapes = np.append(self.alpha * self.base.pmf(s), self.alpha * self.base.tail(m_new))
        log_g = log_gamma_variates(shapes, rng)
        log_share = log_g - logsumexp(log_g)
        log_new = self.log_tail + log_share
        return ExplicitSizes(
            np.append(self.log_probs, log_new[:-1]), log_new[-1], self.base, self.alpha
        )


SizeDistribution = Union[TruncNegBin, ExplicitSizes]


def log_gamma_variates(shapes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """log of independent Gamma(shape, 1) draws without underflow for tiny shapes."""
    shapes = np.asarray(shapes, dtype=float)
    out = np.full(shapes.shape, -np.inf)
    pos = shapes > 0
    a = shapes[pos]
    # Gamma(a) = Gamma(a + 1) * U^(1/a)
    g = rng.standard_gamma(a + 1.0)
    u = rng.random(a.size)
    # subnormal shapes send the draw to -inf, which is the correct limit
    with np.errstate(over="ignore", divide="ignore"):
        out[pos] = np.log(g) + np.log(u) / a
    return out


def trunc_negbin_pmf(s: int, r: float, p: float) -> float:
    if s < 1:
        raise ValueError("size must be at least 1")
    return float(TruncNegBin(r, p).pmf(s))


def trunc_negbin_mean(r: float, p: float) -> float:
    _check_rp(r, p)
    return float((r * p / (1.0 - p)) / -np.expm1(r * np.log1p(-p)))


def size_pmf_array(mu, n: int) -> np.ndarray:
    """[mu_1, ..., mu_n] for either size law."""
    if isinstance(mu, ExplicitSizes) and mu.m < n:
        if mu.log_tail > -np.inf:
            raise ValueError(f"explicit sizes resolved only up to m={mu.m} < {n}")
        return np.append(mu.probs, np.zeros(n - mu.m))
    return np.asarray(mu.pmf(np.arange(1, n + 1)), dtype=float)


def renewal_sequence(mu, n: int) -> np.ndarray:
    """u_0..u_n with u_0 = 1 and u_k = sum_{s=1}^k mu_s u_{k-s}."""
    f = size_pmf_array(mu, n) if n > 0 else np.zeros(0)
    u = np.empty(n + 1)
    u[0] = 1.0
    for k in range(1, n + 1):
        u[k] = np.dot(f[:k], u[k - 1 :: -1])
    return u


def p_event_en(mu, n: int) -> float:
    """Probability that partial sums of iid sizes from ``mu`` hit ``n`` exactly."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return float(renewal_sequence(mu, n)[n])


def realloc_weights(sizes_minus_i: Sequence[int], mu) -> np.ndarray:
    """Unnormalized reallocation weights: one per existing cluster, then "new".

    Existing cluster of size s gets (s+1) mu_{s+1} / mu_s, the new cluster
    (k+1) mu_1, where k is the number of remaining clusters.
    """
    s = np.asarray(sizes_minus_i, dtype=np.int64)
    k = s.size
    if isinstance(mu, ExplicitSizes) and k and s.max() + 1 > mu.m and mu.log_tail > -np.inf:
        raise ValueError("extend the explicit size law before computing weights")
    log_num = mu.logpmf(s + 1) if k else np.zeros(0)
    log_den = mu.logpmf(s) if k else np.zeros(0)
    w = np.zeros(k + 1)
    ok = np.isfinite(log_num) & np.isfinite(log_den)
    w[:k][ok] = (s[ok] + 1) * np.exp(log_num[ok] - log_den[ok])
    w[k] = (k + 1) * float(np.exp(mu.logpmf(1)))
    return w


def realloc_weights_nb(sizes_minus_i: Sequence[int], r: float, p: float) -> np.ndarray:
    """Negative-binomial specialisation: S_j + r per cluster, (K+1) gamma r for new."""
    _check_rp(r, p)
    s = np.asarray(sizes_minus_i, dtype=float)
    k = s.size
    return np.append(s + r, (k + 1) * np.exp(log_gamma_const(r, p)) * r)


def _sizes_of(p_art) -> np.ndarray:
    if isinstance(p_art, Partition):
        return p_art.sizes
    return np.asarray(p_art, dtype=np.int64)


def log_cond_rp_nb(p_art, r: float, p: float, hyper: EscHyper) -> float:
    """Unnormalized log density of (r, p) given the partition under ESC-NB."""
    if not r > 0 or not 0 < p < 1:
        return -np.inf
    sizes = _sizes_of(p_art)
    n = int(sizes.sum())
    k = sizes.size
    return float(
        hyper.log_prior_r(r)
        + (n + hyper.u_p - 1.0) * np.log(p)
        + (hyper.v_p - 1.0) * np.log1p(-p)
        + k * log_gamma_const(r, p)
        + np.sum(gammaln(sizes + r)) - k * gammaln(r)
    )


def _occupancy_arrays(occupancy: Mapping[int, int]) -> tuple[np.ndarray, np.ndarray]:
    items = [(int(s), int(c)) for s, c in occupancy.items() if c > 0]
    if not items:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    s, c = zip(*sorted(items))
    return np.array(s, dtype=np.int64), np.array(c, dtype=np.int64)


def log_cond_rp_escd(occupancy: Mapping[int, int], r: float, p: float, hyper: EscHyper) -> float:
    """Unnormalized log density of (r, p) given the partition under ESC-D, mu collapsed."""
    if not r > 0 or not 0 < p < 1:
        return -np.inf
    s, c = _occupancy_arrays(occupancy)
    a = hyper.alpha * TruncNegBin(r, p).pmf(s)
    if np.any(a <= 0):
        return -np.inf
    return float(
        hyper.log_prior_r(r)
        + hyper.log_prior_p(p)
        + np.sum(gammaln(c + a) - gammaln(a))
    )


def log_eppf_escd_unnormalized(p_art, r: float, p: float, alpha: float) -> float:
    """ESC-D marginal EPPF at fixed (r, p), up to the constant 1/P(E_n)."""
    sizes = _sizes_of(p_art)
    n = int(sizes.sum())
    k = sizes.size
    s, c = _occupancy_arrays(dict(zip(*np.unique(sizes, return_counts=True))))
    a = alpha * TruncNegBin(r, p).pmf(s)
    return float(
        gammaln(k + 1)
        - gammaln(n + 1)
        + gammaln(alpha)
        - gammaln(k + alpha)
        + np.sum(c * gammaln(s + 1.0) + gammaln(c + a) - gammaln(a))
    )


def default_truncation(max_size: int) -> int:
    return max(2 * int(max_size), 32)


def sample_mu_posterior(
    occupancy: Mapping[int, int],
    alpha: float,
    r: float,
    p: float,
    m: int,
    rng: np.random.Generator,
) -> ExplicitSizes:
    """Draw mu_1..mu_m and the tail mass from their Dirichlet full conditional."""
    s, c = _occupancy_arrays(occupancy)
    if s.size and s.max() > m:
        raise ValueError(f"truncation m={m} below the largest cluster size {s.max()}")
    base = TruncNegBin(r, p)
    counts = np.zeros(m)
    counts[s - 1] = c
    shapes = np.append(alpha * base.pmf(np.arange(1, m + 1)) + counts, alpha * base.tail(m))
    log_g = log_gamma_variates(shapes, rng)
    log_mu = log_g - logsumexp(log_g)
    return ExplicitSizes(log_mu[:-1], log_mu[-1], base=base, alpha=alpha)


def sample_mu_prior(alpha: float, r: float, p: float, m: int, rng: np.random.Generator) -> ExplicitSizes:
    return sample_mu_posterior({}, alpha, r, p, m, rng)


MuPrior = Callable[[np.random.Generator], object]


def fixed_mu(mu) -> MuPrior:
    """A degenerate prior that always returns ``mu``."""
    return lambda rng: mu


def esc_nb_mu_prior(hyper: EscHyper) -> MuPrior:
    def draw(rng: np.random.Generator) -> TruncNegBin:
        r = rng.gamma(hyper.eta_r, hyper.s_r)
        p = rng.beta(hyper.u_p, hyper.v_p)
        return TruncNegBin(max(r, 1e-300), min(max(p, 1e-300), 1 - 1e-16))

    return draw


def esc_d_mu_prior(hyper: EscHyper, m: int) -> MuPrior:
    """Dirichlet(alpha, TruncNegBin(r, p)) with (r, p) from their priors, resolved to size m."""
    nb = esc_nb_mu_prior(hyper)

    def draw(rng: np.random.Generator) -> ExplicitSizes:
        base = nb(rng)
        return sample_mu_prior(hyper.alpha, base.r, base.p, m, rng)

    return draw
