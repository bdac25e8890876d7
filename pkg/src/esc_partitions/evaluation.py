"""Pairwise linkage error rates and posterior summaries of traces."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .mcmc.diagnostics import MIN_SAMPLES, diagnostics
from .mcmc.trace import Trace
from .partition import Partition

QUANTILES = (0.025, 0.25, 0.5, 0.75, 0.975)


@dataclass(frozen=True)
class PairConfusion:
    """Counts over unordered record pairs: linked in both, only in the estimate, only in the truth."""

    tp: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError("pair counts must be nonnegative")

    @property
    def fnr(self) -> float:
        """Share of true links missed; 0 when the truth has none."""
        d = self.tp + self.fn
        return self.fn / d if d else 0.0

    @property
    def fdr(self) -> float:
        """Share of declared links that are wrong; 0 when none are declared."""
        d = self.tp + self.fp
        return self.fp / d if d else 0.0


def _pairs(counts: np.ndarray) -> int:
    counts = counts.astype(np.int64)
    return int(np.sum(counts * (counts - 1) // 2))


def _labels(p) -> np.ndarray:
    return p.allocations if isinstance(p, Partition) else np.asarray(p)


def pairwise_confusion(truth, estimate) -> PairConfusion:
    """Pair counts from the contingency table of two labelings."""
    a, b = _labels(truth), _labels(estimate)
    if a.shape != b.shape:
        raise ValueError(f"partitions cover different record counts: {a.size} vs {b.size}")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    joint = ia.ravel().astype(np.int64) * (ib.max(initial=0) + 1) + ib.ravel()
    tp = _pairs(np.bincount(joint))
    truth_pairs = _pairs(np.bincount(ia.ravel()))
    est_pairs = _pairs(np.bincount(ib.ravel()))
    return PairConfusion(tp, est_pairs - tp, truth_pairs - tp)


class PosteriorRates(NamedTuple):
    fnr: float
    fdr: float
    fnr_mcse: float
    fdr_mcse: float


def _mean_mcse(x: np.ndarray) -> tuple[float, float]:
    if x.size >= MIN_SAMPLES:
        d = diagnostics(x)
        return d.mean, d.mcse
    return float(x.mean()), float("nan")


def per_sample_rates(trace: Trace, truth) -> tuple[np.ndarray, np.ndarray]:
    if trace.allocations is None or len(trace) == 0:
        raise ValueError("trace holds no stored allocations")
    conf = [pairwise_confusion(truth, z) for z in trace.allocations]
    return np.array([c.fnr for c in conf]), np.array([c.fdr for c in conf])


def posterior_rates(trace: Trace, truth) -> PosteriorRates:
    """Averages of per-draw FNR and FDR; MCSE is NaN below the diagnostic minimum."""
    fnr, fdr = per_sample_rates(trace, truth)
    m1, s1 = _mean_mcse(fnr)
    m2, s2 = _mean_mcse(fdr)
    return PosteriorRates(m1, m2, s1, s2)


class PosteriorSummary(NamedTuple):
    mean_K: float
    se_K: float
    sizes: np.ndarray
    occupancy_quantiles: np.ndarray


def posterior_summaries(trace: Trace, max_size: int | None = None) -> PosteriorSummary:
    """E[K], its MCSE, and per-size quantiles of the cluster counts M_s.

    Row j of ``occupancy_quantiles`` holds the quantiles listed in
    ``QUANTILES`` for size ``sizes[j]``.
    """
    if len(trace) == 0:
        raise ValueError("empty trace")
    m, se = _mean_mcse(trace.K.astype(float))
    if np.ptp(trace.K) == 0:
        se = 0.0
    occ = trace.occupancy_draws()
    top = max_size or int(np.max(np.nonzero(occ.any(axis=0))[0]))
    sizes = np.arange(1, top + 1)
    q = np.quantile(occ[:, 1 : top + 1], QUANTILES, axis=0).T
    return PosteriorSummary(m, se, sizes, q)
