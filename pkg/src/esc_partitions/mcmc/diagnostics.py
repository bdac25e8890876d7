"""Monte Carlo error for scalar chain summaries."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

MIN_SAMPLES = 100


class ChainSummary(NamedTuple):
    mean: float
    mcse: float
    ess: float


def autocorrelation(x: np.ndarray) -> np.ndarray:
    """Sample autocorrelation at all lags via FFT."""
    x = np.asarray(x, dtype=float)
    n = x.size
    d = x - x.mean()
    size = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(d, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    if acov[0] <= 0:
        return np.zeros(n)
    return acov / acov[0]


def effective_sample_size(x: np.ndarray) -> float:
    """Geyer's initial monotone positive sequence estimator."""
    x = np.asarray(x, dtype=float)
    n = x.size
    rho = autocorrelation(x)
    if rho[0] == 0:
        return float(n)
    pairs = rho[: 2 * (n // 2)].reshape(-1, 2).sum(axis=1)
    neg = np.flatnonzero(pairs <= 0)
    pairs = pairs[: neg[0]] if neg.size else pairs
    pairs = np.minimum.accumulate(pairs)
    tau = -1.0 + 2.0 * pairs.sum()
    tau = max(tau, 1.0 / np.log10(max(n, 10)))
    return float(n / tau)


def diagnostics(x) -> ChainSummary:
    """Mean, Monte Carlo standard error and effective sample size of a trace."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("trace contains non-finite values")
    mean = float(x.mean())
    if np.ptp(x) == 0:
        return ChainSummary(mean, 0.0, float(x.size))
    ess = effective_sample_size(x)
    return ChainSummary(mean, float(x.std(ddof=1) / np.sqrt(ess)), ess)
