"""Univariate slice sampling with stepping out and shrinkage."""
from __future__ import annotations

from typing import Callable

import numpy as np


def slice_sample_1d(
    x0: float,
    logf: Callable[[float], float],
    rng: np.random.Generator,
    width: float = 1.0,
    lower: float = -np.inf,
    upper: float = np.inf,
    max_steps: int = 50,
    logf_x0: float | None = None,
) -> tuple[float, float]:
    """One slice-sampling update of ``x0``; returns (new x, logf at new x).

    ``logf`` may return ``-inf`` outside the support; the bracket is also
    clipped to ``[lower, upper]``.
    """
    fx = logf(x0) if logf_x0 is None else logf_x0
    if not np.isfinite(fx):
        raise ValueError(f"log density is not finite at the current point {x0!r}")
    log_y = fx + np.log(rng.random())

    u = rng.random()
    left = x0 - u * width
    right = left + width
    # split the step budget randomly between the two directions
    j = int(np.floor(rng.random() * max_steps))
    k = max_steps - 1 - j
    while j > 0 and left > lower and logf(left) > log_y:
        left -= width
        j -= 1
    while k > 0 and right < upper and logf(right) > log_y:
        right += width
        k -= 1
    left = max(left, lower)
    right = min(right, upper)

    while True:
        x1 = left + rng.random() * (right - left)
        if x1 <= lower or x1 >= upper:
            f1 = -np.inf
        else:
            f1 = logf(x1)
        if f1 > log_y:
            return x1, f1
        if x1 < x0:
            left = x1
        else:
            right = x1
        if right - left < 1e-300:
            return x0, fx
