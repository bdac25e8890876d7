"""Posterior draws retained by a chain."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..partition import Partition


@dataclass
class Trace:
    """Saved iterations with their partitions (canonical labels 1..K) and scalars.

    Parameters not present in a model are stored as NaN.
    """

    meta: dict[str, Any]
    iterations: np.ndarray
    K: np.ndarray
    r: np.ndarray
    p: np.ndarray
    concentration: np.ndarray
    sigma: np.ndarray
    beta: np.ndarray
    allocations: np.ndarray
    _rows: list = field(default_factory=list, repr=False)

    @classmethod
    def empty(cls, n: int, L: int, meta: dict[str, Any]) -> "Trace":
        meta = dict(meta, n=n, L=L)
        z = np.zeros(0)
        return cls(meta, z.astype(np.int64), z.astype(np.int64), z, z, z, z,
                   np.zeros((0, L)), np.zeros((0, n), dtype=np.int32))

    def append(self, t: int, allocations, state, beta) -> None:
        fam = state.model.family
        esc = fam.startswith("esc")
        labels = Partition.from_allocations(allocations).allocations.astype(np.int32)
        self._rows.append((
            t, int(labels.max()),
            state.r if esc else np.nan, state.p if esc else np.nan,
            np.nan if esc else state.theta, state.sigma if fam == "py" else np.nan,
            np.array(beta, dtype=float), labels,
        ))

    def freeze(self) -> "Trace":
        """Stack buffered rows into arrays."""
        if not self._rows:
            return self
        cols = list(zip(*self._rows))
        self._rows = []
        L = self.beta.shape[1]
        n = self.allocations.shape[1]
        return Trace(
            self.meta,
            np.concatenate([self.iterations, np.array(cols[0], dtype=np.int64)]),
            np.concatenate([self.K, np.array(cols[1], dtype=np.int64)]),
            np.concatenate([self.r, np.array(cols[2], dtype=float)]),
            np.concatenate([self.p, np.array(cols[3], dtype=float)]),
            np.concatenate([self.concentration, np.array(cols[4], dtype=float)]),
            np.concatenate([self.sigma, np.array(cols[5], dtype=float)]),
            np.concatenate([self.beta, np.array(cols[6], dtype=float).reshape(len(cols[0]), L)]),
            np.concatenate([self.allocations, np.array(cols[7], dtype=np.int32).reshape(len(cols[0]), n)]),
        )

    def __len__(self) -> int:
        return int(self.iterations.size)

    @property
    def n(self) -> int:
        return int(self.allocations.shape[1])

    def partition(self, k: int) -> Partition:
        return Partition.from_allocations(self.allocations[k])

    def occupancy_draws(self) -> np.ndarray:
        """(S, n+1) array; entry [t, s] counts clusters of size s in draw t."""
        n = self.n
        out = np.zeros((len(self), n + 1), dtype=np.int64)
        for t, z in enumerate(self.allocations):
            sizes = np.bincount(z)[1:]
            out[t] = np.bincount(sizes, minlength=n + 1)
        return out

    def max_size(self) -> np.ndarray:
        return np.array([np.bincount(z)[1:].max() for z in self.allocations], dtype=np.int64)
