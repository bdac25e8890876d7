"""Mutable partition state shared by the compiled kernels."""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..likelihood import BETA_EPS, RecordTable, likelihood_tables
from ..partition import Partition
from . import kernels


class PartitionState:
    """Slot-labelled partition plus the likelihood bookkeeping of each cluster.

    ``records=None`` (or a table with no fields) gives a constant likelihood.
    """

    def __init__(self, records: Optional[RecordTable], allocations, beta=None):
        z0 = np.asarray(allocations, dtype=np.int64)
        n = z0.size
        if records is None:
            codes = np.zeros((n, 0), dtype=np.int64)
            theta = np.ones((0, 1))
        else:
            if records.n != n:
                raise ValueError("allocations and records disagree on n")
            codes = records.codes
            theta = records.theta_matrix()
        self.n = n
        self.codes = np.ascontiguousarray(codes, dtype=np.int64)
        self.theta = theta
        L = self.codes.shape[1]
        if beta is None:
            beta = np.full(L, 0.5)
        self.beta = np.clip(np.broadcast_to(np.asarray(beta, dtype=float), (L,)).copy(), BETA_EPS, 1 - BETA_EPS)
        self._set_tables()
        self.load(z0)

    def _set_tables(self) -> None:
        t = likelihood_tables(self.beta, self.theta)
        self.log_theta = np.ascontiguousarray(t.log_theta)
        self.log_rho = np.ascontiguousarray(t.log_rho)
        self.log_rho_m1 = np.ascontiguousarray(t.log_rho_m1)

    def load(self, allocations) -> None:
        """Reset to the given allocation vector and rebuild all caches."""
        n, L = self.n, self.codes.shape[1]
        _, z = np.unique(np.asarray(allocations), return_inverse=True)
        self.z = z.ravel().astype(np.int64)
        self.sizes = np.bincount(self.z, minlength=n).astype(np.int64)
        occupied = np.flatnonzero(self.sizes)
        K = occupied.size
        self.active = np.zeros(n, dtype=np.int64)
        self.active[:K] = occupied
        self.pos = np.zeros(n, dtype=np.int64)
        self.pos[occupied] = np.arange(K)
        free = np.flatnonzero(self.sizes == 0)[::-1]
        self.free = np.zeros(n, dtype=np.int64)
        self.free[: free.size] = free
        self.meta = np.array([K, free.size], dtype=np.int64)
        Dmax = self.theta.shape[1]
        self.counts = np.zeros((n, L, Dmax), dtype=np.int32)
        for l in range(L):
            np.add.at(self.counts, (self.z, l, self.codes[:, l]), 1)
        self.logf = np.zeros((n, L))
        self._refresh_logf()

    def _refresh_logf(self) -> None:
        L = self.codes.shape[1]
        for c in self.active[: self.K]:
            for l in range(L):
                self.logf[c, l] = kernels.logf_row(self.counts, c, l, self.theta, self.log_theta, self.log_rho)

    def set_beta(self, beta) -> None:
        self.beta = np.clip(np.asarray(beta, dtype=float), BETA_EPS, 1 - BETA_EPS)
        self._set_tables()
        self._refresh_logf()

    @property
    def K(self) -> int:
        return int(self.meta[0])

    def cluster_sizes(self) -> np.ndarray:
        return self.sizes[self.active[: self.K]]

    def occupancy(self) -> dict[int, int]:
        s, c = np.unique(self.cluster_sizes(), return_counts=True)
        return dict(zip(s.tolist(), c.tolist()))

    def partition(self) -> Partition:
        return Partition.from_allocations(self.z)

    def log_f_total(self) -> float:
        """Partition-dependent part of the log likelihood."""
        return float(self.logf.sum())

    def kernel_args(self) -> tuple:
        return (self.z, self.sizes, self.active, self.pos, self.free, self.meta, self.codes,
                self.counts, self.logf, self.theta, self.log_theta, self.log_rho, self.log_rho_m1)
