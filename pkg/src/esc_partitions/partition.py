"""Set partitions of ``n`` records stored as canonical cluster allocations.

Cluster labels are the positive integers ``1..K`` in order of first
appearance; record indices are ordinary 0-based Python indices.
"""
from __future__ import annotations

from collections import Counter
from typing import Iterator, Mapping, Sequence, Union

import numpy as np
from scipy.special import gammaln

MAX_ENUMERATION_N = 12

NEW = "new"


def _canonicalize(z: np.ndarray) -> np.ndarray:
    _, first, inverse = np.unique(z, return_index=True, return_inverse=True)
    # rank of each distinct label by position of first appearance
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank[inverse.ravel()] + 1


class Partition:
    """Immutable partition of ``n`` records.

    ``allocations`` holds canonical labels ``1..K``; ``sizes[j-1]`` is the size
    of cluster ``j``.
    """

    __slots__ = ("allocations", "sizes", "_occupancy", "_key")

    def __init__(self, allocations: np.ndarray, sizes: np.ndarray):
        self.allocations = allocations
        self.sizes = sizes
        self.allocations.setflags(write=False)
        self.sizes.setflags(write=False)
        self._occupancy = None
        self._key = None

    @classmethod
    def from_allocations(cls, z: Sequence[int]) -> "Partition":
        z = np.asarray(z)
        if z.size == 0:
            raise ValueError("allocations must be nonempty")
        if z.ndim != 1:
            raise ValueError("allocations must be one-dimensional")
        canon = _canonicalize(z).astype(np.int64)
        sizes = np.bincount(canon)[1:].astype(np.int64)
        return cls(canon, sizes)

    @classmethod
    def from_blocks(cls, blocks: Sequence[Sequence[int]], n: int | None = None) -> "Partition":
        """Build from a list of blocks of 0-based record indices."""
        if n is None:
            n = sum(len(b) for b in blocks)
        z = np.zeros(n, dtype=np.int64)
        for label, block in enumerate(blocks, start=1):
            z[list(block)] = label
        if np.any(z == 0):
            raise ValueError("blocks do not cover every record")
        return cls.from_allocations(z)

    @property
    def n(self) -> int:
        return int(self.allocations.size)

    @property
    def K(self) -> int:
        return int(self.sizes.size)

    @property
    def occupancy(self) -> dict[int, int]:
        if self._occupancy is None:
            self._occupancy = dict(sorted(Counter(self.sizes.tolist()).items()))
        return dict(self._occupancy)

    @property
    def max_size(self) -> int:
        return int(self.sizes.max())

    def blocks(self) -> list[list[int]]:
        order = np.argsort(self.allocations, kind="stable")
        return [b.tolist() for b in np.split(order, np.cumsum(self.sizes)[:-1])]

    def key(self) -> tuple[int, ...]:
        if self._key is None:
            self._key = tuple(self.allocations.tolist())
        return self._key

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        return f"Partition({self.blocks()})"

    def move_record(self, i: int, target: Union[int, str]) -> "Partition":
        """Return the partition with record ``i`` reassigned to ``target``.

        ``target`` is an existing label ``1..K`` or ``NEW``.
        """
        if not 0 <= i < self.n:
            raise IndexError(f"record index {i} out of range for n={self.n}")
        z = self.allocations.copy()
        if isinstance(target, str):
            if target != NEW:
                raise ValueError(f"invalid target {target!r}")
            z[i] = self.K + 1
        else:
            if not 1 <= int(target) <= self.K:
                raise ValueError(f"invalid target label {target} (K={self.K})")
            z[i] = int(target)
        if z[i] == self.allocations[i]:
            return self
        # relabeling may reorder first appearances or drop an emptied cluster
        return Partition.from_allocations(z)


def from_allocations(z: Sequence[int]) -> Partition:
    return Partition.from_allocations(z)


def move_record(p: Partition, i: int, target: Union[int, str]) -> Partition:
    return p.move_record(i, target)


def occupancy_profile(p: Union[Partition, Sequence[int]]) -> dict[int, int]:
    """Number of clusters of each size; accepts a Partition or a size list."""
    if isinstance(p, Partition):
        return p.occupancy
    return dict(sorted(Counter(int(s) for s in p).items()))


def log_eppf_conditional(p: Partition, mu, log_p_en: float) -> float:
    """Log probability of ``p`` under the ESC prior with fixed size law ``mu``.

    ``log_p_en`` is the log probability that the cluster-size renewal
    sequence hits ``n`` exactly (see ``esc_partitions.prior.p_event_en``).
    Returns ``-inf`` when ``mu`` gives zero mass to an observed size.
    """
    sizes = p.sizes
    log_mu = mu.logpmf(sizes)
    if np.any(np.isneginf(log_mu)):
        return -np.inf
    return float(
        gammaln(p.K + 1)
        - gammaln(p.n + 1)
        + np.sum(gammaln(sizes + 1) + log_mu)
        - log_p_en
    )


def enumerate_partitions(n: int) -> Iterator[Partition]:
    """Yield every set partition of ``n`` records once (restricted growth strings)."""
    if not 1 <= n <= MAX_ENUMERATION_N:
        raise ValueError(f"enumeration supports 1 <= n <= {MAX_ENUMERATION_N}, got {n}")
    a = [0] * n
    b = [1] * n  # b[i] = 1 + max(a[:i])

    def emit():
        z = np.array(a, dtype=np.int64) + 1
        return Partition(z, np.bincount(z)[1:].astype(np.int64))

    while True:
        yield emit()
        # advance to next restricted growth string
        i = n - 1
        while i > 0 and a[i] == b[i]:
            i -= 1
        if i == 0:
            return
        a[i] += 1
        for j in range(i + 1, n):
            a[j] = 0
            b[j] = max(b[j - 1], a[j - 1] + 1)


def size_multiset_key(sizes: Union[Sequence[int], Mapping[int, int]]) -> tuple[int, ...]:
    """Sorted size tuple; identifies the EPPF value of a partition."""
    if isinstance(sizes, Mapping):
        return tuple(sorted(s for s, c in sizes.items() for _ in range(c)))
    return tuple(sorted(int(s) for s in sizes))
