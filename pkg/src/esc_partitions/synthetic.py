"""Ground-truth partitions and noisy categorical records for simulation studies."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .likelihood import RecordTable, sample_records
from .partition import Partition


@dataclass(frozen=True)
class ScenarioSpec:
    """Cluster-size multiset plus record-generation settings."""

    size_multiset: Mapping[int, int]
    L: int = 5
    D: int = 10
    beta: float = 0.01
    name: str = ""
    exact: bool = True

    def __post_init__(self):
        if not self.size_multiset:
            raise ValueError("scenario needs at least one cluster")
        for s, c in self.size_multiset.items():
            if int(s) != s or s < 1 or int(c) != c or c < 1:
                raise ValueError(f"invalid size/count pair {s}:{c}")
        if self.L < 1 or self.D < 1:
            raise ValueError("need L >= 1 fields and D >= 1 categories")
        if not 0 <= self.beta <= 1:
            raise ValueError("beta must lie in [0, 1]")

    @property
    def n(self) -> int:
        return int(sum(s * c for s, c in self.size_multiset.items()))

    @property
    def K(self) -> int:
        return int(sum(self.size_multiset.values()))


# Scenario 1 is pinned numerically; 2-5 approximate the published shapes (K=200 each).
SCENARIOS: dict[str, dict[int, int]] = {
    "1": {1: 50, 2: 50, 3: 50, 4: 50},
    "2": {1: 25, 2: 25, 3: 25, 4: 25, 5: 25, 6: 25, 7: 25, 8: 25},
    "3": {1: 100, 2: 50, 3: 25, 4: 13, 5: 7, 6: 3, 7: 2},
    "4": {1: 100, 5: 100},
    "5": {4: 50, 5: 50, 6: 50, 7: 50},
    "sipp-like": {5: 638, 1: 91, 2: 90, 3: 90, 4: 91},
}


def scenario(name: str, **kw) -> ScenarioSpec:
    key = str(name)
    if key not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    return ScenarioSpec(SCENARIOS[key], name=key, exact=key == "1", **kw)


def scenario_partition(spec: ScenarioSpec | Mapping[int, int]) -> Partition:
    """Consecutive blocks in increasing size order; deterministic."""
    sizes_map = spec.size_multiset if isinstance(spec, ScenarioSpec) else spec
    if not sizes_map:
        raise ValueError("scenario needs at least one cluster")
    sizes = np.concatenate([np.full(int(c), int(s)) for s, c in sorted(sizes_map.items())])
    if np.any(sizes < 1):
        raise ValueError("cluster sizes must be positive")
    return Partition.from_allocations(np.repeat(np.arange(sizes.size), sizes))


def uniform_theta(L: int, D: int) -> list[np.ndarray]:
    return [np.full(D, 1.0 / D) for _ in range(L)]


def generate_dataset(
    truth: Partition,
    spec: ScenarioSpec,
    rng: np.random.Generator,
    theta: Optional[Sequence[Sequence[float]]] = None,
) -> tuple[RecordTable, np.ndarray]:
    """Sample records for ``truth``; returns the table and the truth labels row by row.

    The returned table carries the generating ``theta`` (uniform by default).
    """
    if theta is None:
        theta = uniform_theta(spec.L, spec.D)
    if len(theta) != spec.L:
        raise ValueError("theta must have one distribution per field")
    records = sample_records(truth, theta, np.full(spec.L, spec.beta), rng)
    return records, truth.allocations.copy()
