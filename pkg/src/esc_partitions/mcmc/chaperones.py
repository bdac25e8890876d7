"""Chaperone pair selection.

Pairs are drawn from a distribution that depends only on the records: with
bias on, a random number of fields is chosen and the pair is drawn uniformly
among records agreeing on all of them, so similar records are proposed
together more often while every pair keeps positive probability.
"""
from __future__ import annotations

from typing import Optional

import numpy as np


class ChaperoneSampler:
    def __init__(self, codes: Optional[np.ndarray], n: Optional[int] = None, bias: bool = True):
        if codes is None:
            codes = np.zeros((n, 0), dtype=np.int64)
        self.codes = np.asarray(codes)
        self.n, self.L = self.codes.shape
        if self.n < 2:
            raise ValueError("chaperones need at least two records")
        self.bias = bias and self.L > 0
        self._blocks: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    def _block_table(self, mask: int):
        """(members sorted by block, block offsets, cumulative pair counts)."""
        table = self._blocks.get(mask)
        if table is not None:
            return table
        fields = [l for l in range(self.L) if mask >> l & 1]
        if fields:
            _, group = np.unique(self.codes[:, fields], axis=0, return_inverse=True)
            group = group.ravel()
        else:
            group = np.zeros(self.n, dtype=np.int64)
        members = np.argsort(group, kind="stable")
        sizes = np.bincount(group)
        offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        pairs = sizes * (sizes - 1) // 2
        table = (members, offsets, sizes, np.cumsum(pairs))
        self._blocks[mask] = table
        return table

    def _draw(self, mask: int, count: int, rng: np.random.Generator) -> np.ndarray:
        members, offsets, sizes, cum = self._block_table(mask)
        if cum[-1] == 0:
            members, offsets, sizes, cum = self._block_table(0)
        b = np.searchsorted(cum, rng.random(count) * cum[-1], side="right")
        m = sizes[b]
        a = (rng.random(count) * m).astype(np.int64)
        c = (rng.random(count) * (m - 1)).astype(np.int64)
        c = np.where(c >= a, c + 1, c)
        return np.column_stack([members[offsets[b] + a], members[offsets[b] + c]])

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """``size`` chaperone pairs as an int64 array of shape (size, 2)."""
        out = np.empty((size, 2), dtype=np.int64)
        if not self.bias:
            out[:] = self._draw(0, size, rng)
            return out
        n_fields = rng.integers(0, self.L + 1, size=size)
        # first n_fields entries of a random field permutation
        perm = np.argsort(rng.random((size, self.L)), axis=1)
        chosen = np.arange(self.L)[None, :] < n_fields[:, None]
        bits = np.zeros(size, dtype=np.int64)
        for k in range(self.L):
            bits |= np.where(chosen[:, k], np.int64(1) << perm[:, k], 0)
        for mask in np.unique(bits):
            sel = np.flatnonzero(bits == mask)
            out[sel] = self._draw(int(mask), sel.size, rng)
        return out


def chaperone_pair(records, rng: np.random.Generator, bias: bool = True) -> tuple[int, int]:
    codes = records if isinstance(records, np.ndarray) else records.codes
    i, j = ChaperoneSampler(codes, bias=bias).sample(1, rng)[0]
    return int(i), int(j)
