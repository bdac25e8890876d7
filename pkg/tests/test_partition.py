import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esc_partitions.partition import (
    NEW,
    Partition,
    enumerate_partitions,
    from_allocations,
    log_eppf_conditional,
    move_record,
    occupancy_profile,
    size_multiset_key,
)
from esc_partitions.prior import TruncNegBin, p_event_en

from .oracles import bell, esc_eppf, nb_pmf, set_partitions

labels = st.lists(st.integers(0, 6), min_size=1, max_size=25)


def test_canonical_counts():
    p = from_allocations([1, 1, 2])
    assert p.K == 2 and p.sizes.tolist() == [2, 1]


def test_first_appearance_relabel():
    p = from_allocations([2, 1, 1])
    assert p.allocations.tolist() == [1, 2, 2]
    assert p.sizes.tolist() == [1, 2]


def test_all_singletons_occupancy():
    p = from_allocations([1, 2, 3])
    assert p.K == 3 and p.occupancy == {1: 3}


def test_empty_rejected():
    with pytest.raises(ValueError):
        from_allocations([])


def test_string_labels_accepted():
    assert from_allocations(["b", "a", "b"]).allocations.tolist() == [1, 2, 1]


def test_from_blocks_matches_allocations():
    assert Partition.from_blocks([[0, 2], [1]]) == from_allocations([5, 9, 5])


@pytest.mark.parametrize(
    "start, i, target, expected",
    [
        ([1, 1, 2], 2, 1, [1, 1, 1]),
        ([1, 1], 1, NEW, [1, 2]),
        ([1, 2], 0, 2, [1, 1]),
    ],
)
def test_move_examples(start, i, target, expected):
    q = move_record(from_allocations(start), i, target)
    assert q.allocations.tolist() == expected


def test_move_new_occupancy():
    assert move_record(from_allocations([1, 1]), 1, NEW).occupancy == {1: 2}


def test_move_bad_target():
    p = from_allocations([1, 1, 2])
    with pytest.raises(ValueError):
        p.move_record(0, 3)
    with pytest.raises(ValueError):
        p.move_record(0, "elsewhere")
    with pytest.raises(IndexError):
        p.move_record(3, 1)


@pytest.mark.parametrize("sizes, occ", [([1, 1, 2, 3], {1: 2, 2: 1, 3: 1}), ([5], {5: 1}), ([2, 2, 2], {2: 3})])
def test_occupancy_profile(sizes, occ):
    assert occupancy_profile(sizes) == occ


@pytest.mark.parametrize("n", range(1, 9))
def test_enumeration_counts_bell(n):
    parts = list(enumerate_partitions(n))
    assert len(parts) == bell(n)
    assert len({p.key() for p in parts}) == bell(n)


def test_enumeration_matches_independent_generator():
    ours = {p.key() for p in enumerate_partitions(5)}
    theirs = {Partition.from_blocks(b, 5).key() for b in set_partitions(range(5))}
    assert ours == theirs


@pytest.mark.parametrize("n", [0, 13])
def test_enumeration_guard(n):
    with pytest.raises(ValueError):
        list(enumerate_partitions(n))


def test_eppf_single_record():
    mu = TruncNegBin(1.0, 0.5)
    assert log_eppf_conditional(from_allocations([1]), mu, math.log(p_event_en(mu, 1))) == pytest.approx(0.0, abs=1e-15)


def test_eppf_pair_together():
    mu = TruncNegBin(1.0, 0.5)
    v = log_eppf_conditional(from_allocations([1, 1]), mu, math.log(p_event_en(mu, 2)))
    assert v == pytest.approx(math.log(0.5), abs=1e-12)


def test_eppf_three_records():
    mu = TruncNegBin(1.0, 0.5)
    v = log_eppf_conditional(from_allocations([1, 1, 2]), mu, math.log(p_event_en(mu, 3)))
    assert v == pytest.approx(math.log(1 / 6), abs=1e-12)


def test_eppf_zero_mass_is_impossible():
    from esc_partitions.prior import ExplicitSizes

    mu = ExplicitSizes.from_probs([0.5, 0.0, 0.5])
    assert log_eppf_conditional(from_allocations([1, 1, 2]), mu, 0.0) == -np.inf


@pytest.mark.parametrize("r, p", [(1.0, 0.5), (2.5, 0.3), (0.4, 0.8)])
def test_eppf_matches_oracle(r, p):
    mu = TruncNegBin(r, p)
    lpe = math.log(p_event_en(mu, 6))
    for part in enumerate_partitions(6):
        want = esc_eppf(part.sizes.tolist(), lambda s: nb_pmf(s, r, p))
        assert math.exp(log_eppf_conditional(part, mu, lpe)) == pytest.approx(want, rel=1e-10)


@given(labels)
def test_canonical_idempotent(z):
    p = from_allocations(z)
    assert from_allocations(p.allocations) == p
    assert p.sizes.sum() == p.n and np.all(p.sizes >= 1)
    assert sum(s * c for s, c in p.occupancy.items()) == p.n


@given(labels, st.permutations(range(7)))
def test_relabeling_invariant(z, perm):
    z2 = [perm[x] for x in z]
    assert from_allocations(z) == from_allocations(z2)


@given(labels, st.lists(st.tuples(st.integers(0, 24), st.integers(0, 30)), max_size=20))
@settings(max_examples=60)
def test_moves_match_rebuild(z, moves):
    p = from_allocations(z)
    raw = np.array(p.allocations)
    fresh = 1000
    for i, t in moves:
        i %= p.n
        if t >= p.K:
            p = p.move_record(i, NEW)
            raw[i] = fresh
            fresh += 1
        else:
            label = t + 1
            p = p.move_record(i, label)
            # the label refers to the current canonical partition
            raw = np.array(p.allocations)
    assert p == from_allocations(raw)


@given(st.lists(st.integers(1, 5), min_size=1, max_size=6), st.randoms())
def test_eppf_depends_only_on_multiset(sizes, rnd):
    mu = TruncNegBin(1.3, 0.4)
    n = sum(sizes)
    shuffled = sizes[:]
    rnd.shuffle(shuffled)
    a = from_allocations(np.repeat(np.arange(len(sizes)), sizes))
    b = from_allocations(np.repeat(np.arange(len(shuffled)), shuffled))
    lpe = math.log(p_event_en(mu, n))
    assert log_eppf_conditional(a, mu, lpe) == pytest.approx(log_eppf_conditional(b, mu, lpe), abs=1e-12)
    assert size_multiset_key(a.sizes) == size_multiset_key(shuffled)
