"""Tuple equivalences, partial shifts and counting identities.

Oracles: definitions applied by brute force (pairwise comparisons, repeated
single shifts, direct enumeration of maps).
"""

import functools
import itertools
import math

import pytest
from hypothesis import given, settings, strategies as st

from ncprob.errors import ResourceError, ValidationError
from ncprob.tuplecomb import (
    PairPartition,
    apply_map,
    are_equivalent,
    canon,
    catalan,
    class_table_csv,
    count_tuples_in_class,
    crossing_number,
    double_factorial,
    enumerate_order_classes,
    enumerate_pair_classes,
    enumerate_pair_partitions,
    partial_shift,
    theta_composite,
    theta_image_bound,
)

tuples = st.lists(st.integers(0, 6), min_size=0, max_size=6).map(tuple)


def theta_oracle(s, t):
    return len(s) == len(t) and (not s or len({b - a for a, b in zip(s, t)}) == 1)


def order_oracle(s, t):
    n = len(s)
    return all((s[a] < s[b]) == (t[a] < t[b]) and (s[a] == s[b]) == (t[a] == t[b])
               for a in range(n) for b in range(n))


def symmetric_oracle(s, t):
    n = len(s)
    return all((s[a] == s[b]) == (t[a] == t[b]) for a in range(n) for b in range(n))


ORACLES = {"theta": theta_oracle, "order": order_oracle, "symmetric": symmetric_oracle}


@pytest.mark.parametrize("relation,t,want", [
    ("theta", (5, 7), (0, 2)),
    ("order", (1, 3, 1, 3, 4, 2, 4, 2, 4), (0, 2, 0, 2, 3, 1, 3, 1, 3)),
    ("symmetric", (3, 1, 3), (0, 1, 0)),
    ("order", (), ()),
])
def test_canon_examples(relation, t, want):
    assert canon(relation, t) == want


@pytest.mark.parametrize("relation,s,t,want", [
    ("theta", (0, 1, 0, 1), (2, 3, 2, 3), True),
    ("symmetric", (0, 1, 0), (7, 2, 7), True),
    ("order", (0, 1), (1, 0), False),
    ("symmetric", (0, 1), (1, 0), True),
])
def test_are_equivalent_examples(relation, s, t, want):
    assert are_equivalent(relation, s, t) is want


def test_worked_pair_is_order_equivalent_only_without_shift():
    base = (1, 3, 1, 3, 4, 2, 4, 2, 4)
    for n in range(8):
        shifted = base[:4] + tuple(x + n for x in base[4:])
        assert are_equivalent("order", base, shifted) is (n == 0)


def test_errors():
    with pytest.raises(ValidationError):
        are_equivalent("order", (0,), (0, 1))
    with pytest.raises(ValidationError):
        canon("order", (-1,))
    with pytest.raises(ValidationError):
        canon("bogus", (0,))


@st.composite
def same_length_pair(draw):
    n = draw(st.integers(0, 6))
    entry = st.integers(0, 4)
    return tuple(draw(st.lists(entry, min_size=n, max_size=n))), tuple(draw(st.lists(entry, min_size=n, max_size=n)))


@settings(max_examples=300, deadline=None)
@given(same_length_pair())
def test_canon_matches_definitions(pair):
    s, t = pair
    for rel, oracle in ORACLES.items():
        assert are_equivalent(rel, s, t) == oracle(s, t)


@settings(max_examples=200, deadline=None)
@given(tuples)
def test_canon_is_idempotent_and_chain_holds(t):
    for rel in ORACLES:
        c = canon(rel, t)
        assert canon(rel, c) == c
        assert are_equivalent(rel, c, t)
    # theta => order => symmetric, for t against every translate and order-preserving relabel
    s = tuple(3 * x + 1 for x in t)
    assert are_equivalent("order", s, t) and are_equivalent("symmetric", s, t)
    u = tuple(x + 4 for x in t)
    assert are_equivalent("theta", u, t) and are_equivalent("order", u, t)


def test_implication_chain_exhaustive():
    # pairwise s ~ t over all tuples is equivalent to: every finer class sits inside one coarser class
    for n in range(1, 6):
        finer = {"theta": {}, "order": {}}
        for t in itertools.product(range(5), repeat=n):
            for rel, coarser in (("theta", "order"), ("order", "symmetric")):
                finer[rel].setdefault(canon(rel, t), set()).add(canon(coarser, t))
        for rel in finer:
            assert all(len(v) == 1 for v in finer[rel].values())


def test_partial_shift_examples():
    assert apply_map(lambda n: partial_shift(2, n), (0, 1, 2, 3)) == (0, 1, 3, 4)
    k = 3
    f = lambda n: n  # noqa: E731
    for _ in range(k):
        f = (lambda g: (lambda n: partial_shift(0, g(n))))(f)
    assert apply_map(f, (0, 1)) == (k, k + 1)


def composite_oracle(N, lvec):
    """Literal product of single partial shifts, rightmost factor first."""
    def apply(n):
        for i in range(N, -1, -1):
            for _ in range(i * N + lvec[i]):
                n = partial_shift(i, n)
        return n
    return apply


@pytest.mark.parametrize("N", [1, 2, 3])
def test_theta_composite_matches_repeated_shifts(N):
    for lvec in itertools.product(range(N), repeat=N + 1):
        f, g = theta_composite(N, lvec), composite_oracle(N, lvec)
        assert [f(n) for n in range(3 * N * N + 3)] == [g(n) for n in range(3 * N * N + 3)]


def test_theta_composites_preserve_order_and_separation():
    N = 3
    maps = [theta_composite(N, l) for l in itertools.product(range(N), repeat=N + 1)]
    assert len(maps) == 81
    for f in maps:
        img = [f(n) for n in range(20)]
        assert all(a < b for a, b in zip(img, img[1:]))
    for f, g in itertools.product(maps, repeat=2):
        for i in range(N):
            for j in range(i + 1, N):
                assert f(i) < g(j)


def test_theta_image_bound():
    for N in (1, 2, 3):
        top = max(theta_composite(N, l)(4) for l in itertools.product(range(N), repeat=N + 1))
        assert theta_image_bound(N, 4) == top


@pytest.mark.parametrize("N,lvec", [(2, [0, 1]), (2, [0, 2, 1]), (0, [0]), (2, [-1, 0, 0])])
def test_theta_composite_rejects(N, lvec):
    with pytest.raises(ValidationError):
        theta_composite(N, lvec)


def test_class_counts():
    assert len(enumerate_pair_partitions(4)) == 3
    assert len(enumerate_pair_classes(4)) == 6
    assert [c.rep for c in enumerate_order_classes(2)] == [(0, 0), (0, 1), (1, 0)]
    assert enumerate_order_classes(0)[0].rep == ()
    assert enumerate_pair_classes(3) == [] and enumerate_pair_partitions(5) == []


def fubini(p):
    """Ordered set partitions: sum_k k! S(p, k)."""
    @functools.lru_cache(None)
    def stirling(n, k):
        if n == k:
            return 1
        if k == 0 or k > n:
            return 0
        return k * stirling(n - 1, k) + stirling(n - 1, k - 1)
    return sum(math.factorial(k) * stirling(p, k) for k in range(p + 1))


@pytest.mark.parametrize("p", [1, 2, 3, 4, 5, 6])
def test_order_class_count_is_fubini(p):
    classes = enumerate_order_classes(p)
    assert len(classes) == fubini(p)
    for c in classes:
        assert set(c.rep) == set(range(c.k))


@pytest.mark.parametrize("p", [2, 4, 6, 8])
def test_pair_identities(p):
    assert len(enumerate_pair_partitions(p)) == double_factorial(p)
    assert len(enumerate_pair_classes(p)) == double_factorial(p) * math.factorial(p // 2)


def test_double_factorial_convention():
    assert [double_factorial(p) for p in (0, 2, 4, 6, 8)] == [1, 1, 3, 15, 105]
    assert double_factorial(5) == 0


def test_crossings():
    assert crossing_number(PairPartition(((1, 2), (3, 4)))) == 0
    assert crossing_number(PairPartition(((1, 3), (2, 4)))) == 1
    assert crossing_number(PairPartition(((1, 4), (2, 3)))) == 0
    nc = [pi for pi in enumerate_pair_partitions(6) if crossing_number(pi) == 0]
    assert len(nc) == 5 == catalan(3)
    for p in (2, 4, 6, 8, 10):
        assert sum(crossing_number(pi) == 0 for pi in enumerate_pair_partitions(p)) == catalan(p // 2)


def test_bad_pair_partition():
    with pytest.raises(ValidationError):
        PairPartition(((1, 2), (2, 3)))
    with pytest.raises(ValidationError):
        PairPartition(((1, 3),))


@pytest.mark.parametrize("N", [0, 1, 3, 5])
def test_count_tuples_in_class_brute_force(N):
    p = 3
    counts = {c.rep: 0 for c in enumerate_order_classes(p)}
    for t in itertools.product(range(N), repeat=p):
        counts[canon("order", t)] += 1
    for c in enumerate_order_classes(p):
        assert count_tuples_in_class(c, N) == counts[c.rep]


def test_caps():
    with pytest.raises(ResourceError):
        enumerate_order_classes(11)
    with pytest.raises(ResourceError):
        enumerate_pair_partitions(14)


def test_class_table_csv():
    text = class_table_csv(enumerate_order_classes(2), 4)
    assert text.splitlines() == ["canonical,k,count_N4", "0 0,1,4", "0 1,2,6", "1 0,2,6"]
