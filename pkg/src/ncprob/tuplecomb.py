"""Index-tuple combinatorics.

Tuples are plain ``tuple[int, ...]`` maps ``[n] -> N_0``.  Three equivalence
relations act on them:

* ``theta`` (translation): ``i = j + k`` for a common shift ``k``;
* ``order``: ``i(k) <= i(l)  <=>  j(k) <= j(l)`` for all positions;
* ``symmetric``: ``i = pi ∘ j`` for a permutation ``pi`` (same kernel).

Double factorials follow the convention of the CLT formulas used here:
``p!! = (p-1)(p-3)...3*1`` for even ``p`` and ``0`` for odd ``p`` -- the
number of pair partitions of ``p`` points, not the usual ``p(p-2)...``.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .errors import ResourceError, ValidationError

RELATIONS = ("theta", "order", "symmetric")
ORDER_CLASS_CAP = 10
PAIR_PARTITION_CAP = 12

IndexTuple = tuple[int, ...]


def _as_tuple(t: Iterable[int]) -> IndexTuple:
    t = tuple(int(x) for x in t)
    if any(x < 0 for x in t):
        raise ValidationError(f"tuple entries must be nonnegative, got {t}")
    return t


def canon(relation: str, t: Iterable[int]) -> IndexTuple:
    """Canonical representative of ``t`` under ``relation``."""
    t = _as_tuple(t)
    if not t:
        return t
    if relation == "theta":
        m = min(t)
        return tuple(x - m for x in t)
    if relation == "order":
        rank = {v: k for k, v in enumerate(sorted(set(t)))}
        return tuple(rank[x] for x in t)
    if relation == "symmetric":
        label: dict[int, int] = {}
        return tuple(label.setdefault(x, len(label)) for x in t)
    raise ValidationError(f"unknown relation {relation!r}; expected one of {RELATIONS}")


def are_equivalent(relation: str, s: Iterable[int], t: Iterable[int]) -> bool:
    s, t = _as_tuple(s), _as_tuple(t)
    if len(s) != len(t):
        raise ValidationError(f"tuples of different lengths {len(s)} and {len(t)}")
    return canon(relation, s) == canon(relation, t)


def partial_shift(N: int, n: int) -> int:
    """``theta_N``: fixes ``0..N-1`` and moves everything else up by one."""
    return n if n < N else n + 1


def theta_composite(N: int, lvec: Sequence[int]) -> Callable[[int], int]:
    """The ordered product ``theta_0^{l_0} theta_1^{N+l_1} ... theta_N^{N^2+l_N}``.

    The rightmost factor acts first.  Returns the map on single indices;
    use :func:`apply_map` for tuples.
    """
    lvec = tuple(int(x) for x in lvec)
    if len(lvec) != N + 1:
        raise ValidationError(f"lvec must have N+1 = {N + 1} entries, got {len(lvec)}")
    if N < 1 or any(not 0 <= x <= N - 1 for x in lvec):
        raise ValidationError(f"lvec entries must lie in 0..{N - 1}, got {lvec}")
    powers = [(i, i * N + lvec[i]) for i in range(N, -1, -1)]

    def apply(n: int) -> int:
        # theta_i^k on n: a run of k partial shifts at threshold i adds k once n >= i
        for i, k in powers:
            if n >= i:
                n += k
        return n

    return apply


def apply_map(f: Callable[[int], int], t: Iterable[int]) -> IndexTuple:
    return tuple(f(x) for x in t)


def theta_image_bound(N: int, max_entry: int) -> int:
    """Largest index ``theta_{N,l}`` produces on entries ``<= max_entry`` over all ``l``.

    Every factor is order preserving and monotone in ``l``, so the maximum is
    attained at ``max_entry`` with ``l = (N-1, ..., N-1)``.
    """
    return theta_composite(N, [N - 1] * (N + 1))(max_entry)


@dataclass(frozen=True)
class EquivClass:
    relation: str
    rep: IndexTuple

    @property
    def k(self) -> int:
        """Number of distinct values in the representative."""
        return len(set(self.rep))

    @property
    def length(self) -> int:
        return len(self.rep)


@dataclass(frozen=True)
class PairPartition:
    """Pair partition of ``{1, ..., p}`` as sorted pairs ``(a, b)`` with ``a < b``."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pairs = tuple(sorted(tuple(sorted(pr)) for pr in self.pairs))
        pts = [x for pr in pairs for x in pr]
        if sorted(pts) != list(range(1, len(pts) + 1)) or any(a == b for a, b in pairs):
            raise ValidationError(f"not a pair partition of 1..{len(pts)}: {self.pairs}")
        object.__setattr__(self, "pairs", pairs)

    @property
    def p(self) -> int:
        return 2 * len(self.pairs)


def double_factorial(p: int) -> int:
    """``(p-1)(p-3)...3*1`` for even ``p`` (1 for ``p = 0``), 0 for odd ``p``."""
    if p < 0:
        raise ValidationError("p must be >= 0")
    if p % 2:
        return 0
    return math.prod(range(p - 1, 0, -2))


def _surjections(p: int, k: int) -> Iterable[IndexTuple]:
    for t in itertools.product(range(k), repeat=p):
        if len(set(t)) == k:
            yield t


def enumerate_order_classes(p: int) -> list[EquivClass]:
    """All order classes of ``p``-tuples, as surjective canonical tuples in lexicographic order."""
    if p < 0:
        raise ValidationError("p must be >= 0")
    if p > ORDER_CLASS_CAP:
        raise ResourceError(f"order classes are enumerated up to p = {ORDER_CLASS_CAP}, got {p}")
    if p == 0:
        return [EquivClass("order", ())]
    reps = sorted(t for k in range(1, p + 1) for t in _surjections(p, k))
    return [EquivClass("order", t) for t in reps]


def enumerate_pair_classes(p: int) -> list[EquivClass]:
    """Order classes whose value fibers all have size two (empty for odd ``p``)."""
    if p % 2:
        return []
    if p > ORDER_CLASS_CAP:
        raise ResourceError(f"pair classes are enumerated up to p = {ORDER_CLASS_CAP}, got {p}")
    k = p // 2
    reps = sorted(t for t in itertools.permutations(sorted(list(range(k)) * 2)))
    return [EquivClass("order", t) for t in dict.fromkeys(reps)]


def enumerate_pair_partitions(p: int) -> list[PairPartition]:
    if p % 2:
        return []
    if p > PAIR_PARTITION_CAP:
        raise ResourceError(f"pair partitions are enumerated up to p = {PAIR_PARTITION_CAP}, got {p}")

    def rec(rest: list[int]) -> Iterable[list[tuple[int, int]]]:
        if not rest:
            yield []
            return
        a = rest[0]
        for j in range(1, len(rest)):
            for tail in rec(rest[1:j] + rest[j + 1 :]):
                yield [(a, rest[j])] + tail

    return [PairPartition(tuple(pp)) for pp in rec(list(range(1, p + 1)))]


def crossing_number(pi: PairPartition) -> int:
    """Number of block pairs ``{a<b}, {c<d}`` with ``a < c < b < d``."""
    return sum(
        1
        for (a, b), (c, d) in itertools.permutations(pi.pairs, 2)
        if a < c < b < d
    )


def count_tuples_in_class(cls: EquivClass, N: int) -> int:
    """Number of tuples ``[p] -> {0, ..., N-1}`` in an order class: ``binomial(N, k)``."""
    if cls.relation != "order":
        raise ValidationError("counting is defined for order classes")
    if N < 0:
        raise ValidationError("N must be >= 0")
    return math.comb(N, cls.k)


def catalan(n: int) -> int:
    return math.comb(2 * n, n) // (n + 1)


def class_table_csv(classes: Sequence[EquivClass], N: int) -> str:
    """CSV with one row per class: canonical form, number of values, count at ``N``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["canonical", "k", f"count_N{N}"])
    for c in classes:
        w.writerow([" ".join(map(str, c.rep)), c.k, count_tuples_in_class(c, N)])
    return buf.getvalue()
