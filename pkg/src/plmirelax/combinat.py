"""Exact combinatorics for nested-summation decompositions.

Integer partitions with multiplicity bookkeeping, Stirling numbers of the
second kind, multiset permutations, and enumeration of pairwise-distinct
index tuples. Everything here is exact integer or rational arithmetic;
floating point never enters. Enumeration caps raise CapExceeded instead of
silently truncating, because downstream constraint generation is
exponential in these quantities.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import CapExceeded

# Enumeration caps. Partition-driven enumeration is capped at MAX_Q folds;
# the Stirling recurrence alone is cheap and allowed further.
MAX_Q = 8
MAX_STIRLING_Q = 20
MAX_R = 64


@dataclass(frozen=True)
class Partition:
    """A nonincreasing tuple of nonnegative parts whose sum equals its length.

    Represents one way to split q identical slots into groups; `k` counts
    the nonzero parts and `mu` the multiplicity vector (mu[j-1] = number of
    parts equal to j).
    """

    parts: tuple[int, ...]

    def __post_init__(self):
        q = len(self.parts)
        if q == 0:
            raise ValueError("empty partition")
        if any(p < 0 for p in self.parts):
            raise ValueError(f"negative part in {self.parts}")
        if sum(self.parts) != q:
            raise ValueError(f"parts of {self.parts} must sum to {q}")
        if any(self.parts[i] < self.parts[i + 1] for i in range(q - 1)):
            raise ValueError(f"parts of {self.parts} must be nonincreasing")

    @property
    def q(self) -> int:
        return len(self.parts)

    @property
    def k(self) -> int:
        return sum(1 for p in self.parts if p)

    @property
    def mu(self) -> tuple[int, ...]:
        counts = [0] * self.q
        for p in self.parts:
            if p:
                counts[p - 1] += 1
        return tuple(counts)


@dataclass(frozen=True)
class MultisetPermutations:
    """All distinct reorderings of a source tuple, lexicographically sorted."""

    source: tuple[int, ...]
    tuples: tuple[tuple[int, ...], ...]

    def __iter__(self):
        return iter(self.tuples)

    def __len__(self) -> int:
        return len(self.tuples)


def _partitions_exact(n: int, k: int, maxpart: int):
    # Nonincreasing positive k-tuples summing to n, first part <= maxpart,
    # yielded in lexicographically decreasing order.
    if k == 0:
        if n == 0:
            yield ()
        return
    if k == 1:
        if 1 <= n <= maxpart:
            yield (n,)
        return
    lo = -(-n // k)  # ceil(n / k), smallest admissible first part
    for first in range(min(maxpart, n - k + 1), lo - 1, -1):
        for rest in _partitions_exact(n - first, k - 1, first):
            yield (first,) + rest


def enumerate_partitions(q: int) -> dict[int, list[Partition]]:
    """Map k in 1..q to the partitions of q with exactly k nonzero parts.

    Each list is in lexicographically decreasing part order and parts are
    zero-padded to length q.
    """
    if not 1 <= q <= MAX_Q:
        raise CapExceeded(f"partition enumeration supports 1 <= q <= {MAX_Q}, got {q}")
    out: dict[int, list[Partition]] = {}
    for k in range(1, q + 1):
        out[k] = [
            Partition(parts + (0,) * (q - k))
            for parts in _partitions_exact(q, k, q)
        ]
    return out


def multiplicity_factorial(lam: Partition | tuple[int, ...]) -> int:
    """Product of factorials of part multiplicities."""
    if not isinstance(lam, Partition):
        lam = Partition(tuple(lam))
    out = 1
    for m in lam.mu:
        out *= math.factorial(m)
    return out


def multinomial(q: int, parts: tuple[int, ...]) -> int:
    out = math.factorial(q)
    for p in parts:
        out //= math.factorial(p)
    return out


def stirling2(q: int, k: int) -> int:
    """Stirling number of the second kind via the standard recurrence."""
    if not 0 <= k <= q:
        raise ValueError(f"need 0 <= k <= q, got k={k}, q={q}")
    if q > MAX_STIRLING_Q:
        raise CapExceeded(f"stirling2 capped at q <= {MAX_STIRLING_Q}, got {q}")
    row = [1]  # s(0, 0)
    for n in range(1, q + 1):
        prev = row
        row = [0] * (n + 1)
        for j in range(1, n + 1):
            below = prev[j] if j < len(prev) else 0
            row[j] = j * below + prev[j - 1]
    return row[k]


def stirling2_from_partitions(q: int, k: int) -> int:
    """Same number computed by summing multinomial weights over partitions.

    Independent route used to cross-check the recurrence; the weights are
    rational and must collapse to an exact integer.
    """
    if not 0 <= k <= q:
        raise ValueError(f"need 0 <= k <= q, got k={k}, q={q}")
    if k == 0:
        return 1 if q == 0 else 0
    total = Fraction(0)
    for lam in enumerate_partitions(q)[k]:
        total += Fraction(multinomial(q, lam.parts), multiplicity_factorial(lam))
    if total.denominator != 1:
        raise ArithmeticError(f"partition formula gave non-integer {total}")
    return int(total)


def falling_factorial(r: int, k: int) -> int:
    """r * (r-1) * ... * (r-k+1); 1 for k = 0, and 0 when k > r."""
    if r < 1 or k < 0:
        raise ValueError(f"need r >= 1 and k >= 0, got r={r}, k={k}")
    if r > MAX_R:
        raise CapExceeded(f"falling_factorial capped at r <= {MAX_R}, got {r}")
    if k > r:
        return 0
    out = 1
    for j in range(k):
        out *= r - j
    return out


def power_identity_check(q: int, r: int) -> bool:
    """Check r**q == sum over k of stirling2(q, k) * falling_factorial(r, k).

    Both sides are computed independently in exact integer arithmetic.
    """
    if not 1 <= q <= MAX_Q:
        raise CapExceeded(f"power identity capped at q <= {MAX_Q}, got {q}")
    if not 1 <= r <= 12:
        raise CapExceeded(f"power identity capped at r <= 12, got {r}")
    lhs = r**q
    rhs = sum(stirling2(q, k) * falling_factorial(r, k) for k in range(q + 1))
    return lhs == rhs


def partition_cover_check(q: int, r: int) -> bool:
    """Check that the partition classes tile the full index hypercube.

    Counts tuples per class: multinomial(q; lam) / mu(lam)! distinct-value
    patterns times the number of ways to pick the distinct values. The grand
    total must equal r**q exactly.
    """
    if r < 1:
        raise ValueError(f"need r >= 1, got r={r}")
    total = Fraction(0)
    for k, lams in enumerate_partitions(q).items():
        picks = 1
        for j in range(k):
            picks *= r - j
        if picks <= 0:
            continue
        for lam in lams:
            total += Fraction(
                multinomial(q, lam.parts) * picks, multiplicity_factorial(lam)
            )
    return total == r**q


def distinct_permutations(i: tuple[int, ...]) -> MultisetPermutations:
    """All distinct reorderings of a tuple, lexicographically ordered."""
    i = tuple(i)
    if len(i) > MAX_Q:
        raise CapExceeded(f"permutation enumeration capped at length {MAX_Q}")
    tuples = tuple(sorted(set(itertools.permutations(i))))
    return MultisetPermutations(source=i, tuples=tuples)


def enumerate_distinct_tails(r: int, k: int, head: int) -> list[tuple[int, ...]]:
    """All k-tuples (head, i2, ..., ik) with pairwise-distinct entries.

    Ordered lexicographically in (i2, ..., ik), which fixes the tail labels
    deterministically. Returns an empty list when k > r (no way to pick k
    distinct values).
    """
    if k < 2:
        raise ValueError(f"need k >= 2, got k={k}")
    if not 1 <= head <= r:
        raise ValueError(f"head {head} out of range 1..{r}")
    if k > r:
        return []
    rest = [v for v in range(1, r + 1) if v != head]
    return [(head,) + tail for tail in itertools.permutations(rest, k - 1)]


def swap_values(i: tuple[int, ...], j: int) -> tuple[int, ...]:
    """Exchange the value at 1-based position j with the first value,
    everywhere both occur in the tuple. j = 1 is the identity."""
    if not 1 <= j <= len(i):
        raise ValueError(f"position {j} out of range 1..{len(i)}")
    a, b = i[0], i[j - 1]
    if a == b:
        return tuple(i)
    return tuple(b if e == a else a if e == b else e for e in i)


def tuple_from_partition(parts: tuple[int, ...], tail: tuple[int, ...]) -> tuple[int, ...]:
    """Expand a value tuple by part multiplicities: tail[j] repeated parts[j]
    times, in order. Nonzero parts must come first (nonincreasing parts)."""
    out: list[int] = []
    for mult, value in zip(parts, tail):
        out.extend([value] * mult)
    return tuple(out)


def multiplicity_pattern(i: tuple[int, ...]) -> Partition:
    """The partition formed by the value multiplicities of a tuple."""
    q = len(i)
    counts = sorted((list(i).count(v) for v in set(i)), reverse=True)
    return Partition(tuple(counts) + (0,) * (q - len(counts)))
