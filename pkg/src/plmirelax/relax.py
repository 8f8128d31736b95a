"""Generators that turn a nested-summation matrix inequality into finite
families of LMI constraints.

Five families are provided: plain permutation-sum constraints per index
multiset (`vertex` and `polya`, which coincide at degree zero), the
classical two-fold diagonal-weighted family (`tuan`), the two-fold gated
family (`kimlee2`), and the AM-GM gated family for general fold counts
(`amgm`, with direct three- and four-fold transcriptions `amgm3` and
`amgm4`). All constraint matrices demand "strictly negative definite" and
are built in exact rational arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations_with_replacement, product

from .combinat import (
    enumerate_distinct_tails,
    enumerate_partitions,
    multiplicity_factorial,
    multiplicity_pattern,
    tuple_from_partition,
)
from .errors import CapExceeded, ConfigError, WrongFold
from .matexpr import AffineSymMatrix, PlmiSpec, expr_add, expr_scale, expr_zero

METHODS = ("vertex", "tuan", "kimlee2", "polya", "amgm", "amgm3", "amgm4")

# Default ceiling on emitted constraints for the gated family; the count is
# r * 2^m and m grows quickly with q and r.
DEFAULT_AMGM_CAP = 100_000


@dataclass
class LmiSet:
    """A finite list of constraints, each demanded negative definite.

    `provenance` parallels `constraints` and records how each constraint
    was produced (method, head index, gate bits or tuple)."""

    registry: object
    constraints: list[AffineSymMatrix]
    provenance: list[tuple]
    method: str

    def __len__(self) -> int:
        return len(self.constraints)

    def __iter__(self):
        return iter(self.constraints)


@dataclass(frozen=True)
class DeltaAssignment:
    """A 0/1 gate per (k, partition label, tail label) triple."""

    keys: tuple[tuple[int, int, int], ...]
    bits: tuple[int, ...]

    def as_dict(self) -> dict[tuple[int, int, int], int]:
        return dict(zip(self.keys, self.bits))

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


def delta_layout(q: int, r: int):
    """Gate-bit layout for the q-fold AM-GM family.

    Returns (keys, partitions) where keys lists (k, partition label, tail
    label) in layout order: k ascending, partitions in enumeration order,
    tails in lexicographic order. Labels are 1-based. The layout is the
    same for every head index because tail counts do not depend on it.
    """
    parts = enumerate_partitions(q)
    keys: list[tuple[int, int, int]] = []
    lams: dict[tuple[int, int], tuple[int, ...]] = {}
    for k in range(2, min(q, r) + 1):
        tails = 1
        for j in range(1, k):
            tails *= r - j
        for s2, lam in enumerate(parts[k], start=1):
            lams[(k, s2)] = lam.parts
            for s3 in range(1, tails + 1):
                keys.append((k, s2, s3))
    return tuple(keys), lams


def delta_bit_count(q: int, r: int) -> int:
    """Closed-form count of gate bits: sum over k of |Lambda_k| times the
    number of ordered distinct tails."""
    parts = enumerate_partitions(q)
    m = 0
    for k in range(2, min(q, r) + 1):
        tails = 1
        for j in range(1, k):
            tails *= r - j
        m += len(parts[k]) * tails
    return m


class _PermsumCache:
    """Memoizes permutation sums by index multiset."""

    def __init__(self, spec: PlmiSpec):
        self.spec = spec
        self._cache: dict[tuple[int, ...], AffineSymMatrix] = {}

    def __call__(self, idx: tuple[int, ...]) -> AffineSymMatrix:
        key = tuple(sorted(idx))
        hit = self._cache.get(key)
        if hit is None:
            from .combinat import distinct_permutations

            acc = expr_zero(self.spec.registry, self.spec.dim)
            for p in distinct_permutations(key):
                acc = expr_add(acc, self.spec.vertex(p))
            hit = self._cache[key] = acc
        return hit


def permsum(spec: PlmiSpec, idx) -> AffineSymMatrix:
    """Sum of vertex expressions over the distinct reorderings of a tuple."""
    return _PermsumCache(spec)(tuple(idx))


def gen_vertex(spec: PlmiSpec) -> LmiSet:
    """One constraint per index multiset: the permutation sum over its
    distinct reorderings. Equivalent to demanding every vertex negative,
    up to the positive multiplicity factor recorded in provenance."""
    ps = _PermsumCache(spec)
    constraints, prov = [], []
    for mset in combinations_with_replacement(range(1, spec.r + 1), spec.q):
        constraints.append(ps(mset))
        factor = math.prod(
            math.factorial(p) for p in multiplicity_pattern(mset).parts if p
        )
        prov.append(("vertex", mset, factor))
    return LmiSet(spec.registry, constraints, prov, "vertex")


def gen_polya(spec: PlmiSpec) -> LmiSet:
    """Permutation-sum constraint per index multiset.

    Permuted tuples generate the same constraint, so emission is per
    multiset; summing over all permutations with repetition would only
    scale each constraint by the positive factor stored in provenance."""
    if spec.q < 2:
        raise WrongFold(f"polya generator needs q >= 2, got {spec.q}")
    out = gen_vertex(spec)
    return LmiSet(
        out.registry,
        out.constraints,
        [("polya",) + p[1:] for p in out.provenance],
        "polya",
    )


def gen_tuan(spec: PlmiSpec) -> LmiSet:
    """Two-fold family: each diagonal vertex negative, plus for every
    ordered off-diagonal pair the cross terms weighted by 2/(r-1) of the
    first diagonal."""
    if spec.q != 2:
        raise WrongFold(f"tuan generator needs q = 2, got {spec.q}")
    if spec.r < 2:
        raise ConfigError("tuan generator needs r >= 2")
    constraints, prov = [], []
    for i1 in range(1, spec.r + 1):
        constraints.append(spec.vertex((i1, i1)))
        prov.append(("tuan_diag", i1))
    w = Fraction(2, spec.r - 1)
    for i1 in range(1, spec.r + 1):
        for i2 in range(1, spec.r + 1):
            if i2 == i1:
                continue
            e = expr_scale(spec.vertex((i1, i1)), w)
            e = expr_add(e, spec.vertex((i1, i2)))
            e = expr_add(e, spec.vertex((i2, i1)))
            constraints.append(e)
            prov.append(("tuan_off", (i1, i2)))
    return LmiSet(spec.registry, constraints, prov, "tuan")


def gen_kimlee2(spec: PlmiSpec) -> LmiSet:
    """Two-fold gated family: r * 2^(r-1) constraints.

    For each head i1 and each bit vector over the other indices, the head
    diagonal plus half the gated symmetric cross terms. Bit slot for i2 is
    i2 when i2 < i1, else i2 - 1."""
    if spec.q != 2:
        raise WrongFold(f"kimlee2 generator needs q = 2, got {spec.q}")
    half = Fraction(1, 2)
    constraints, prov = [], []
    for i1 in range(1, spec.r + 1):
        others = [i2 for i2 in range(1, spec.r + 1) if i2 != i1]
        cross = {
            i2: expr_scale(
                expr_add(spec.vertex((i1, i2)), spec.vertex((i2, i1))), half
            )
            for i2 in others
        }
        for bits in product((0, 1), repeat=spec.r - 1):
            e = spec.vertex((i1, i1))
            for i2 in others:
                slot = i2 if i2 < i1 else i2 - 1
                if bits[slot - 1]:
                    e = expr_add(e, cross[i2])
            constraints.append(e)
            prov.append(("kimlee2", i1, bits))
    return LmiSet(spec.registry, constraints, prov, "kimlee2")


def amgm_gated_terms(spec: PlmiSpec, i1: int, ps: _PermsumCache | None = None):
    """Head diagonal and the gate-keyed interaction terms of the q-fold
    AM-GM family at head i1.

    Each term is (1 / mu(lam)!) * (1/q) * sum_j lam_j * permsum at the
    tuple with the j-th tail value swapped into the head role. Returns
    (base, [(key, term), ...]) with keys in layout order.
    """
    q, r = spec.q, spec.r
    ps = ps or _PermsumCache(spec)
    parts = enumerate_partitions(q)
    base = spec.vertex((i1,) * q)
    terms: list[tuple[tuple[int, int, int], AffineSymMatrix]] = []
    for k in range(2, min(q, r) + 1):
        tails = enumerate_distinct_tails(r, k, i1)
        for s2, lam in enumerate(parts[k], start=1):
            mu_fact = multiplicity_factorial(lam)
            for s3, tail in enumerate(tails, start=1):
                acc = expr_zero(spec.registry, spec.dim)
                for j in range(1, k + 1):
                    swapped = list(tail)
                    swapped[0], swapped[j - 1] = swapped[j - 1], swapped[0]
                    tup = tuple_from_partition(lam.parts, tuple(swapped))
                    acc = expr_add(acc, expr_scale(ps(tup), lam.parts[j - 1]))
                term = expr_scale(acc, Fraction(1, q * mu_fact))
                terms.append(((k, s2, s3), term))
    return base, terms


def _emit_gated(spec, per_head_terms, method: str) -> LmiSet:
    constraints, prov = [], []
    for i1 in range(1, spec.r + 1):
        base, terms = per_head_terms(i1)
        keys = tuple(key for key, _ in terms)
        for bits in product((0, 1), repeat=len(terms)):
            e = base
            for bit, (_, term) in zip(bits, terms):
                if bit:
                    e = expr_add(e, term)
            constraints.append(e)
            prov.append((method, i1, DeltaAssignment(keys, bits)))
    return LmiSet(spec.registry, constraints, prov, method)


def gen_amgm(spec: PlmiSpec, cap: int = DEFAULT_AMGM_CAP) -> LmiSet:
    """The q-fold AM-GM gated family: r * 2^m constraints, where m is the
    gate-bit count. Families with k > r are empty and contribute no bits.
    Raises CapExceeded with the computed count when it would exceed `cap`."""
    if spec.q < 2:
        raise WrongFold(f"amgm generator needs q >= 2, got {spec.q}")
    m = delta_bit_count(spec.q, spec.r)
    total = spec.r * 2**m
    if total > cap:
        raise CapExceeded(
            f"amgm enumeration would emit {total} constraints "
            f"(m={m} gate bits), over the cap of {cap}"
        )
    ps = _PermsumCache(spec)
    return _emit_gated(spec, lambda i1: amgm_gated_terms(spec, i1, ps), "amgm")


def amgm3_gated_terms(spec: PlmiSpec, i1: int, ps: _PermsumCache | None = None):
    """Three-fold family terms, transcribed directly: for each other index
    the term (1/3)(2 P(i1,i1,i2) + P(i2,i2,i1)); for each ordered distinct
    pair the term (1/3!) P(i1,i2,i3)."""
    r = spec.r
    ps = ps or _PermsumCache(spec)
    base = spec.vertex((i1, i1, i1))
    terms = []
    third = Fraction(1, 3)
    for s3, tail in enumerate(enumerate_distinct_tails(r, 2, i1), start=1):
        i2 = tail[1]
        t = expr_scale(
            expr_add(expr_scale(ps((i1, i1, i2)), 2), ps((i2, i2, i1))), third
        )
        terms.append(((2, 1, s3), t))
    sixth = Fraction(1, 6)
    for s3, tail in enumerate(enumerate_distinct_tails(r, 3, i1), start=1):
        _, i2, i3 = tail
        terms.append(((3, 1, s3), expr_scale(ps((i1, i2, i3)), sixth)))
    return base, terms


def gen_amgm3(spec: PlmiSpec) -> LmiSet:
    """Direct transcription of the three-fold AM-GM conditions."""
    if spec.q != 3:
        raise WrongFold(f"amgm3 generator needs q = 3, got {spec.q}")
    ps = _PermsumCache(spec)
    return _emit_gated(spec, lambda i1: amgm3_gated_terms(spec, i1, ps), "amgm3")


def amgm4_gated_terms(spec: PlmiSpec, i1: int, ps: _PermsumCache | None = None):
    """Four-fold family terms, transcribed directly.

    Per other index: (1/4)(3 P(i1,i1,i1,i2) + P(i2,i2,i2,i1)) and
    (1/2) P(i1,i1,i2,i2); per ordered distinct pair:
    (1/8)(2 P(i1,i1,i2,i3) + P(i2,i2,i1,i3) + P(i3,i3,i2,i1)); per ordered
    distinct triple: (1/4!) P(i1,i2,i3,i4)."""
    r = spec.r
    ps = ps or _PermsumCache(spec)
    base = spec.vertex((i1, i1, i1, i1))
    terms = []
    pairs = enumerate_distinct_tails(r, 2, i1)
    for s3, tail in enumerate(pairs, start=1):
        i2 = tail[1]
        t = expr_scale(
            expr_add(expr_scale(ps((i1, i1, i1, i2)), 3), ps((i2, i2, i2, i1))),
            Fraction(1, 4),
        )
        terms.append(((2, 1, s3), t))
    for s3, tail in enumerate(pairs, start=1):
        i2 = tail[1]
        terms.append(((2, 2, s3), expr_scale(ps((i1, i1, i2, i2)), Fraction(1, 2))))
    for s3, tail in enumerate(enumerate_distinct_tails(r, 3, i1), start=1):
        _, i2, i3 = tail
        t = expr_add(expr_scale(ps((i1, i1, i2, i3)), 2), ps((i2, i2, i1, i3)))
        t = expr_add(t, ps((i3, i3, i2, i1)))
        terms.append(((3, 1, s3), expr_scale(t, Fraction(1, 8))))
    for s3, tail in enumerate(enumerate_distinct_tails(r, 4, i1), start=1):
        _, i2, i3, i4 = tail
        terms.append(((4, 1, s3), expr_scale(ps((i1, i2, i3, i4)), Fraction(1, 24))))
    return base, terms


def gen_amgm4(spec: PlmiSpec) -> LmiSet:
    """Direct transcription of the four-fold AM-GM conditions."""
    if spec.q != 4:
        raise WrongFold(f"amgm4 generator needs q = 4, got {spec.q}")
    ps = _PermsumCache(spec)
    return _emit_gated(spec, lambda i1: amgm4_gated_terms(spec, i1, ps), "amgm4")


def canonicalize(s: LmiSet) -> LmiSet:
    """Dedup exactly-identical constraints and order deterministically.

    Individual expressions are already canonical (terms combined, zeros
    dropped, sorted by id); this sorts constraints by their rational
    entries and keeps the first provenance among duplicates."""
    seen: dict = {}
    for c, p in zip(s.constraints, s.provenance):
        seen.setdefault(c.key(), (c, p))
    items = sorted(seen.items(), key=lambda kv: kv[0])
    return LmiSet(
        s.registry,
        [c for _, (c, _) in items],
        [p for _, (_, p) in items],
        s.method,
    )


def lmi_sets_equal(a: LmiSet, b: LmiSet) -> bool:
    """Exact rational set equality after canonicalization."""
    ka = [c.key() for c in canonicalize(a).constraints]
    kb = [c.key() for c in canonicalize(b).constraints]
    return ka == kb


def count_constraints(method: str, q: int, r: int) -> int:
    """Pre-dedup constraint count for a method without building the set."""
    if method in ("vertex", "polya"):
        if method == "polya" and q < 2:
            raise WrongFold("polya generator needs q >= 2")
        return math.comb(r + q - 1, q)
    if method == "tuan":
        if q != 2:
            raise WrongFold("tuan generator needs q = 2")
        return r * r
    if method == "kimlee2":
        if q != 2:
            raise WrongFold("kimlee2 generator needs q = 2")
        return r * 2 ** (r - 1)
    if method in ("amgm", "amgm3", "amgm4"):
        need = {"amgm3": 3, "amgm4": 4}.get(method)
        if need is not None and q != need:
            raise WrongFold(f"{method} generator needs q = {need}")
        if q < 2:
            raise WrongFold("amgm generator needs q >= 2")
        return r * 2 ** delta_bit_count(q, r)
    raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")


def generate(spec: PlmiSpec, method: str, cap: int = DEFAULT_AMGM_CAP) -> LmiSet:
    """Dispatch by method name."""
    if method == "vertex":
        return gen_vertex(spec)
    if method == "tuan":
        return gen_tuan(spec)
    if method == "kimlee2":
        return gen_kimlee2(spec)
    if method == "polya":
        return gen_polya(spec)
    if method == "amgm":
        return gen_amgm(spec, cap=cap)
    if method == "amgm3":
        return gen_amgm3(spec)
    if method == "amgm4":
        return gen_amgm4(spec)
    raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")
