"""Independent numeric verification: simplex sampling, the nested-sum
decomposition identities, the weighted AM-GM inequality, generator
soundness sampling, and cross-method region containment.

Everything here re-derives results through a second path (flat sums,
literal per-fold transcriptions, exact rationals, external samples) so
that the generators and the solver are never their own referees.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import backend
from .combinat import (
    distinct_permutations,
    enumerate_distinct_tails,
    enumerate_partitions,
    multiplicity_factorial,
    tuple_from_partition,
)
from .errors import CapExceeded, ConfigError
from .matexpr import MembershipVector, PlmiSpec, eval_expr
from .sdp import FeasibilityResult, Status

MAX_DECOMP_Q = 6
MAX_DECOMP_R = 5
DECOMP_PATHS = ("general", "q3", "q4")


def sample_simplex(r: int, rng: np.random.Generator) -> MembershipVector:
    """Uniform draw from the (r-1)-simplex via normalized exponentials."""
    if r < 1:
        raise ConfigError(f"simplex dimension needs r >= 1, got {r}")
    draws = rng.exponential(size=r)
    total = draws.sum()
    while total <= 0.0:  # all-zero draws have probability zero, but be safe
        draws = rng.exponential(size=r)
        total = draws.sum()
    return MembershipVector(draws / total)


def check_amgm(c, lam) -> tuple[bool, float]:
    """Weighted AM-GM: geometric mean <= arithmetic mean for nonnegative
    values c with positive weights lam. Returns (holds, gap)."""
    c = np.asarray(c, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if c.shape != lam.shape or c.ndim != 1:
        raise ConfigError("values and weights must be 1-d and aligned")
    if np.any(c < 0):
        raise ConfigError("AM-GM needs nonnegative values")
    if np.any(lam <= 0):
        raise ConfigError("AM-GM needs strictly positive weights")
    total = float(lam.sum())
    arith = float((lam * c).sum()) / total
    if np.any(c == 0.0):
        geo = 0.0
    else:
        geo = float(np.exp((lam * np.log(c)).sum() / total))
    gap = arith - geo
    return geo <= arith + 1e-12, gap


class NumericTensor:
    """A total map from index tuples in {1..r}^q to symmetric matrices.

    Used to exercise the summation identities on concrete numbers, with no
    decision variables involved."""

    def __init__(self, q: int, r: int, dim: int, values: dict):
        if q < 1 or r < 1 or dim < 1:
            raise ConfigError("tensor needs q, r, dim >= 1")
        self.q = q
        self.r = r
        self.dim = dim
        arr = np.zeros((r,) * q + (dim, dim))
        count = 0
        for idx in itertools.product(range(1, r + 1), repeat=q):
            m = values.get(idx)
            if m is None:
                raise ConfigError(f"tensor is missing index {idx}")
            m = np.asarray(m, dtype=float)
            if m.shape != (dim, dim):
                raise ConfigError(f"entry {idx} has shape {m.shape}, want {(dim, dim)}")
            norm = float(np.linalg.norm(m))
            if float(np.abs(m - m.T).max()) > 1e-12 * max(1.0, norm):
                raise ConfigError(f"entry {idx} is not symmetric")
            arr[tuple(v - 1 for v in idx)] = m
            count += 1
        if count != r**q:
            raise ConfigError("tensor values do not form a total map")
        self.array = arr

    @staticmethod
    def random(
        q: int, r: int, dim: int, rng: np.random.Generator, integer: bool = False
    ) -> "NumericTensor":
        values = {}
        for idx in itertools.product(range(1, r + 1), repeat=q):
            if integer:
                m = rng.integers(-5, 6, size=(dim, dim)).astype(float)
            else:
                m = rng.normal(size=(dim, dim))
            values[idx] = m + m.T
        return NumericTensor(q, r, dim, values)

    def value(self, idx: tuple[int, ...]) -> np.ndarray:
        return self.array[tuple(v - 1 for v in idx)]

    def exact_value(self, idx: tuple[int, ...]):
        """Entry as a Fraction object matrix; requires integer entries."""
        m = self.value(idx)
        if not np.all(m == np.round(m)):
            raise ConfigError("exact mode needs integer-valued tensor entries")
        out = np.empty((self.dim, self.dim), dtype=object)
        for i in range(self.dim):
            for j in range(self.dim):
                out[i, j] = Fraction(int(round(m[i, j])))
        return out


_index_cache: dict[tuple[int, int], np.ndarray] = {}


def _all_indices(q: int, r: int) -> np.ndarray:
    key = (q, r)
    got = _index_cache.get(key)
    if got is None:
        got = np.array(
            list(itertools.product(range(r), repeat=q)), dtype=np.intp
        ).reshape(r**q, q)
        _index_cache[key] = got
    return got


def flat_sum(t: NumericTensor, h) -> np.ndarray:
    """Left-hand side reference: the plain nested sum over all tuples."""
    hvec = np.asarray(h.weights if isinstance(h, MembershipVector) else h, dtype=float)
    if hvec.shape != (t.r,):
        raise ConfigError(f"weight vector has shape {hvec.shape}, want ({t.r},)")
    idx = _all_indices(t.q, t.r)
    w = np.prod(hvec[idx], axis=1)
    flat = t.array.reshape(t.r**t.q, t.dim, t.dim)
    return np.einsum("t,tij->ij", w, flat)


def flat_sum_exact(t: NumericTensor, h: list) -> np.ndarray:
    h = [Fraction(v) for v in h]
    if len(h) != t.r:
        raise ConfigError(f"weight vector has length {len(h)}, want {t.r}")
    acc = _zero_exact(t.dim)
    for idx in itertools.product(range(1, t.r + 1), repeat=t.q):
        w = Fraction(1)
        for v in idx:
            w *= h[v - 1]
        if w:
            acc = acc + w * t.exact_value(idx)
    return acc


def _zero_exact(dim: int):
    out = np.empty((dim, dim), dtype=object)
    out[...] = Fraction(0)
    return out


@dataclass
class _Plan:
    """Flattened evaluation schedule for the general decomposition: groups
    of distinct permutations (summed with reduceat), one monomial exponent
    row and one leading rational weight per group."""

    perm_idx: np.ndarray
    starts: np.ndarray
    exponents: np.ndarray
    coeffs: np.ndarray


_plan_cache: dict[tuple[int, int], _Plan] = {}


def _build_plan(q: int, r: int, mu_corruption: float | None = None) -> _Plan:
    perm_rows: list[tuple[int, ...]] = []
    starts: list[int] = []
    exponents: list[np.ndarray] = []
    coeffs: list[float] = []
    for i in range(1, r + 1):
        starts.append(len(perm_rows))
        perm_rows.append((i,) * q)
        e = np.zeros(r)
        e[i - 1] = q
        exponents.append(e)
        coeffs.append(1.0)
    by_k = enumerate_partitions(q)
    for k in range(2, min(q, r) + 1):
        for lam in by_k[k]:
            mu = multiplicity_factorial(lam)
            weight = 1.0 / mu if mu_corruption is None else 1.0 / (mu * mu_corruption)
            for head in range(1, r + 1):
                for labels in enumerate_distinct_tails(r, k, head):
                    tup = tuple_from_partition(lam.parts, labels)
                    starts.append(len(perm_rows))
                    perm_rows.extend(distinct_permutations(tup).tuples)
                    e = np.zeros(r)
                    for mult, lab in zip(lam.parts, labels):
                        e[lab - 1] = mult
                    exponents.append(e)
                    coeffs.append(weight)
    return _Plan(
        perm_idx=np.array(perm_rows, dtype=np.intp) - 1,
        starts=np.array(starts, dtype=np.intp),
        exponents=np.stack(exponents),
        coeffs=np.array(coeffs),
    )


def _plan_for(q: int, r: int, mu_corruption: float | None) -> _Plan:
    if mu_corruption is not None:
        return _build_plan(q, r, mu_corruption)
    key = (q, r)
    got = _plan_cache.get(key)
    if got is None:
        got = _plan_cache[key] = _build_plan(q, r)
    return got


def _check_caps(t: NumericTensor) -> None:
    if t.q > MAX_DECOMP_Q or t.r > MAX_DECOMP_R:
        raise CapExceeded(
            f"decomposition supports q <= {MAX_DECOMP_Q}, r <= {MAX_DECOMP_R}; "
            f"got q={t.q}, r={t.r}"
        )


def decompose_eval(
    t: NumericTensor,
    h,
    path: str = "general",
    mu_corruption: float | None = None,
) -> np.ndarray:
    """Right-hand side of the nested-sum decomposition, term by term.

    path "general" runs the partition machinery for any fold; "q3" and
    "q4" are literal transcriptions of the dedicated three- and four-fold
    statements. mu_corruption multiplies every multiplicity factorial and
    exists solely as the negative-control hook for the identity suite.
    """
    _check_caps(t)
    if path not in DECOMP_PATHS:
        raise ConfigError(f"unknown decomposition path {path!r}")
    hvec = np.asarray(h.weights if isinstance(h, MembershipVector) else h, dtype=float)
    if hvec.shape != (t.r,):
        raise ConfigError(f"weight vector has shape {hvec.shape}, want ({t.r},)")
    if path == "q3":
        if t.q != 3:
            raise ConfigError(f"path 'q3' needs a 3-fold tensor, got q={t.q}")
        return _decompose_q3(t, hvec)
    if path == "q4":
        if t.q != 4:
            raise ConfigError(f"path 'q4' needs a 4-fold tensor, got q={t.q}")
        return _decompose_q4(t, hvec)
    plan = _plan_for(t.q, t.r, mu_corruption)
    flat = t.array.reshape(t.r**t.q, t.dim, t.dim)
    perm_vals = flat[np.ravel_multi_index(plan.perm_idx.T, (t.r,) * t.q)]
    groups = np.add.reduceat(perm_vals, plan.starts, axis=0)
    weights = plan.coeffs * np.prod(hvec[None, :] ** plan.exponents, axis=1)
    return np.einsum("g,gij->ij", weights, groups)


def _permsum(t: NumericTensor, tup: tuple[int, ...]) -> np.ndarray:
    acc = np.zeros((t.dim, t.dim))
    for p in distinct_permutations(tup).tuples:
        acc = acc + t.value(p)
    return acc


def _decompose_q3(t: NumericTensor, h: np.ndarray) -> np.ndarray:
    r = t.r
    acc = np.zeros((t.dim, t.dim))
    for i1 in range(1, r + 1):
        acc = acc + h[i1 - 1] ** 3 * t.value((i1, i1, i1))
    for i1 in range(1, r + 1):
        for i2 in range(1, r + 1):
            if i2 == i1:
                continue
            acc = acc + h[i1 - 1] ** 2 * h[i2 - 1] * _permsum(t, (i1, i1, i2))
    for i1 in range(1, r + 1):
        for i2 in range(1, r + 1):
            if i2 == i1:
                continue
            for i3 in range(1, r + 1):
                if i3 == i1 or i3 == i2:
                    continue
                acc = acc + (
                    h[i1 - 1] * h[i2 - 1] * h[i3 - 1] / 6.0
                ) * _permsum(t, (i1, i2, i3))
    return acc


def _decompose_q4(t: NumericTensor, h: np.ndarray) -> np.ndarray:
    r = t.r
    acc = np.zeros((t.dim, t.dim))
    for i1 in range(1, r + 1):
        acc = acc + h[i1 - 1] ** 4 * t.value((i1, i1, i1, i1))
    for i1 in range(1, r + 1):
        for i2 in range(1, r + 1):
            if i2 == i1:
                continue
            acc = acc + h[i1 - 1] ** 3 * h[i2 - 1] * _permsum(t, (i1, i1, i1, i2))
            acc = acc + (
                0.5 * h[i1 - 1] ** 2 * h[i2 - 1] ** 2
            ) * _permsum(t, (i1, i1, i2, i2))
    for i1 in range(1, r + 1):
        for i2 in range(1, r + 1):
            if i2 == i1:
                continue
            for i3 in range(1, r + 1):
                if i3 == i1 or i3 == i2:
                    continue
                acc = acc + (
                    0.5 * h[i1 - 1] ** 2 * h[i2 - 1] * h[i3 - 1]
                ) * _permsum(t, (i1, i1, i2, i3))
                for i4 in range(1, r + 1):
                    if i4 == i1 or i4 == i2 or i4 == i3:
                        continue
                    acc = acc + (
                        h[i1 - 1] * h[i2 - 1] * h[i3 - 1] * h[i4 - 1] / 24.0
                    ) * _permsum(t, (i1, i2, i3, i4))
    return acc


def decompose_eval_exact(t: NumericTensor, h: list, path: str = "general"):
    """Exact-rational right-hand side over an integer tensor; h entries are
    Fractions (or convertible). Identical structure to the float paths."""
    _check_caps(t)
    if path not in DECOMP_PATHS:
        raise ConfigError(f"unknown decomposition path {path!r}")
    h = [Fraction(v) for v in h]
    if len(h) != t.r:
        raise ConfigError(f"weight vector has length {len(h)}, want {t.r}")
    if path == "q3" and t.q != 3:
        raise ConfigError(f"path 'q3' needs a 3-fold tensor, got q={t.q}")
    if path == "q4" and t.q != 4:
        raise ConfigError(f"path 'q4' needs a 4-fold tensor, got q={t.q}")
    r = t.r

    def permsum_exact(tup):
        acc = _zero_exact(t.dim)
        for p in distinct_permutations(tup).tuples:
            acc = acc + t.exact_value(p)
        return acc

    acc = _zero_exact(t.dim)
    if path == "q3":
        for i1 in range(1, r + 1):
            acc = acc + h[i1 - 1] ** 3 * t.exact_value((i1, i1, i1))
            for i2 in range(1, r + 1):
                if i2 == i1:
                    continue
                acc = acc + h[i1 - 1] ** 2 * h[i2 - 1] * permsum_exact((i1, i1, i2))
                for i3 in range(1, r + 1):
                    if i3 == i1 or i3 == i2:
                        continue
                    acc = acc + (
                        h[i1 - 1] * h[i2 - 1] * h[i3 - 1] * Fraction(1, 6)
                    ) * permsum_exact((i1, i2, i3))
        return acc
    if path == "q4":
        for i1 in range(1, r + 1):
            acc = acc + h[i1 - 1] ** 4 * t.exact_value((i1, i1, i1, i1))
            for i2 in range(1, r + 1):
                if i2 == i1:
                    continue
                acc = acc + h[i1 - 1] ** 3 * h[i2 - 1] * permsum_exact((i1, i1, i1, i2))
                acc = acc + (
                    Fraction(1, 2) * h[i1 - 1] ** 2 * h[i2 - 1] ** 2
                ) * permsum_exact((i1, i1, i2, i2))
                for i3 in range(1, r + 1):
                    if i3 == i1 or i3 == i2:
                        continue
                    acc = acc + (
                        Fraction(1, 2) * h[i1 - 1] ** 2 * h[i2 - 1] * h[i3 - 1]
                    ) * permsum_exact((i1, i1, i2, i3))
                    for i4 in range(1, r + 1):
                        if i4 in (i1, i2, i3):
                            continue
                        acc = acc + (
                            h[i1 - 1] * h[i2 - 1] * h[i3 - 1] * h[i4 - 1]
                            * Fraction(1, 24)
                        ) * permsum_exact((i1, i2, i3, i4))
        return acc

    for i1 in range(1, r + 1):
        acc = acc + h[i1 - 1] ** t.q * t.exact_value((i1,) * t.q)
    by_k = enumerate_partitions(t.q)
    for k in range(2, min(t.q, r) + 1):
        for lam in by_k[k]:
            weight = Fraction(1, multiplicity_factorial(lam))
            for head in range(1, r + 1):
                for labels in enumerate_distinct_tails(r, k, head):
                    tup = tuple_from_partition(lam.parts, labels)
                    mono = Fraction(1)
                    for mult, lab in zip(lam.parts, labels):
                        mono *= h[lab - 1] ** mult
                    if mono:
                        acc = acc + weight * mono * permsum_exact(tup)
    return acc


def _rational_simplex(r: int, rng: np.random.Generator) -> list[Fraction]:
    raw = [int(v) for v in rng.integers(1, 30, size=r)]
    total = sum(raw)
    return [Fraction(v, total) for v in raw]


def identity_suite(
    qs=(3, 4, 5),
    rs=(2, 3, 4),
    trials: int = 100,
    dim: int = 2,
    seed: int = 0,
    mu_corruption: float | None = None,
) -> list[dict]:
    """Residuals of flat sum vs every applicable decomposition path.

    One row per (q, r, path) with the maximum relative residual over the
    float trials, plus one exact-rational row per (q, r) checked for a
    literally zero residual. The relative scale is 1 + the Frobenius norm
    of the flat sum."""
    rng = np.random.default_rng(seed)
    rows: list[dict] = []
    for q in qs:
        for r in rs:
            paths = ["general"] + (["q3"] if q == 3 else []) + (["q4"] if q == 4 else [])
            worst = {p: 0.0 for p in paths}
            worst_case = {p: None for p in paths}
            for trial in range(trials):
                t = NumericTensor.random(q, r, dim, rng)
                h = sample_simplex(r, rng)
                lhs = flat_sum(t, h)
                denom = 1.0 + float(np.linalg.norm(lhs))
                for p in paths:
                    rhs = decompose_eval(t, h, path=p, mu_corruption=mu_corruption)
                    res = float(np.abs(rhs - lhs).max()) / denom
                    if res > worst[p]:
                        worst[p] = res
                        worst_case[p] = trial
            for p in paths:
                rows.append(
                    {
                        "q": q,
                        "r": r,
                        "path": p,
                        "mode": "float",
                        "trials": trials,
                        "max_residual": worst[p],
                        "worst_trial": worst_case[p],
                        "seed": seed,
                        "pass": worst[p] <= 1e-10,
                    }
                )
            exact_trials = min(3, max(trials, 0)) if trials else 0
            exact_ok = True
            for _ in range(exact_trials):
                t = NumericTensor.random(q, r, dim, rng, integer=True)
                h = _rational_simplex(r, rng)
                lhs = flat_sum_exact(t, h)
                for p in paths:
                    if mu_corruption is not None:
                        continue
                    rhs = decompose_eval_exact(t, h, path=p)
                    diff = rhs - lhs
                    if any(diff[i, j] != 0 for i in range(dim) for j in range(dim)):
                        exact_ok = False
            if exact_trials:
                rows.append(
                    {
                        "q": q,
                        "r": r,
                        "path": "exact",
                        "mode": "exact",
                        "trials": exact_trials,
                        "max_residual": 0.0 if exact_ok else float("nan"),
                        "worst_trial": None,
                        "seed": seed,
                        "pass": exact_ok,
                    }
                )
    return rows


def integer_identities(q_max: int = 8, r_max: int = 12) -> list[dict]:
    """The exact combinatorial identities, reported per (q, r)."""
    from .combinat import (
        partition_cover_check,
        power_identity_check,
        stirling2,
        stirling2_from_partitions,
    )

    rows = []
    for q in range(1, q_max + 1):
        stirling_ok = all(
            stirling2(q, k) == stirling2_from_partitions(q, k) for k in range(q + 1)
        )
        for r in range(1, r_max + 1):
            rows.append(
                {
                    "q": q,
                    "r": r,
                    "partition_cover": partition_cover_check(q, r),
                    "power_identity": power_identity_check(q, r),
                    "stirling": stirling_ok,
                    "pass": partition_cover_check(q, r)
                    and power_identity_check(q, r)
                    and stirling_ok,
                }
            )
    return rows


def _simplex_probes(r: int, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Vertices, edge midpoints, then random draws, stacked row-wise."""
    probes = [np.eye(r)[i] for i in range(r)]
    for i in range(r):
        for j in range(i + 1, r):
            mid = np.zeros(r)
            mid[i] = mid[j] = 0.5
            probes.append(mid)
    for _ in range(n_samples):
        probes.append(sample_simplex(r, rng).weights)
    return np.stack(probes)


def soundness_sample(
    spec: PlmiSpec,
    result: FeasibilityResult,
    n_samples: int = 1000,
    rng: np.random.Generator | None = None,
) -> dict:
    """Evaluate the full nested sum at the witness over simplex probes.

    Refuses anything but a FeasibleWithMargin result; the deterministic
    probes (vertices and edge midpoints) always come first. The contract
    being checked is max lambda < 0 at every probe."""
    if result.status is not Status.FEASIBLE_WITH_MARGIN:
        raise ConfigError("soundness sampling needs a FeasibleWithMargin result")
    if result.witness is None:
        raise ConfigError("result carries no witness")
    rng = rng or np.random.default_rng(0)
    probes = _simplex_probes(spec.r, n_samples, rng)
    idx = _all_indices(spec.q, spec.r)
    vals = np.stack(
        [
            eval_expr(spec.vertex(tuple(int(v) + 1 for v in row)), result.witness)
            for row in idx
        ]
    )
    weights = np.prod(probes[:, idx], axis=2)
    evaluated = np.einsum("st,tij->sij", weights, vals)
    lams = backend.max_eigvals(evaluated)
    worst = int(np.argmax(lams))
    return {
        "samples": int(probes.shape[0]),
        "max_lambda": float(lams[worst]),
        "worst_h": [float(v) for v in probes[worst]],
        "all_negative": bool(np.all(lams < 0.0)),
    }


@dataclass(frozen=True)
class MethodRegion:
    """Sweep outcome of one (method, q) over a parameter grid; statuses are
    'Feasible', 'Infeasible' or 'Inconclusive', aligned with grid order."""

    method: str
    q: int
    grid: tuple[tuple[float, float], ...]
    statuses: tuple[str, ...]

    def __post_init__(self):
        if len(self.grid) != len(self.statuses):
            raise ConfigError("grid and statuses must align")
        bad = set(self.statuses) - {"Feasible", "Infeasible", "Inconclusive"}
        if bad:
            raise ConfigError(f"unknown statuses {sorted(bad)}")

    @property
    def label(self) -> str:
        return f"{self.method}:q{self.q}"

    def feasible_points(self) -> list[tuple[float, float]]:
        return [p for p, s in zip(self.grid, self.statuses) if s == "Feasible"]


def region_containment(a: MethodRegion, b: MethodRegion) -> dict:
    """Points Feasible under a but not b, and the reverse.

    Inconclusive cells on either side are listed separately and never
    counted as violations."""
    if a.grid != b.grid:
        raise ConfigError("regions were computed on different grids")
    a_not_b: list[tuple[float, float]] = []
    b_not_a: list[tuple[float, float]] = []
    inconclusive: list[tuple[float, float]] = []
    for p, sa, sb in zip(a.grid, a.statuses, b.statuses):
        if "Inconclusive" in (sa, sb):
            inconclusive.append(p)
            continue
        if sa == "Feasible" and sb != "Feasible":
            a_not_b.append(p)
        if sb == "Feasible" and sa != "Feasible":
            b_not_a.append(p)
    return {
        "a": a.label,
        "b": b.label,
        "a_feasible_not_b": a_not_b,
        "b_feasible_not_a": b_not_a,
        "inconclusive": inconclusive,
    }


@dataclass
class RegionReport:
    grid: tuple[tuple[float, float], ...]
    regions: dict[str, MethodRegion]
    containments: list[dict]
