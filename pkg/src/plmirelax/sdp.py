"""Strict-feasibility decision for sets of affine matrix-negativity
constraints.

The epigraph problem min t subject to F_c(x) - t*I negative semidefinite
for every constraint and ||x|| <= R is solved with a path-following
logarithmic barrier: an outer loop grows the objective weight
geometrically and an inner damped Newton with backtracking recenters.
Classification uses a signed margin with a relative Inconclusive band,
because strict inequalities are open conditions and a hard yes/no at the
boundary would be dishonest.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import backend
from .errors import CapExceeded, ConfigError, DimensionError, NumericalFailure
from .matexpr import (
    AffineSymMatrix,
    PlmiSpec,
    VarRegistry,
    _float_parts,
    fmat_identity,
)
from .relax import LmiSet

MAX_VARS = 200
MAX_ROWS = 5000
# Above this many floats the dense (constraints, vars, d, d) coefficient
# tensor of a size group is not materialized and a per-constraint path runs.
DENSE_LIMIT = 20_000_000


class Status(Enum):
    FEASIBLE_WITH_MARGIN = "FeasibleWithMargin"
    INFEASIBLE = "Infeasible"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class SolverOptions:
    max_outer: int = 60
    shrink: float = 0.2
    newton_tol: float = 1e-10
    newton_max_iter: int = 200
    eps_margin: float = 1e-6
    ball_radius: float = 1e3

    @staticmethod
    def from_mapping(m: dict) -> "SolverOptions":
        fields = SolverOptions.__dataclass_fields__
        bad = set(m) - set(fields)
        if bad:
            raise ConfigError(f"unknown solver options: {sorted(bad)}")
        kwargs = {}
        for key, value in m.items():
            want = type(fields[key].default)
            try:
                kwargs[key] = want(value)
            except (TypeError, ValueError):
                raise ConfigError(
                    f"solver option {key!r} expects {want.__name__}, got {value!r}"
                ) from None
        return SolverOptions(**kwargs)


@dataclass
class FeasibilityProblem:
    lmi_set: LmiSet
    extra: list[AffineSymMatrix] = field(default_factory=list)
    ball_radius: float = 1e3

    def all_constraints(self) -> list[AffineSymMatrix]:
        return list(self.lmi_set.constraints) + list(self.extra)

    @property
    def registry(self) -> VarRegistry:
        return self.lmi_set.registry


@dataclass
class FeasibilityResult:
    status: Status
    witness: np.ndarray | None
    margin: float
    iterations: int
    wall_time: float
    history: list[float]
    scale: float


@dataclass
class _Group:
    """Constraints of one matrix size, stacked. coeffs is the dense
    (count, nvars, dim, dim) tensor when it fits under DENSE_LIMIT,
    otherwise sparse holds per-constraint (vids, -coeff stacks)."""

    dim: int
    consts: np.ndarray
    coeffs: np.ndarray | None
    sparse: list[tuple[np.ndarray, np.ndarray]] | None


@dataclass
class CompiledProblem:
    nvars: int
    groups: list[_Group]
    dims: list[int]
    scale: float
    radius: float


def sym_eig(M) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix via the selected backend.

    Eigenvalues come back ascending with orthonormal column eigenvectors.
    The input must be symmetric to 1e-12 relative."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"need a square matrix, got shape {M.shape}")
    n = M.shape[0]
    if n > 64:
        raise CapExceeded(f"sym_eig capped at dim 64, got {n}")
    norm = float(np.linalg.norm(M))
    if n and float(np.abs(M - M.T).max()) > 1e-12 * max(1.0, norm):
        raise DimensionError("matrix is not symmetric within tolerance")
    try:
        w, v = backend.jacobi_eigh(0.5 * (M + M.T))
    except RuntimeError as exc:
        raise NumericalFailure(str(exc)) from None
    return w, v


def compile_problem(problem: FeasibilityProblem) -> CompiledProblem:
    """Flatten constraints into per-size stacks and normalize by the
    largest coefficient Frobenius norm (falling back to the constants,
    then 1)."""
    constraints = problem.all_constraints()
    if not constraints:
        raise ConfigError("no constraints to solve")
    nvars = len(problem.registry)
    if nvars > MAX_VARS:
        raise CapExceeded(f"{nvars} variables exceeds the cap of {MAX_VARS}")
    rows = sum(c.dim for c in constraints)
    if rows > MAX_ROWS:
        raise CapExceeded(f"{rows} constraint rows exceeds the cap of {MAX_ROWS}")

    parts = [_float_parts(c) for c in constraints]
    coeff_norm = 0.0
    const_norm = 0.0
    for const, _, coeffs in parts:
        if len(coeffs):
            flat = coeffs.reshape(len(coeffs), -1)
            coeff_norm = max(coeff_norm, float(np.linalg.norm(flat, axis=1).max()))
        const_norm = max(const_norm, float(np.linalg.norm(const)))
    scale = coeff_norm or const_norm or 1.0

    by_dim: dict[int, list[int]] = {}
    for pos, c in enumerate(constraints):
        by_dim.setdefault(c.dim, []).append(pos)

    groups = []
    for dim, members in by_dim.items():
        consts = np.stack([parts[pos][0] for pos in members]) / scale
        if len(members) * max(nvars, 1) * dim * dim <= DENSE_LIMIT:
            dense = np.zeros((len(members), nvars, dim, dim))
            for row, pos in enumerate(members):
                _, cvids, coeffs = parts[pos]
                if len(cvids):
                    dense[row, cvids] = coeffs / scale
            groups.append(_Group(dim, consts, np.ascontiguousarray(dense), None))
        else:
            sparse = []
            for pos in members:
                _, cvids, coeffs = parts[pos]
                d = np.concatenate([-coeffs / scale, np.eye(dim)[None]], axis=0)
                sparse.append((cvids, np.ascontiguousarray(d)))
            groups.append(_Group(dim, consts, None, sparse))
    return CompiledProblem(
        nvars=nvars,
        groups=groups,
        dims=[c.dim for c in constraints],
        scale=scale,
        radius=float(problem.ball_radius),
    )


def _group_values(g: _Group, x: np.ndarray) -> np.ndarray:
    """Normalized F_c(x) for every constraint in the group."""
    if g.coeffs is not None:
        if g.coeffs.shape[1]:
            return g.consts + np.einsum("n,cnij->cij", x, g.coeffs)
        return g.consts
    out = np.empty_like(g.consts)
    for row, (cvids, dirs) in enumerate(g.sparse):
        f = g.consts[row]
        if len(cvids):
            f = f - np.einsum("t,tij->ij", x[cvids], dirs[:-1])
        out[row] = f
    return out


def _eval_margin(cp: CompiledProblem, x: np.ndarray) -> float:
    return max(
        float(backend.max_eigvals(_group_values(g, x)).max()) for g in cp.groups
    )


def _ball_terms(cp: CompiledProblem, x: np.ndarray):
    ball = cp.radius**2 - float(x @ x)
    if ball <= 0.0:
        return None
    return ball


def _barrier_value(cp: CompiledProblem, y: np.ndarray) -> float | None:
    """Barrier value without derivatives, for line-search probes."""
    n = cp.nvars
    x, t = y[:n], y[n]
    ball = _ball_terms(cp, x)
    if ball is None:
        return None
    value = -np.log(ball)
    for g in cp.groups:
        slack = t * np.eye(g.dim) - _group_values(g, x)
        ok, logdet = backend.group_logdet(slack)
        if not ok:
            return None
        value -= logdet
    return value


def _barrier_full(cp: CompiledProblem, y: np.ndarray, tau: float):
    """Value, gradient and Hessian of tau*t + sum_c(-logdet S_c) -
    log(R^2 - ||x||^2), or (None, None, None) off the interior."""
    n = cp.nvars
    x, t = y[:n], y[n]
    ball = _ball_terms(cp, x)
    if ball is None:
        return None, None, None
    grad = np.zeros(n + 1)
    hess = np.zeros((n + 1, n + 1))
    value = tau * t - np.log(ball)
    grad[n] += tau
    grad[:n] += (2.0 / ball) * x
    hess[:n, :n] += (2.0 / ball) * np.eye(n) + (4.0 / ball**2) * np.outer(x, x)
    for g in cp.groups:
        eye = np.eye(g.dim)
        if g.coeffs is not None:
            slack = t * eye - _group_values(g, x)
            ok, logdet, gvar, gt, hvv, hvt, htt = backend.group_terms(
                slack, g.coeffs
            )
            if not ok:
                return None, None, None
            value -= logdet
            grad[:n] += gvar
            grad[n] += gt
            hess[:n, :n] += hvv
            hess[:n, n] += hvt
            hess[n, :n] += hvt
            hess[n, n] += htt
        else:
            for row, (cvids, dirs) in enumerate(g.sparse):
                f = g.consts[row]
                if len(cvids):
                    f = f - np.einsum("t,tij->ij", x[cvids], dirs[:-1])
                ok, logdet, gg, hh = backend.barrier_terms(t * eye - f, dirs)
                if not ok:
                    return None, None, None
                value -= logdet
                sel = np.concatenate([cvids, [n]])
                # d(-logdet S)/dtheta = -tr(S^-1 dS/dtheta)
                np.subtract.at(grad, sel, gg)
                hess[np.ix_(sel, sel)] += hh
    return value, grad, hess


# Squared Newton decrement under which an unfinishable centering step is
# still a valid point on the central path (lambda <= 0.1 keeps the
# path-following bounds intact); larger residuals are a genuine failure.
_STALL_DECREMENT = 1e-2


def _newton_center(cp, y, tau, opts):
    """Damped Newton on the barrier objective until the decrement falls
    under newton_tol. Returns (y, iterations)."""
    val, grad, hess = _barrier_full(cp, y, tau)
    if val is None:
        raise NumericalFailure("initial point not strictly interior")
    decrement = np.inf
    for it in range(opts.newton_max_iter):
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            bump = 1e-12 * max(1.0, float(np.abs(np.diag(hess)).max()))
            try:
                step = np.linalg.solve(hess + bump * np.eye(len(grad)), -grad)
            except np.linalg.LinAlgError:
                raise NumericalFailure("Newton system is singular") from None
        decrement = float(-grad @ step)
        if decrement <= opts.newton_tol:
            return y, it
        slope = float(grad @ step)
        alpha = 1.0
        while True:
            cand = y + alpha * step
            cval = _barrier_value(cp, cand)
            if cval is not None and cval + tau * cand[-1] <= val + 0.25 * alpha * slope:
                y = cand
                val, grad, hess = _barrier_full(cp, y, tau)
                break
            alpha *= 0.5
            if alpha * float(np.linalg.norm(step)) < 1e-14:
                if decrement <= _STALL_DECREMENT:
                    return y, it + 1
                raise NumericalFailure(
                    "Newton stalled (step norm below 1e-14) with residual "
                    f"decrement {decrement:.3e} at barrier weight {tau:.3e}"
                )
    if decrement <= _STALL_DECREMENT:
        return y, opts.newton_max_iter
    raise NumericalFailure(
        f"inner Newton iteration cap {opts.newton_max_iter} reached with "
        f"residual decrement {decrement:.3e}"
    )


def solve_feasibility(
    problem: FeasibilityProblem, opts: SolverOptions | None = None
) -> FeasibilityResult:
    """Decide strict feasibility of "every constraint negative definite".

    The barrier path-following loop runs on the epigraph formulation over
    normalized data; the final margin (worst max-eigenvalue over
    constraints at the witness) is classified against the relative band
    eps_margin. The reported margin is in original units. Raises
    NumericalFailure instead of guessing when Newton stalls; that outcome
    is deliberately distinct from Infeasible.
    """
    opts = opts or SolverOptions()
    t_start = time.perf_counter()
    if problem.ball_radius != opts.ball_radius:
        problem = FeasibilityProblem(
            lmi_set=problem.lmi_set,
            extra=problem.extra,
            ball_radius=opts.ball_radius,
        )
    cp = compile_problem(problem)
    n = cp.nvars

    y = np.zeros(n + 1)
    worst0 = _eval_margin(cp, y[:n])
    y[n] = worst0 + 1.0

    nu = float(sum(cp.dims) + 2)
    gap_tol = 0.01 * opts.eps_margin
    tau = 1.0
    history: list[float] = []
    total_iters = 0
    for _ in range(opts.max_outer):
        y, iters = _newton_center(cp, y, tau, opts)
        total_iters += iters
        history.append(float(y[n]) * cp.scale)
        if nu / tau <= gap_tol:
            break
        tau /= opts.shrink

    x = y[:n].copy()
    margin_hat = _eval_margin(cp, x)
    lower_hat = float(y[n]) - nu / tau
    eps = opts.eps_margin
    if margin_hat <= -eps:
        status = Status.FEASIBLE_WITH_MARGIN
        witness = x
    elif lower_hat >= eps:
        status = Status.INFEASIBLE
        witness = None
    else:
        status = Status.INCONCLUSIVE
        witness = None
    return FeasibilityResult(
        status=status,
        witness=witness,
        margin=margin_hat * cp.scale,
        iterations=total_iters,
        wall_time=time.perf_counter() - t_start,
        history=history,
        scale=cp.scale,
    )


def stabilization_problem(
    spec: PlmiSpec, lmi_set: LmiSet, opts: SolverOptions | None = None
) -> FeasibilityProblem:
    """Attach the side constraint pinning the designated symmetric variable
    strictly above the identity (I - Q negative definite). Scale freedom of
    the homogeneous constraints makes this a normalization, and it rules
    out the trivial all-zero point."""
    opts = opts or SolverOptions()
    name = spec.lyapunov_var
    if name is None:
        raise ConfigError("spec has no designated symmetric variable")
    block = spec.registry.find_block(name)
    if block is None or block["kind"] != "sym":
        raise ConfigError(f"designated variable {name!r} is not a symmetric block")
    ndim = block["rows"]
    terms = {}
    for vid in spec.registry.block_ids(name):
        basis = spec.registry.entry_basis(vid)
        terms[vid] = tuple(tuple(-v for v in row) for row in basis)
    side = AffineSymMatrix.build(spec.registry, ndim, fmat_identity(ndim), terms)
    return FeasibilityProblem(
        lmi_set=lmi_set, extra=[side], ball_radius=opts.ball_radius
    )
