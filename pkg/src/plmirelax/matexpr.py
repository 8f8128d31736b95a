"""Decision-variable registry and affine symmetric-matrix expressions.

The data model for a parameterized matrix inequality given as a q-fold
nested fuzzy summation: a registry of scalar decision variables, vertex
expressions with exact-rational coefficients, and numeric evaluation at
simplex points. Rational arithmetic is used everywhere on the build side;
floats appear only at evaluation time.
"""

from __future__ import annotations

import itertools
import json
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .combinat import swap_values
from .errors import ConfigError, DimensionError, RegistryError

Matrix = tuple[tuple[Fraction, ...], ...]


def as_fraction(x) -> Fraction:
    """Coerce to an exact rational. Floats go through their shortest decimal
    repr, so 1.59 becomes 159/100 rather than the binary expansion."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if x != x or x in (float("inf"), float("-inf")):
            raise ValueError(f"cannot convert non-finite float {x!r}")
        return Fraction(str(x))
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Fraction")


def fmat(rows: Iterable[Iterable]) -> Matrix:
    return tuple(tuple(as_fraction(v) for v in row) for row in rows)


def fmat_zero(rows: int, cols: int | None = None) -> Matrix:
    cols = rows if cols is None else cols
    z = Fraction(0)
    return tuple((z,) * cols for _ in range(rows))


def fmat_identity(n: int) -> Matrix:
    one, z = Fraction(1), Fraction(0)
    return tuple(tuple(one if i == j else z for j in range(n)) for i in range(n))


def fmat_add(a: Matrix, b: Matrix) -> Matrix:
    return tuple(tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def fmat_scale(a: Matrix, c: Fraction) -> Matrix:
    return tuple(tuple(c * x for x in row) for row in a)


def fmat_t(a: Matrix) -> Matrix:
    return tuple(zip(*a))


def fmat_mul(a: Matrix, b: Matrix) -> Matrix:
    bt = fmat_t(b)
    return tuple(
        tuple(sum(x * y for x, y in zip(ra, cb)) for cb in bt) for ra in a
    )


def fmat_is_zero(a: Matrix) -> bool:
    return all(x == 0 for row in a for x in row)


def fmat_is_symmetric(a: Matrix) -> bool:
    n = len(a)
    return all(len(row) == n for row in a) and all(
        a[i][j] == a[j][i] for i in range(n) for j in range(i)
    )


def fmat_to_float(a: Matrix) -> np.ndarray:
    return np.array([[float(x) for x in row] for row in a], dtype=float)


def sym_lift(m: Matrix) -> Matrix:
    """m + m^T, the symmetric part times two."""
    return fmat_add(m, fmat_t(m))


class VarRegistry:
    """Ordered registry of scalar decision variables.

    Variables are declared as named blocks: a plain scalar, a symmetric n x n
    matrix (n(n+1)/2 upper-triangle scalars), or a general p x n matrix
    (p*n scalars). Every scalar gets a stable integer id equal to its
    position in the flat list. The registry is append-only until frozen.
    """

    def __init__(self):
        self._blocks: list[dict] = []
        self._labels: list[str] = []
        self._frozen = False

    def __len__(self) -> int:
        return len(self._labels)

    @property
    def frozen(self) -> bool:
        return self._frozen

    @property
    def blocks(self) -> list[dict]:
        return [dict(b) for b in self._blocks]

    @property
    def labels(self) -> list[str]:
        return list(self._labels)

    def label(self, vid: int) -> str:
        return self._labels[vid]

    def _start_block(self, name: str, kind: str, rows: int, cols: int) -> dict:
        if self._frozen:
            raise RegistryError("registry is frozen")
        if any(b["name"] == name for b in self._blocks):
            raise RegistryError(f"duplicate variable name {name!r}")
        block = {
            "name": name,
            "kind": kind,
            "rows": rows,
            "cols": cols,
            "start": len(self._labels),
        }
        self._blocks.append(block)
        return block

    def add_scalar(self, name: str) -> int:
        self._start_block(name, "scalar", 1, 1)
        self._labels.append(name)
        return len(self._labels) - 1

    def add_sym(self, name: str, n: int) -> list[int]:
        if n < 1:
            raise RegistryError(f"symmetric block needs n >= 1, got {n}")
        self._start_block(name, "sym", n, n)
        ids = []
        for i in range(1, n + 1):
            for j in range(i, n + 1):
                self._labels.append(f"{name}[{i},{j}]")
                ids.append(len(self._labels) - 1)
        return ids

    def add_mat(self, name: str, rows: int, cols: int) -> list[int]:
        if rows < 1 or cols < 1:
            raise RegistryError(f"matrix block needs positive shape, got {rows}x{cols}")
        self._start_block(name, "mat", rows, cols)
        ids = []
        for i in range(1, rows + 1):
            for j in range(1, cols + 1):
                self._labels.append(f"{name}[{i},{j}]")
                ids.append(len(self._labels) - 1)
        return ids

    def freeze(self) -> "VarRegistry":
        self._frozen = True
        return self

    def find_block(self, name: str) -> dict | None:
        for b in self._blocks:
            if b["name"] == name:
                return dict(b)
        return None

    def block_ids(self, name: str) -> list[int]:
        b = self.find_block(name)
        if b is None:
            raise RegistryError(f"no variable named {name!r}")
        if b["kind"] == "scalar":
            return [b["start"]]
        if b["kind"] == "sym":
            n = b["rows"]
            return list(range(b["start"], b["start"] + n * (n + 1) // 2))
        return list(range(b["start"], b["start"] + b["rows"] * b["cols"]))

    def id_of(self, label: str) -> int:
        try:
            return self._labels.index(label)
        except ValueError:
            raise RegistryError(f"no scalar entry labeled {label!r}") from None

    def entry_basis(self, vid: int) -> Matrix:
        """Basis matrix of a scalar entry within its own block shape.

        Symmetric off-diagonal entries use the two-unit basis E_ij + E_ji so
        that reconstructed matrices are symmetric by construction.
        """
        for b in self._blocks:
            size = len(self.block_ids(b["name"]))
            if not b["start"] <= vid < b["start"] + size:
                continue
            offset = vid - b["start"]
            rows, cols = b["rows"], b["cols"]
            if b["kind"] == "scalar":
                return fmat([[1]])
            if b["kind"] == "sym":
                n = rows
                i = 0
                while offset >= n - i:
                    offset -= n - i
                    i += 1
                j = i + offset
                m = [[Fraction(0)] * n for _ in range(n)]
                m[i][j] = Fraction(1)
                m[j][i] = Fraction(1)
                return tuple(tuple(row) for row in m)
            i, j = divmod(offset, cols)
            m = [[Fraction(0)] * cols for _ in range(rows)]
            m[i][j] = Fraction(1)
            return tuple(tuple(row) for row in m)
        raise RegistryError(f"scalar id {vid} out of range")


@dataclass(frozen=True)
class AffineSymMatrix:
    """A symmetric matrix-valued affine function of registry scalars.

    `constant` and every coefficient matrix are exact-rational and equal
    their own transpose; `terms` is sorted by variable id with all-zero
    coefficients dropped, so structural equality is canonical.
    """

    dim: int
    constant: Matrix
    terms: tuple[tuple[int, Matrix], ...]
    registry: VarRegistry = field(compare=False, hash=False, repr=False)

    @staticmethod
    def build(
        registry: VarRegistry,
        dim: int,
        constant: Matrix | None = None,
        terms: dict[int, Matrix] | Iterable[tuple[int, Matrix]] | None = None,
    ) -> "AffineSymMatrix":
        constant = fmat_zero(dim) if constant is None else fmat(constant)
        if len(constant) != dim or not fmat_is_symmetric(constant):
            raise DimensionError(f"constant must be a symmetric {dim}x{dim} matrix")
        items = terms.items() if isinstance(terms, dict) else (terms or ())
        merged: dict[int, Matrix] = {}
        for vid, coeff in items:
            coeff = fmat(coeff)
            if len(coeff) != dim or not fmat_is_symmetric(coeff):
                raise DimensionError(
                    f"coefficient of var {vid} must be a symmetric {dim}x{dim} matrix"
                )
            if vid in merged:
                coeff = fmat_add(merged[vid], coeff)
            merged[vid] = coeff
        kept = tuple(
            (vid, merged[vid]) for vid in sorted(merged) if not fmat_is_zero(merged[vid])
        )
        return AffineSymMatrix(dim=dim, constant=constant, terms=kept, registry=registry)

    def key(self):
        """Total-order key over the rational entries; used for canonical
        sorting and exact dedup of constraint sets."""
        return (self.dim, self.constant, self.terms)

    def term_map(self) -> dict[int, Matrix]:
        return dict(self.terms)


def expr_zero(registry: VarRegistry, dim: int) -> AffineSymMatrix:
    return AffineSymMatrix.build(registry, dim)


def expr_add(a: AffineSymMatrix, b: AffineSymMatrix) -> AffineSymMatrix:
    if a.registry is not b.registry:
        raise RegistryError("cannot add expressions over different registries")
    if a.dim != b.dim:
        raise DimensionError(f"dim mismatch {a.dim} vs {b.dim}")
    merged = dict(a.terms)
    for vid, coeff in b.terms:
        merged[vid] = fmat_add(merged[vid], coeff) if vid in merged else coeff
    return AffineSymMatrix.build(
        a.registry, a.dim, fmat_add(a.constant, b.constant), merged
    )


def expr_scale(e: AffineSymMatrix, c) -> AffineSymMatrix:
    c = as_fraction(c)
    if c == 0:
        return expr_zero(e.registry, e.dim)
    return AffineSymMatrix(
        dim=e.dim,
        constant=fmat_scale(e.constant, c),
        terms=tuple((vid, fmat_scale(m, c)) for vid, m in e.terms),
        registry=e.registry,
    )


def _float_parts(e: AffineSymMatrix):
    cache = getattr(e, "_floats", None)
    if cache is None:
        const = fmat_to_float(e.constant)
        vids = np.array([vid for vid, _ in e.terms], dtype=np.intp)
        coeffs = (
            np.stack([fmat_to_float(m) for _, m in e.terms])
            if e.terms
            else np.zeros((0, e.dim, e.dim))
        )
        cache = (const, vids, coeffs)
        object.__setattr__(e, "_floats", cache)
    return cache


def eval_expr(e: AffineSymMatrix, x) -> np.ndarray:
    """Evaluate constant + sum_v x[v] * coeff_v as floats.

    The upper triangle is computed and mirrored, so the result is exactly
    symmetric."""
    x = np.asarray(x, dtype=float)
    if x.shape != (len(e.registry),):
        raise DimensionError(
            f"variable vector has shape {x.shape}, registry holds {len(e.registry)}"
        )
    const, vids, coeffs = _float_parts(e)
    m = const + np.einsum("t,tij->ij", x[vids], coeffs) if len(vids) else const.copy()
    iu, ju = np.triu_indices(e.dim)
    m[ju, iu] = m[iu, ju]
    return m


class MembershipVector:
    """A point on the probability simplex standing in for membership values."""

    __slots__ = ("weights",)

    def __init__(self, weights):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise DimensionError("membership vector must be 1-D and nonempty")
        if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-12:
            raise DimensionError("weights must be nonnegative and sum to 1")
        self.weights = w

    def __len__(self) -> int:
        return int(self.weights.size)

    def __iter__(self):
        return iter(self.weights)


class PlmiSpec:
    """A q-fold nested-summation matrix inequality over r rules.

    `vertex` maps every index tuple in {1..r}^q to an AffineSymMatrix of
    size `dim` over the shared registry. `lyapunov_var` optionally names the
    symmetric variable that feasibility problems pin positive definite.
    """

    def __init__(
        self,
        q: int,
        r: int,
        dim: int,
        registry: VarRegistry,
        vertex_fn: Callable[[tuple[int, ...]], AffineSymMatrix],
        lyapunov_var: str | None = None,
    ):
        if q < 1 or r < 1 or dim < 1:
            raise DimensionError(f"need q, r, dim >= 1, got q={q}, r={r}, dim={dim}")
        self.q = q
        self.r = r
        self.dim = dim
        self.registry = registry
        self.lyapunov_var = lyapunov_var
        self._vertex_fn = vertex_fn

    def vertex(self, idx: Iterable[int]) -> AffineSymMatrix:
        idx = tuple(idx)
        if len(idx) != self.q:
            raise DimensionError(f"index tuple {idx} must have length {self.q}")
        if any(not 1 <= i <= self.r for i in idx):
            raise DimensionError(f"index tuple {idx} has entries outside 1..{self.r}")
        e = self._vertex_fn(idx)
        if e.dim != self.dim:
            raise DimensionError(f"vertex {idx} has dim {e.dim}, spec dim {self.dim}")
        return e

    def all_tuples(self):
        return itertools.product(range(1, self.r + 1), repeat=self.q)


def subst_indices(spec: PlmiSpec, i: Iterable[int], j: int) -> AffineSymMatrix:
    """Vertex expression at the tuple with the values at positions j and 1
    exchanged everywhere they occur; j = 1 returns the original vertex."""
    return spec.vertex(swap_values(tuple(i), j))


def eval_plmi(spec: PlmiSpec, h, x) -> np.ndarray:
    """Full nested-summation value: sum over all r^q tuples of the product
    of membership weights times the evaluated vertex. Reference
    implementation; sampling loops should use the vectorized oracle path."""
    w = h.weights if isinstance(h, MembershipVector) else np.asarray(h, dtype=float)
    if w.shape != (spec.r,):
        raise DimensionError(f"membership vector must have length {spec.r}")
    total = np.zeros((spec.dim, spec.dim))
    for idx in spec.all_tuples():
        wt = 1.0
        for i in idx:
            wt *= w[i - 1]
        if wt == 0.0:
            continue
        total += wt * eval_expr(spec.vertex(idx), x)
    return total


def _example_matrices(a, b):
    a = as_fraction(a)
    b = as_fraction(b)
    A = {
        1: fmat([["1.59", "-7.29"], ["0.01", 0]]),
        2: fmat([["0.02", "-4.64"], ["0.35", "0.21"]]),
        3: ((-a, Fraction("-4.33")), (Fraction(0), Fraction(0))),
    }
    B = {
        1: fmat([[1], [0]]),
        2: fmat([[8], [0]]),
        3: ((Fraction(6) - b,), (Fraction(-1),)),
    }
    return A, B


def make_example_spec(a, b, q: int = 2) -> PlmiSpec:
    """The three-rule planar stabilization example.

    Vertex expressions are (A_i1 Q + B_i1 F_i2)^T + A_i1 Q + B_i1 F_i2 over
    the symmetric 2x2 variable Q and the 1x2 gain blocks F_1, F_2, F_3. For
    q > 2 the same two-index map is used and trailing indices are ignored,
    which lifts the inequality to a deeper summation without changing it.
    """
    if q not in (2, 3, 4):
        raise ConfigError(f"example spec supports q in {{2, 3, 4}}, got {q}")
    r, dim = 3, 2
    reg = VarRegistry()
    q_ids = reg.add_sym("Q", dim)
    f_ids = {i: reg.add_mat(f"F{i}", 1, dim) for i in (1, 2, 3)}
    reg.freeze()
    A, B = _example_matrices(a, b)

    base: dict[tuple[int, int], AffineSymMatrix] = {}
    for i1 in range(1, r + 1):
        for i2 in range(1, r + 1):
            terms: dict[int, Matrix] = {}
            for vid in q_ids:
                terms[vid] = sym_lift(fmat_mul(A[i1], reg.entry_basis(vid)))
            for vid in f_ids[i2]:
                terms[vid] = sym_lift(fmat_mul(B[i1], reg.entry_basis(vid)))
            base[(i1, i2)] = AffineSymMatrix.build(reg, dim, None, terms)

    def vertex_fn(idx: tuple[int, ...]) -> AffineSymMatrix:
        return base[(idx[0], idx[1])] if q > 1 else base[(idx[0], idx[0])]

    return PlmiSpec(q, r, dim, reg, vertex_fn, lyapunov_var="Q")


SPEC_SCHEMA_VERSION = 1


def dump_spec(spec: PlmiSpec, path) -> None:
    """Serialize a spec to JSON with rationals as exact "p/q" strings."""
    variables = []
    for b in spec.registry.blocks:
        variables.append(
            {"name": b["name"], "kind": b["kind"], "rows": b["rows"], "cols": b["cols"]}
        )
    vertices = []
    for idx in spec.all_tuples():
        e = spec.vertex(idx)
        entry = {
            "index": list(idx),
            "constant": [[str(v) for v in row] for row in e.constant],
            "terms": {
                spec.registry.label(vid): [[str(v) for v in row] for row in m]
                for vid, m in e.terms
            },
        }
        vertices.append(entry)
    doc = {
        "schema_version": SPEC_SCHEMA_VERSION,
        "q": spec.q,
        "r": spec.r,
        "dim": spec.dim,
        "lyapunov_var": spec.lyapunov_var,
        "variables": variables,
        "vertices": vertices,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _parse_matrix(raw, dim: int, where: str) -> Matrix:
    if not isinstance(raw, list) or len(raw) != dim:
        raise ConfigError(f"{where}: expected {dim} rows")
    rows = []
    for i, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != dim:
            raise ConfigError(f"{where}: row {i} must have {dim} entries")
        out = []
        for j, v in enumerate(row):
            try:
                out.append(as_fraction(v))
            except (ValueError, ZeroDivisionError, TypeError) as exc:
                raise ConfigError(f"{where}[{i}][{j}]: bad rational {v!r} ({exc})") from None
        rows.append(tuple(out))
    m = tuple(rows)
    if not fmat_is_symmetric(m):
        raise ConfigError(f"{where}: matrix is not symmetric")
    return m


def load_spec(path) -> PlmiSpec:
    """Parse a JSON spec file, validating dimensions, labels, and symmetry.

    Errors name the offending field. The vertex map must be total over
    {1..r}^q.
    """
    with open(path) as fh:
        doc = json.load(fh)
    for key in ("q", "r", "dim", "variables", "vertices"):
        if key not in doc:
            raise ConfigError(f"spec file missing field {key!r}")
    q, r, dim = doc["q"], doc["r"], doc["dim"]
    if not all(isinstance(v, int) and v >= 1 for v in (q, r, dim)):
        raise ConfigError("q, r, dim must be positive integers")

    reg = VarRegistry()
    for n, var in enumerate(doc["variables"]):
        where = f"variables[{n}]"
        if not isinstance(var, dict) or "name" not in var or "kind" not in var:
            raise ConfigError(f"{where}: need name and kind")
        name, kind = var["name"], var["kind"]
        try:
            if kind == "scalar":
                reg.add_scalar(name)
            elif kind == "sym":
                if var.get("rows") != var.get("cols"):
                    raise ConfigError(f"{where}: symmetric block needs rows == cols")
                reg.add_sym(name, int(var["rows"]))
            elif kind == "mat":
                reg.add_mat(name, int(var["rows"]), int(var["cols"]))
            else:
                raise ConfigError(f"{where}: unknown kind {kind!r}")
        except (KeyError, TypeError):
            raise ConfigError(f"{where}: bad shape metadata") from None
        except RegistryError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    reg.freeze()

    lyap = doc.get("lyapunov_var")
    if lyap is not None:
        b = reg.find_block(lyap)
        if b is None or b["kind"] != "sym":
            raise ConfigError(f"lyapunov_var {lyap!r} is not a declared symmetric block")

    vertex_map: dict[tuple[int, ...], AffineSymMatrix] = {}
    for n, v in enumerate(doc["vertices"]):
        where = f"vertices[{n}]"
        idx = v.get("index")
        if (
            not isinstance(idx, list)
            or len(idx) != q
            or any(not isinstance(i, int) or not 1 <= i <= r for i in idx)
        ):
            raise ConfigError(f"{where}.index: need {q} integers in 1..{r}")
        idx = tuple(idx)
        if idx in vertex_map:
            raise ConfigError(f"{where}.index: duplicate tuple {idx}")
        constant = _parse_matrix(v.get("constant"), dim, f"{where}.constant")
        terms: dict[int, Matrix] = {}
        for label, m in (v.get("terms") or {}).items():
            try:
                vid = reg.id_of(label)
            except RegistryError:
                raise ConfigError(f"{where}.terms: unknown entry {label!r}") from None
            terms[vid] = _parse_matrix(m, dim, f"{where}.terms[{label!r}]")
        vertex_map[idx] = AffineSymMatrix.build(reg, dim, constant, terms)

    missing = [
        idx
        for idx in itertools.product(range(1, r + 1), repeat=q)
        if idx not in vertex_map
    ]
    if missing:
        raise ConfigError(
            f"vertex map incomplete: {len(missing)} tuples missing, first {missing[0]}"
        )
    return PlmiSpec(q, r, dim, reg, vertex_map.__getitem__, lyapunov_var=lyap)
