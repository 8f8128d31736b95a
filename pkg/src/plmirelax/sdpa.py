"""Sparse SDPA (.dat-s) interchange for feasibility problems.

The epigraph problem is exported in the standard primal form
min c'y subject to sum_i y_i F_i - F_0 >= 0 (block diagonal). Each
original constraint "F_c(x) < 0" becomes one block holding the negated
slack t*I - F_c(x), and one extra final block encodes the norm ball
||x|| <= R so the exported problem is bounded exactly like the internal
one. A parser for the same dialect is bundled so exports can be
round-tripped and fed to external solvers from the parsed data alone.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .matexpr import _float_parts
from .sdp import FeasibilityProblem

_FMT = "{:.17g}"


def _entry(matno: int, block: int, i: int, j: int, value: float) -> str:
    return f"{matno} {block} {i} {j} " + _FMT.format(value)


def export_sdpa(problem: FeasibilityProblem, path) -> None:
    """Write the epigraph problem as sparse SDPA.

    Layout: scalar variables are the registry entries 1..n in order, then
    the epigraph variable t as variable n+1 (the objective). Blocks 1..k
    are the constraints, block k+1 is the ball. Values are decimal with 17
    significant digits, so every double round-trips bit-identically.
    """
    constraints = problem.all_constraints()
    if not constraints:
        raise ConfigError("nothing to export: problem has no constraints")
    registry = problem.registry
    n = len(registry)
    m = n + 1
    radius = float(problem.ball_radius)
    nblocks = len(constraints) + 1

    lines = [
        '"Epigraph feasibility problem: minimize t over (x, t).',
        '"Each constraint block holds the NEGATED slack t*I - F(x) >= 0,',
        '"equivalent to the original matrix-negativity constraint F(x) < 0',
        '"whenever t < 0; a positive optimum certifies infeasibility of the',
        '"strict system within the ball below.',
        f'"Variables: 1..{n} are the registry entries in order, {m} is t.',
        '"Final block is [[R*I, x], [x\', R]] >= 0, i.e. ||x|| <= R with',
        '"R = ' + _FMT.format(radius) + ".",
        str(m),
        str(nblocks),
        " ".join(str(c.dim) for c in constraints) + f" {n + 1}",
        " ".join(["0"] * n + ["1"]),
    ]

    ents: list[str] = []
    for bno, c in enumerate(constraints, start=1):
        const, vids, coeffs = _float_parts(c)
        for i in range(c.dim):
            for j in range(i, c.dim):
                v = float(const[i, j])
                if v != 0.0:
                    ents.append(_entry(0, bno, i + 1, j + 1, v))
        for pos, vid in enumerate(vids):
            mat = coeffs[pos]
            for i in range(c.dim):
                for j in range(i, c.dim):
                    v = -float(mat[i, j])
                    if v != 0.0:
                        ents.append(_entry(int(vid) + 1, bno, i + 1, j + 1, v))
        for i in range(c.dim):
            ents.append(_entry(m, bno, i + 1, i + 1, 1.0))
    ball = nblocks
    for i in range(n + 1):
        ents.append(_entry(0, ball, i + 1, i + 1, -radius))
    for vid in range(n):
        ents.append(_entry(vid + 1, ball, vid + 1, n + 1, 1.0))

    text = "\n".join(lines + ents) + "\n"
    path = os.fspath(path)
    with open(path, "w") as fh:
        fh.write(text)


@dataclass
class SdpaProblem:
    """Parsed sparse SDPA data: minimize objective'y subject to
    sum_i y_i mats[b][i] - mats[b][0] >= 0 for every block b (0-based
    here; matno 0 is F_0)."""

    nvars: int
    block_sizes: list[int]
    objective: np.ndarray
    mats: list[dict[int, np.ndarray]]

    def matrix(self, block: int, matno: int) -> np.ndarray:
        got = self.mats[block].get(matno)
        if got is None:
            size = self.block_sizes[block]
            return np.zeros((size, size))
        return got


def _tokens(line: str) -> list[str]:
    for ch in "{}(),":
        line = line.replace(ch, " ")
    return line.split()


def parse_sdpa(path) -> SdpaProblem:
    """Parse the sparse SDPA dialect written by export_sdpa.

    Comment lines (leading '"' or '*') are skipped. Diagonal blocks
    (negative sizes) are rejected: the exporter never writes them and
    silently densifying would hide a mismatched file."""
    with open(os.fspath(path)) as fh:
        raw = fh.readlines()
    body: list[tuple[int, str]] = []
    for lineno, line in enumerate(raw, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith('"') or stripped.startswith("*"):
            continue
        body.append((lineno, stripped))
    if len(body) < 4:
        raise ConfigError("SDPA file is missing header lines")

    def fail(lineno: int, why: str):
        raise ConfigError(f"SDPA parse error at line {lineno}: {why}")

    lineno, text = body[0]
    try:
        m = int(_tokens(text)[0])
    except (ValueError, IndexError):
        fail(lineno, f"expected the variable count, got {text!r}")
    if m < 1:
        fail(lineno, f"variable count must be positive, got {m}")

    lineno, text = body[1]
    try:
        nblocks = int(_tokens(text)[0])
    except (ValueError, IndexError):
        fail(lineno, f"expected the block count, got {text!r}")
    if nblocks < 1:
        fail(lineno, f"block count must be positive, got {nblocks}")

    lineno, text = body[2]
    toks = _tokens(text)
    if len(toks) != nblocks:
        fail(lineno, f"expected {nblocks} block sizes, got {len(toks)}")
    sizes = []
    for tok in toks:
        try:
            size = int(tok)
        except ValueError:
            fail(lineno, f"bad block size {tok!r}")
        if size < 0:
            fail(lineno, f"diagonal blocks (negative size {size}) are not supported")
        if size == 0:
            fail(lineno, "zero block size")
        sizes.append(size)

    lineno, text = body[3]
    toks = _tokens(text)
    if len(toks) != m:
        fail(lineno, f"expected {m} objective coefficients, got {len(toks)}")
    try:
        objective = np.array([float(t) for t in toks])
    except ValueError:
        fail(lineno, f"bad objective vector {text!r}")

    mats: list[dict[int, np.ndarray]] = [{} for _ in range(nblocks)]
    seen: set[tuple[int, int, int, int]] = set()
    for lineno, text in body[4:]:
        toks = _tokens(text)
        if len(toks) != 5:
            fail(lineno, f"expected 'matno block i j value', got {text!r}")
        try:
            matno, block, i, j = (int(t) for t in toks[:4])
            value = float(toks[4])
        except ValueError:
            fail(lineno, f"bad entry {text!r}")
        if not 0 <= matno <= m:
            fail(lineno, f"matrix number {matno} outside 0..{m}")
        if not 1 <= block <= nblocks:
            fail(lineno, f"block {block} outside 1..{nblocks}")
        size = sizes[block - 1]
        if not 1 <= i <= j <= size:
            fail(lineno, f"indices ({i},{j}) invalid for upper triangle of size {size}")
        key = (matno, block, i, j)
        if key in seen:
            fail(lineno, f"duplicate entry for {key}")
        seen.add(key)
        mat = mats[block - 1].get(matno)
        if mat is None:
            mat = mats[block - 1][matno] = np.zeros((size, size))
        mat[i - 1, j - 1] = value
        mat[j - 1, i - 1] = value
    return SdpaProblem(nvars=m, block_sizes=sizes, objective=objective, mats=mats)
