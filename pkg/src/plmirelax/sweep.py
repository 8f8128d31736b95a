"""Parameter sweep over the worked (a, b) example: per-point generation
and solving, CSV/JSON artifacts, and cross-method region summaries.

Each grid point is a pure function of the configuration, so a sweep can
be resumed by reloading matching rows from an existing CSV and
recomputing only what is missing. Output order is deterministic grid
order regardless of worker completion order.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericalFailure, WrongFold
from .matexpr import make_example_spec
from .oracle import MethodRegion, region_containment
from .relax import DEFAULT_AMGM_CAP, count_constraints, generate
from .sdp import SolverOptions, Status, solve_feasibility, stabilization_problem

SCHEMA_VERSION = 1
CSV_COLUMNS = ("a", "b", "method", "q", "status", "margin", "constraints", "solve_ms")
SWEEP_METHODS = ("vertex", "tuan", "kimlee2", "polya", "amgm")
DEFAULT_METHODS = (
    ("tuan", 2),
    ("kimlee2", 2),
    ("polya", 3),
    ("polya", 4),
    ("amgm", 3),
    ("amgm", 4),
)
DEFAULT_PAIRS = (("polya:q4", "amgm:q4"), ("tuan:q2", "kimlee2:q2"))

_NUM = "{:.10g}"


def _parse_method(item) -> tuple[str, int]:
    if isinstance(item, str):
        name, sep, fold = item.partition(":")
        if not sep:
            raise ConfigError(f"method {item!r} needs the form 'name:q'")
        item = (name, fold)
    if len(item) != 2:
        raise ConfigError(f"method entry {item!r} must be (name, q)")
    name, fold = item
    try:
        fold = int(fold)
    except (TypeError, ValueError):
        raise ConfigError(f"method {name!r} has non-integer fold {fold!r}") from None
    if name not in SWEEP_METHODS:
        raise ConfigError(f"unknown sweep method {name!r}, pick from {SWEEP_METHODS}")
    return name, fold


@dataclass(frozen=True)
class SweepConfig:
    """Everything a sweep run depends on; hashably frozen and echoed into
    every artifact so runs are reproducible from the files alone."""

    a_range: tuple[float, float] = (0.0, 10.0)
    b_range: tuple[float, float] = (0.0, 10.0)
    grid_n: int = 11
    methods: tuple[tuple[str, int], ...] = DEFAULT_METHODS
    compare_pairs: tuple[tuple[str, str], ...] = DEFAULT_PAIRS
    seed: int = 0
    jobs: int = 1
    cap: int = DEFAULT_AMGM_CAP
    solver: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if self.grid_n < 2:
            raise ConfigError(f"grid_n must be >= 2, got {self.grid_n}")
        for label, (lo, hi) in (("a_range", self.a_range), ("b_range", self.b_range)):
            if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
                raise ConfigError(f"{label} must be a nonempty finite interval")
        if not self.methods:
            raise ConfigError("sweep needs at least one (method, q) pair")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        for name, fold in self.methods:
            try:
                n = count_constraints(name, fold, 3)
            except WrongFold as exc:
                raise ConfigError(f"method ({name}, q={fold}): {exc}") from None
            if n > self.cap:
                raise ConfigError(
                    f"method ({name}, q={fold}) needs {n} constraints, cap is {self.cap}"
                )
        labels = {f"{name}:q{fold}" for name, fold in self.methods}
        for pa, pb in self.compare_pairs:
            for lab in (pa, pb):
                if lab not in labels:
                    raise ConfigError(
                        f"compare pair references {lab!r}, not in methods {sorted(labels)}"
                    )
        SolverOptions.from_mapping(dict(self.solver))

    @staticmethod
    def from_mapping(raw: dict) -> "SweepConfig":
        known = {
            "a_range",
            "b_range",
            "grid_n",
            "methods",
            "compare_pairs",
            "seed",
            "jobs",
            "cap",
            "solver",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown sweep config keys {sorted(unknown)}")
        kw: dict = {}
        for key in ("a_range", "b_range"):
            if key in raw:
                val = raw[key]
                if not isinstance(val, (list, tuple)) or len(val) != 2:
                    raise ConfigError(f"{key} must be [lo, hi]")
                kw[key] = (float(val[0]), float(val[1]))
        for key in ("grid_n", "seed", "jobs", "cap"):
            if key in raw:
                if not isinstance(raw[key], int) or isinstance(raw[key], bool):
                    raise ConfigError(f"{key} must be an integer")
                kw[key] = raw[key]
        if "methods" in raw:
            kw["methods"] = tuple(_parse_method(m) for m in raw["methods"])
        if "compare_pairs" in raw:
            pairs = []
            for pair in raw["compare_pairs"]:
                if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                    raise ConfigError("compare_pairs entries must be [labelA, labelB]")
                pairs.append((str(pair[0]), str(pair[1])))
            kw["compare_pairs"] = tuple(pairs)
        elif "methods" in raw:
            # default pairs, trimmed to whatever methods were requested
            labels = {f"{m}:q{q}" for m, q in kw["methods"]}
            kw["compare_pairs"] = tuple(
                p for p in DEFAULT_PAIRS if p[0] in labels and p[1] in labels
            )
        if "solver" in raw:
            if not isinstance(raw["solver"], dict):
                raise ConfigError("solver must be a table of option overrides")
            kw["solver"] = tuple(sorted(raw["solver"].items()))
        return SweepConfig(**kw)

    def to_mapping(self) -> dict:
        return {
            "a_range": list(self.a_range),
            "b_range": list(self.b_range),
            "grid_n": self.grid_n,
            "methods": [[m, q] for m, q in self.methods],
            "compare_pairs": [list(p) for p in self.compare_pairs],
            "seed": self.seed,
            "jobs": self.jobs,
            "cap": self.cap,
            "solver": dict(self.solver),
        }

    def solver_options(self) -> SolverOptions:
        return SolverOptions.from_mapping(dict(self.solver))


def grid_values(rng: tuple[float, float], n: int) -> list[float]:
    return [float(v) for v in np.linspace(rng[0], rng[1], n)]


def grid_points(config: SweepConfig) -> list[tuple[float, float]]:
    """(a, b) points in row-major order: a varies slowest."""
    return [
        (a, b)
        for a in grid_values(config.a_range, config.grid_n)
        for b in grid_values(config.b_range, config.grid_n)
    ]


def sweep_point(
    a: float,
    b: float,
    method: str,
    q: int,
    solver: tuple[tuple[str, float], ...] = (),
    cap: int = DEFAULT_AMGM_CAP,
    keep_witness: bool = True,
) -> dict:
    """Solve one (point, method) cell; never raises NumericalFailure.

    A solver breakdown is recorded as Inconclusive with margin NaN and the
    numerical_failure flag set; regular Inconclusive rows keep their finite
    margin, so the two stay distinguishable even from the CSV."""
    spec = make_example_spec(a, b, q=q)
    lmis = generate(spec, method, cap=cap)
    opts = SolverOptions.from_mapping(dict(solver))
    problem = stabilization_problem(spec, lmis, opts)
    t0 = time.perf_counter()
    failure = False
    try:
        result = solve_feasibility(problem, opts)
        status = {
            Status.FEASIBLE_WITH_MARGIN: "Feasible",
            Status.INFEASIBLE: "Infeasible",
            Status.INCONCLUSIVE: "Inconclusive",
        }[result.status]
        margin = result.margin
        witness = result.witness
    except NumericalFailure:
        status = "Inconclusive"
        margin = float("nan")
        witness = None
        failure = True
    row = {
        "a": a,
        "b": b,
        "method": method,
        "q": q,
        "status": status,
        "margin": margin,
        "constraints": len(lmis),
        "solve_ms": (time.perf_counter() - t0) * 1e3,
        "numerical_failure": failure,
    }
    if keep_witness:
        row["witness"] = None if witness is None else np.asarray(witness)
    return row


def _worker(task: tuple) -> tuple[int, dict]:
    pos, a, b, method, q, solver, cap = task
    return pos, sweep_point(a, b, method, q, solver, cap)


def _row_key(row: dict) -> tuple[str, str, str, int]:
    return (_NUM.format(row["a"]), _NUM.format(row["b"]), row["method"], int(row["q"]))


@dataclass
class SweepResult:
    config: SweepConfig
    rows: list[dict]
    regions: dict[str, MethodRegion] = field(default_factory=dict)
    containments: list[dict] = field(default_factory=list)
    paths: dict[str, Path] = field(default_factory=dict)
    reused: int = 0


def run_sweep(
    config: SweepConfig, out_dir=None, resume: bool = True, progress=None
) -> SweepResult:
    """Execute the full sweep and, when out_dir is given, write sweep.csv,
    plot_data.json and containment.json there.

    With resume enabled, rows from an existing sweep.csv whose embedded
    config matches are reused verbatim (they are pure functions of the
    config); only missing cells are solved. progress, if given, is called
    with (done, total) after each solved cell."""
    points = grid_points(config)
    tasks = []
    for method, q in config.methods:
        for a, b in points:
            tasks.append((len(tasks), a, b, method, q, config.solver, config.cap))
    rows: list[dict | None] = [None] * len(tasks)
    reused = 0
    csv_path = Path(out_dir) / "sweep.csv" if out_dir is not None else None
    if resume and csv_path is not None and csv_path.exists():
        old_config, old_rows = read_csv(csv_path)
        if old_config == config.to_mapping():
            by_key = {_row_key(r): r for r in old_rows}
            for task in tasks:
                pos, a, b, method, q = task[:5]
                got = by_key.get(_row_key({"a": a, "b": b, "method": method, "q": q}))
                if got is not None:
                    rows[pos] = got
                    reused += 1
    pending = [t for t in tasks if rows[t[0]] is None]
    done = 0
    if config.jobs > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            for pos, row in pool.map(_worker, pending, chunksize=4):
                rows[pos] = row
                done += 1
                if progress:
                    progress(done, len(pending))
    else:
        for task in pending:
            pos, row = _worker(task)
            rows[pos] = row
            done += 1
            if progress:
                progress(done, len(pending))
    result = SweepResult(config=config, rows=list(rows), reused=reused)
    result.regions = regions_from_rows(result.rows, config)
    result.containments = [
        region_containment(result.regions[pa], result.regions[pb])
        for pa, pb in config.compare_pairs
    ]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(result.rows, config, out / "sweep.csv")
        (out / "plot_data.json").write_text(
            json.dumps(plot_data(result.rows, config), indent=2) + "\n"
        )
        (out / "containment.json").write_text(
            json.dumps(containment_data(result.containments, config), indent=2) + "\n"
        )
        result.paths = {
            "csv": out / "sweep.csv",
            "plot_data": out / "plot_data.json",
            "containment": out / "containment.json",
        }
    return result


def _format_row(row: dict) -> str:
    margin = row["margin"]
    return ",".join(
        (
            _NUM.format(row["a"]),
            _NUM.format(row["b"]),
            row["method"],
            str(int(row["q"])),
            row["status"],
            "nan" if math.isnan(margin) else _NUM.format(margin),
            str(int(row["constraints"])),
            "{:.3f}".format(row["solve_ms"]),
        )
    )


def write_csv(rows: list[dict], config: SweepConfig, path) -> None:
    """Header comments carry the effective config; margin NaN marks a
    numerical failure (regular Inconclusive rows keep a finite margin)."""
    lines = [
        "# plmirelax sweep",
        "# schema_version: %d" % SCHEMA_VERSION,
        "# config: " + json.dumps(config.to_mapping(), sort_keys=True),
        "# constraints column excludes the common side constraint",
        ",".join(CSV_COLUMNS),
    ]
    lines.extend(_format_row(row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path) -> tuple[dict, list[dict]]:
    """Inverse of write_csv; reconstructs the numerical_failure flag from
    the margin NaN convention."""
    text = Path(path).read_text()
    config_raw = None
    rows = []
    saw_header = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("config:"):
                try:
                    config_raw = json.loads(body[len("config:") :])
                except json.JSONDecodeError as exc:
                    raise ConfigError(f"{path}:{lineno}: bad config echo: {exc}")
            continue
        if not saw_header:
            if tuple(line.split(",")) != CSV_COLUMNS:
                raise ConfigError(f"{path}:{lineno}: unexpected columns {line!r}")
            saw_header = True
            continue
        parts = line.split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise ConfigError(f"{path}:{lineno}: expected {len(CSV_COLUMNS)} fields")
        try:
            margin = float(parts[5])
            rows.append(
                {
                    "a": float(parts[0]),
                    "b": float(parts[1]),
                    "method": parts[2],
                    "q": int(parts[3]),
                    "status": parts[4],
                    "margin": margin,
                    "constraints": int(parts[6]),
                    "solve_ms": float(parts[7]),
                    "numerical_failure": math.isnan(margin),
                }
            )
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
        if rows[-1]["status"] not in ("Feasible", "Infeasible", "Inconclusive"):
            raise ConfigError(f"{path}:{lineno}: unknown status {parts[4]!r}")
    if config_raw is None:
        raise ConfigError(f"{path}: missing '# config:' header line")
    if not saw_header:
        raise ConfigError(f"{path}: missing column header line")
    return config_raw, rows


def sweep_digest(rows: list[dict]) -> str:
    """Determinism hash over everything except wall-clock time."""
    h = hashlib.sha256()
    for row in rows:
        line = _format_row(row)
        h.update(line[: line.rfind(",")].encode())
        h.update(b"\n")
    return h.hexdigest()


def regions_from_rows(
    rows: list[dict], config: SweepConfig
) -> dict[str, MethodRegion]:
    """One MethodRegion per configured (method, q), rows taken in grid
    order. Raises if any cell is missing or duplicated."""
    points = grid_points(config)
    out: dict[str, MethodRegion] = {}
    for method, q in config.methods:
        cells: dict[tuple, str] = {}
        for row in rows:
            if row["method"] == method and int(row["q"]) == q:
                key = (_NUM.format(row["a"]), _NUM.format(row["b"]))
                if key in cells:
                    raise ConfigError(f"duplicate sweep cell {key} for {method}:q{q}")
                cells[key] = row["status"]
        statuses = []
        for a, b in points:
            got = cells.get((_NUM.format(a), _NUM.format(b)))
            if got is None:
                raise ConfigError(f"missing sweep cell ({a}, {b}) for {method}:q{q}")
            statuses.append(got)
        out[f"{method}:q{q}"] = MethodRegion(
            method=method, q=q, grid=tuple(points), statuses=tuple(statuses)
        )
    return out


def plot_data(rows: list[dict], config: SweepConfig) -> dict:
    """Per-method point lists keyed by status, plus the cells where the
    solver broke down, in a shape any plotting tool can consume."""
    methods: dict[str, dict] = {}
    for method, q in config.methods:
        methods[f"{method}:q{q}"] = {
            "Feasible": [],
            "Infeasible": [],
            "Inconclusive": [],
            "numerical_failure": [],
        }
    for row in rows:
        label = f"{row['method']}:q{int(row['q'])}"
        entry = methods.get(label)
        if entry is None:
            continue
        point = [row["a"], row["b"]]
        entry[row["status"]].append(point)
        if row.get("numerical_failure"):
            entry["numerical_failure"].append(point)
    return {
        "schema_version": SCHEMA_VERSION,
        "config": config.to_mapping(),
        "digest": sweep_digest(rows),
        "methods": methods,
    }


def containment_data(containments: list[dict], config: SweepConfig) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "config": config.to_mapping(),
        "pairs": containments,
    }
