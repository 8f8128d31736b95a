"""Command-line front end.

Subcommands: identities (numeric and exact identity checks), generate
(constraint-set construction and export), solve (single feasibility run),
sweep (the two-parameter example grid), compare (cross-method region
report from an existing sweep CSV).

Exit codes: 0 success, 1 check failure, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # 3.10 fallback
    import tomli as tomllib

from . import __version__, backend, oracle, sweep as sweepmod
from .errors import (
    CapExceeded,
    ConfigError,
    DimensionError,
    NumericalFailure,
    RegistryError,
    WrongFold,
)
from .matexpr import load_spec, make_example_spec
from .relax import DEFAULT_AMGM_CAP, generate
from .sdp import (
    FeasibilityProblem,
    SolverOptions,
    solve_feasibility,
    stabilization_problem,
)
from .sdpa import export_sdpa

SCHEMA_VERSION = 1


def _load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if isinstance(doc.get("sweep"), dict):
        doc = doc["sweep"]
    return doc


def _out_dir(args) -> Path | None:
    if args.out_dir is None:
        return None
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resolve_spec(args):
    """Either a spec file or the built-in worked example, never both."""
    if args.spec is not None and args.example is not None:
        raise ConfigError("give a spec file or --example, not both")
    if args.spec is not None:
        return load_spec(args.spec)
    if args.example is not None:
        a, b = args.example
        return make_example_spec(a, b, q=args.fold)
    raise ConfigError("need a spec file or --example A B")


def cmd_identities(args) -> int:
    if args.trials < 0:
        raise ConfigError(f"trials must be >= 0, got {args.trials}")
    integer_rows = oracle.integer_identities(q_max=8, r_max=12)
    qs = tuple(range(3, min(args.qmax, oracle.MAX_DECOMP_Q) + 1))
    rs = tuple(range(2, min(args.rmax, oracle.MAX_DECOMP_R) + 1))
    suite_rows = []
    if args.trials and qs and rs:
        suite_rows = oracle.identity_suite(
            qs=qs,
            rs=rs,
            trials=args.trials,
            seed=args.seed,
            mu_corruption=args.corrupt_mu,
        )
    all_pass = all(r["pass"] for r in integer_rows) and all(
        r["pass"] for r in suite_rows
    )
    for row in suite_rows:
        mark = "ok" if row["pass"] else "FAIL"
        print(
            f"{mark}  q={row['q']} r={row['r']} path={row['path']:<8}"
            f" max residual {row['max_residual']:.3e}"
            + ("" if row["pass"] else f"  (replay: seed={row['seed']}, trial={row['worst_trial']})")
        )
    bad_int = [r for r in integer_rows if not r["pass"]]
    print(
        f"integer identities: {len(integer_rows) - len(bad_int)}/{len(integer_rows)} ok"
    )
    for row in bad_int:
        print(f"FAIL  integer identities at q={row['q']} r={row['r']}")
    report = {
        "schema_version": SCHEMA_VERSION,
        "trials": args.trials,
        "seed": args.seed,
        "integer": integer_rows,
        "suite": suite_rows,
        "pass": all_pass,
    }
    out = _out_dir(args)
    if out is not None:
        path = out / "identities.json"
        path.write_text(json.dumps(report, indent=2) + "\n")
        print(f"report: {path}")
    print("PASS" if all_pass else "FAIL")
    return 0 if all_pass else 1


def _maybe_export(args, spec, lmis, out: Path | None) -> Path | None:
    if not args.export_sdpa:
        return None
    if spec.lyapunov_var is not None:
        problem = stabilization_problem(spec, lmis)
    else:
        problem = FeasibilityProblem(lmis)
    name = (
        args.export_sdpa
        if isinstance(args.export_sdpa, str)
        else f"{lmis.method}_q{spec.q}.dat-s"
    )
    path = (out or Path(".")) / name
    export_sdpa(problem, path)
    return path


def cmd_generate(args) -> int:
    spec = _resolve_spec(args)
    lmis = generate(spec, args.method, cap=args.cap)
    print(
        f"method {args.method}: {len(lmis)} constraints"
        f" (q={spec.q}, r={spec.r}, dim={spec.dim}, vars={len(spec.registry)})"
    )
    shown = lmis.provenance if args.verbose else lmis.provenance[:10]
    for tag in shown:
        print("  " + " ".join(str(t) for t in tag))
    if len(shown) < len(lmis):
        print(f"  ... {len(lmis) - len(shown)} more (use --verbose for all)")
    out = _out_dir(args)
    if out is not None:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "method": args.method,
            "q": spec.q,
            "r": spec.r,
            "dim": spec.dim,
            "constraints": len(lmis),
            "provenance": [[str(t) for t in tag] for tag in lmis.provenance],
        }
        path = out / f"generate_{args.method}_q{spec.q}.json"
        path.write_text(json.dumps(doc, indent=2) + "\n")
        print(f"report: {path}")
    exported = _maybe_export(args, spec, lmis, out)
    if exported is not None:
        print(f"sdpa: {exported}")
    return 0


def cmd_solve(args) -> int:
    spec = _resolve_spec(args)
    lmis = generate(spec, args.method, cap=args.cap)
    opts = SolverOptions()
    if spec.lyapunov_var is not None:
        problem = stabilization_problem(spec, lmis, opts)
    else:
        problem = FeasibilityProblem(lmis)
    out = _out_dir(args)
    exported = _maybe_export(args, spec, lmis, out)
    if exported is not None:
        print(f"sdpa: {exported}")
    result = solve_feasibility(problem, opts)
    print(f"status: {result.status.value}")
    print(f"margin: {result.margin:.6e}")
    print(
        f"constraints: {len(lmis)} (+{len(problem.extra)} side),"
        f" iterations: {result.iterations}, wall: {result.wall_time * 1e3:.1f} ms"
    )
    if result.witness is not None:
        labels = spec.registry.labels
        for vid, val in enumerate(result.witness):
            print(f"  {labels[vid]} = {val:.6g}")
    return 0


def cmd_sweep(args) -> int:
    raw = _load_toml(args.config) if args.config else {}
    config = sweepmod.SweepConfig.from_mapping(raw)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if overrides:
        merged = config.to_mapping()
        merged.update(overrides)
        config = sweepmod.SweepConfig.from_mapping(merged)
    out = Path(args.out_dir if args.out_dir is not None else "sweep_out")
    out.mkdir(parents=True, exist_ok=True)
    total = len(config.methods) * config.grid_n**2

    def progress(done, pending):
        if done % 50 == 0 or done == pending:
            print(f"  {done}/{pending} cells solved", flush=True)

    print(f"sweep: {total} cells over {out} (jobs={config.jobs})")
    result = sweepmod.run_sweep(config, out, resume=not args.fresh, progress=progress)
    if result.reused:
        print(f"reused {result.reused} rows from existing CSV")
    failures = sum(1 for r in result.rows if r.get("numerical_failure"))
    for label, region in result.regions.items():
        counts = {s: region.statuses.count(s) for s in ("Feasible", "Infeasible", "Inconclusive")}
        print(
            f"  {label:<12} Feasible {counts['Feasible']:>4}"
            f"  Infeasible {counts['Infeasible']:>4}"
            f"  Inconclusive {counts['Inconclusive']:>4}"
        )
    print(f"numerical failures: {failures}")
    print(f"digest: {sweepmod.sweep_digest(result.rows)}")
    for kind, path in result.paths.items():
        print(f"{kind}: {path}")
    return 0


def cmd_compare(args) -> int:
    csv_path = Path(args.csv) if args.csv else Path(
        args.out_dir if args.out_dir is not None else "sweep_out"
    ) / "sweep.csv"
    if not csv_path.exists():
        raise ConfigError(f"no sweep CSV at {csv_path}; run the sweep first")
    raw_config, rows = sweepmod.read_csv(csv_path)
    config = sweepmod.SweepConfig.from_mapping(raw_config)
    regions = sweepmod.regions_from_rows(rows, config)
    violations = 0
    reports = []
    for pa, pb in config.compare_pairs:
        rep = oracle.region_containment(regions[pa], regions[pb])
        reports.append(rep)
        missing = rep["a_feasible_not_b"]
        print(f"{pa} within {pb}: " + ("ok" if not missing else f"{len(missing)} violations"))
        for point in missing:
            print(f"  Feasible under {pa} only: ({point[0]:g}, {point[1]:g})")
            violations += 1
        if rep["inconclusive"]:
            print(f"  {len(rep['inconclusive'])} cells Inconclusive, not counted")
    for label, region in sorted(regions.items()):
        n = len(region.feasible_points())
        print(f"{label}: {n} Feasible of {len(region.grid)}")
    out = _out_dir(args)
    if out is not None:
        path = out / "containment.json"
        path.write_text(
            json.dumps(sweepmod.containment_data(reports, config), indent=2) + "\n"
        )
        print(f"report: {path}")
    return 0 if violations == 0 else 1


def _add_spec_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("spec", nargs="?", default=None, help="spec file (JSON)")
    p.add_argument(
        "--example",
        nargs=2,
        type=float,
        metavar=("A", "B"),
        help="use the built-in worked example at parameters (A, B)",
    )
    p.add_argument(
        "--fold",
        type=int,
        default=2,
        help="fold count q for --example (default 2)",
    )
    p.add_argument("--method", required=True, help="relaxation method name")
    p.add_argument(
        "--cap",
        type=int,
        default=DEFAULT_AMGM_CAP,
        help="constraint-count cap (default %(default)s)",
    )
    p.add_argument(
        "--export-sdpa",
        nargs="?",
        const=True,
        default=False,
        metavar="NAME",
        help="write the sparse SDPA problem file (optional file name)",
    )
    p.add_argument("--out-dir", default=None, help="directory for artifacts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plmirelax",
        description="Finite LMI relaxations for nested fuzzy-summation "
        "matrix inequalities.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__} ({backend.BACKEND})"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("identities", help="run the summation identity checks")
    p.add_argument("--qmax", type=int, default=5)
    p.add_argument("--rmax", type=int, default=4)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None, help="directory for the JSON report")
    p.add_argument("--corrupt-mu", type=float, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_identities)

    p = sub.add_parser("generate", help="build a constraint set and report it")
    _add_spec_args(p)
    p.add_argument("--verbose", action="store_true", help="list every constraint")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="generate and decide strict feasibility")
    _add_spec_args(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="run the worked-example parameter sweep")
    p.add_argument("--config", default=None, help="TOML sweep configuration")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--jobs", type=int, default=None, help="override worker count")
    p.add_argument(
        "--out-dir", default=None, help="output directory (default sweep_out)"
    )
    p.add_argument(
        "--fresh", action="store_true", help="ignore any existing CSV, recompute all"
    )
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="containment report from a sweep CSV")
    p.add_argument("--csv", default=None, help="sweep CSV path")
    p.add_argument(
        "--out-dir", default=None, help="where sweep.csv lives / report goes"
    )
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CapExceeded, WrongFold, RegistryError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
