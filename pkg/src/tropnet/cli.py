"""Scenario-driven command line: run, validate, list-scenarios.

Every run writes its CSV artifacts plus a manifest sidecar carrying input
hashes, the package version and wall time.  Exit codes: 0 success,
2 usage/schema error, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

from . import __version__
from .errors import TropnetError
from .scenarios import bundled_scenarios, load_scenario, run_scenario

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NONCONVERGENCE = 3


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_csv(path: Path, header, rows) -> str:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return _sha256_file(path)


def _run(args) -> int:
    scenario_path = Path(args.scenario)
    if not scenario_path.exists():
        print(f"error: scenario file not found: {scenario_path}", file=sys.stderr)
        return EXIT_USAGE
    try:
        data = load_scenario(scenario_path)
    except Exception as exc:  # malformed yaml or schema violation
        print(f"error: cannot parse scenario: {exc}", file=sys.stderr)
        return EXIT_USAGE

    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
        data.setdefault("seed", args.seed)
        data["seed"] = args.seed
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if args.iters is not None:
        overrides["iters"] = args.iters

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    try:
        artifacts, warnings = run_scenario(data, overrides)
    except TropnetError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    wall = time.perf_counter() - t0

    digests = {}
    for name, header, rows in artifacts:
        path = out_dir / name
        digests[name] = _write_csv(path, header, rows)
        if not args.quiet:
            print(f"wrote {path} ({len(rows)} rows)")

    manifest = {
        "scenario": scenario_path.name,
        "scenario_sha256": _sha256_file(scenario_path),
        "kind": data["kind"],
        "seed": data.get("seed"),
        "tropnet_version": __version__,
        "wall_time_s": round(wall, 3),
        "artifacts": digests,
        "warnings": warnings,
    }
    manifest_path = out_dir / (Path(data.get("output", "run")).stem + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if not args.quiet:
        print(f"wrote {manifest_path}")

    if warnings:
        for w in warnings:
            print(f"warning: {w}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def _validate(args) -> int:
    from .validate import run_all

    report = run_all(seed=args.seed or 0, quick=args.quick)
    failed = 0
    for fam in report:
        status = "pass" if fam.ok else "FAIL"
        if not args.quiet or not fam.ok:
            print(f"{status:4}  {fam.name:36} {fam.cases - fam.failures}/{fam.cases}"
                  f"  ({fam.seconds:.1f}s)")
        failed += fam.failures
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        rows = [
            [f.name, f.cases, f.failures, "pass" if f.ok else "fail"] for f in report
        ]
        _write_csv(out_dir / "validation.csv", ["family", "cases", "failures", "status"], rows)
    return EXIT_OK if failed == 0 else 1


def _list_scenarios(args) -> int:
    for name, path in bundled_scenarios().items():
        if args.quiet:
            print(name)
        else:
            kind = load_scenario(path)["kind"]
            print(f"{name:28} {kind}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tropnet",
        description="Tropical-algebra traffic analytics: metro headways, "
                    "road network-calculus bounds, car-following runs.",
    )
    parser.add_argument("--version", action="version", version=f"tropnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("scenario", help="YAML scenario path (see list-scenarios)")
    p_run.add_argument("--out", default=".", help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="seed for randomized checks")
    p_run.add_argument("--horizon", type=int, default=None, help="curve horizon override (steps)")
    p_run.add_argument("--iters", type=int, default=None, help="simulation length override")
    p_run.add_argument("--quiet", action="store_true")
    p_run.set_defaults(func=_run)

    p_val = sub.add_parser("validate", help="run the cross-solver oracle suite")
    p_val.add_argument("--seed", type=int, default=0)
    p_val.add_argument("--out", default=None, help="also write validation.csv here")
    p_val.add_argument("--quick", action="store_true", help="reduced corpus sizes")
    p_val.add_argument("--quiet", action="store_true")
    p_val.set_defaults(func=_validate)

    p_list = sub.add_parser("list-scenarios", help="show bundled scenario files")
    p_list.add_argument("--quiet", action="store_true")
    p_list.set_defaults(func=_list_scenarios)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already
        return int(exc.code or 0)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
