"""``scpmppi`` command line: run benchmark suites and print their reports."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import yaml

from . import bench, world
from .config import CONFIG_KEYS, InvalidConfig, Variant

log = logging.getLogger("scpmppi")

EXIT_OK = 0
EXIT_CONFIG = 2

# per-field solver overrides exposed as --key flags
_OVERRIDE_TYPES = {
    "K": int, "T": int, "M": int, "L": int, "lambda": float, "epsilon": float,
    "dt": float, "fd_step": float, "w_d": float, "w_v": float,
    "sigma_diag": str, "u_max": str, "q_diag": str, "r_diag": str,
    "likelihood_offset": float, "collision_penalty": float, "robot_radius": float,
    "bandwidth_mode": str, "shift_warm_start": str, "workers": int,
}


def _suite_data(config_path: Path) -> dict:
    data = yaml.safe_load(config_path.read_text()) or {}
    if not isinstance(data, dict):
        raise InvalidConfig([f"{config_path}: expected a mapping"])
    if "variants" in data or "environments" in data:
        return data
    # a flat solver file: wrap it as a one-variant suite
    solver = {k: v for k, v in data.items() if k in CONFIG_KEYS}
    unknown = sorted(set(data) - set(CONFIG_KEYS))
    if unknown:
        raise InvalidConfig([f"unknown config key {k!r}" for k in unknown])
    return {"solver": solver, "variants": [{}], "environments": []}


def build_suite(args) -> bench.SuiteConfig:
    config_path = Path(args.config)
    data = _suite_data(config_path)
    if args.variant:
        variant = Variant.parse(args.variant)
        data["variants"] = [{"variant": variant.value}]
    if args.env:
        data["environments"] = [{"name": Path(args.env).stem, "file": str(Path(args.env).resolve())}]
    elif args.density:
        data["environments"] = [{"name": args.density, "density": args.density}]
    if not data.get("environments"):
        raise InvalidConfig(["no environments: give --env, --density or an environments list"])
    if args.trials is not None:
        data["trials"] = args.trials
    if args.seed is not None:
        data["seed"] = args.seed
    if args.jobs is not None:
        data["jobs"] = args.jobs
    overrides = {k: getattr(args, "o_" + k) for k in _OVERRIDE_TYPES}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return bench.parse_suite(data, config_path.parent, overrides)


def cmd_run(args) -> int:
    try:
        suite = build_suite(args)
    except (InvalidConfig, ValueError, TypeError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out_dir) if args.out_dir else None
    report = bench.run_suite_config(suite, out_dir, export_plots=args.export_plots,
                                    capture_candidates=args.capture_candidates)
    print(bench.format_table(report))
    if out_dir is not None:
        print(f"wrote {out_dir / bench.TRIALS_CSV} and {out_dir / bench.SUMMARY_CSV}")
    return EXIT_OK


def cmd_report(args) -> int:
    in_dir = Path(args.in_dir)
    try:
        records = bench.read_trials(in_dir)
    except (OSError, KeyError, ValueError) as exc:
        print(f"cannot read {in_dir}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = bench.aggregate(records)
    print(bench.format_table(report))
    out = Path(args.csv) if args.csv else in_dir / bench.SUMMARY_CSV
    bench.write_summary_csv(report, out)
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scpmppi", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log every trial")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a benchmark suite")
    run.add_argument("--config", required=True, help="suite YAML or flat solver YAML")
    run.add_argument("--variant", choices=["mppi", "scp", "scp-svgd"])
    where = run.add_mutually_exclusive_group()
    where.add_argument("--env", help="environment file")
    where.add_argument("--density", choices=sorted(world.DENSITY_TIERS))
    run.add_argument("--seed", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--jobs", type=int, help="parallel trial processes")
    run.add_argument("--out-dir")
    run.add_argument("--export-plots", action="store_true")
    run.add_argument("--capture-candidates", action="store_true")
    solver = run.add_argument_group("solver overrides")
    for key, kind in _OVERRIDE_TYPES.items():
        solver.add_argument(f"--{key.replace('_', '-')}", dest="o_" + key, type=kind, metavar="V")
    run.set_defaults(func=cmd_run)

    report = sub.add_parser("report", help="summarize a finished run directory")
    report.add_argument("--in", dest="in_dir", required=True)
    report.add_argument("--csv", help="summary CSV path (default: <in>/summary.csv)")
    report.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
