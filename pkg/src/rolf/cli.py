"""Command-line entry point.

Exit codes: 0 success, 2 config unreadable, 3 config invalid, 4 output I/O.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .experiment import (
    ConfigError,
    ConfigParseError,
    ExperimentConfig,
    load_config,
    run_experiment,
    schema_text,
)
from .simulate import generate_scenario, write_scenario_csv

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_INVALID = 3
EXIT_IO = 4


def _load(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    scenario = config.scenario
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    updates = {"scenario": scenario}
    if args.out is not None:
        updates["output_dir"] = Path(args.out)
    if getattr(args, "replicas", None) is not None:
        updates["n_replicas"] = args.replicas
    if getattr(args, "no_plots", False):
        updates["emit_plots"] = False
    if getattr(args, "jobs", None) is not None:
        updates["jobs"] = args.jobs
    return replace(config, **updates)


def _cmd_run(args) -> int:
    config = _load(args)
    out = run_experiment(config)
    for check in out.summary["claims"]["checks"]:
        logging.info("%s: %s", check["name"], "pass" if check["passed"] else "fail")
    print(f"wrote {out.csv_path} and {out.summary_path}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    config = _load(args)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "scenario.csv"
    write_scenario_csv(path, generate_scenario(config.scenario))
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_schema(args) -> int:
    sys.stdout.write(schema_text())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rolf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="JSON experiment config")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, metavar="S", help="base seed override")

    run = sub.add_parser("run", help="run the Monte Carlo filter comparison")
    common(run)
    run.add_argument("--replicas", type=int, metavar="N", help="replica count override")
    run.add_argument("--no-plots", action="store_true", help="skip SVG figures")
    run.add_argument("--jobs", type=int, metavar="J", help="worker processes")
    run.set_defaults(func=_cmd_run)

    sim = sub.add_parser("simulate", help="dump one scenario as CSV")
    common(sim)
    sim.set_defaults(func=_cmd_simulate)

    schema = sub.add_parser("schema", help="print the config schema with defaults")
    schema.set_defaults(func=_cmd_schema)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ConfigError, ValueError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
