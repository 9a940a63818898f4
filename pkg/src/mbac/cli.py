"""Command-line entry point: ``mbac run | compare | validate-config``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from mbac.admission import Scheme
from mbac.config import KEYS, dump_config, parse_config, parse_config_text
from mbac.errors import ConfigError
from mbac.experiment import ALL_SCHEMES, run_experiment
from mbac.reports import emit_reports, summary_line

log = logging.getLogger("mbac")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def _load(args):
    config = parse_config(args.config) if args.config else parse_config_text("")
    if args.seed is not None:
        config = replace(config, base_seed=args.seed)
    if args.runs is not None:
        config = replace(config, runs=args.runs)
    if getattr(args, "scheme", None):
        config = replace(config, schemes=tuple(Scheme.parse(s) for s in args.scheme))
    config.validate()
    return config


def _execute(config, args):
    log.info("running %d seed(s) from %d for %s", config.runs, config.base_seed,
             ", ".join(s.label for s in config.schemes))
    report = run_experiment(config, jobs=args.jobs)
    for summary in report.summaries:
        util = summary.mean_utilization
        print(f"{summary_line(summary)}  utilization {util:.4f}")
    for g in report.gains:
        dec = "NA" if g.blocking_decrease_pct is None else f"{g.blocking_decrease_pct:.1f}%"
        inc = "NA" if g.utilization_increase_pct is None else f"{g.utilization_increase_pct:.1f}%"
        print(f"{g.target.label} vs {g.baseline.label}: blocking -{dec}, utilization +{inc}")
    bundle = emit_reports(report, args.out_dir, config_text=dump_config(config))
    print(f"wrote {bundle.out_dir}")


def cmd_run(args):
    _execute(_load(args), args)


def cmd_compare(args):
    config = replace(_load(args), schemes=ALL_SCHEMES, coupled_mode=False)
    _execute(config, args)


def cmd_validate(args):
    if args.list:
        for key in KEYS:
            print(key)
        return
    if not args.config:
        raise ConfigError("config", "a config file path")
    config = parse_config(args.config)
    sys.stdout.write(dump_config(config))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mbac", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", nargs="?", help="flat key = value config file")
        p.add_argument("-o", "--out-dir", default="mbac-out")
        p.add_argument("--seed", type=int, help="override experiment.base_seed")
        p.add_argument("--runs", type=int, help="override experiment.runs")
        p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    p = sub.add_parser("run", help="run the configured schemes")
    common(p)
    p.add_argument("--scheme", action="append",
                   help="run only this scheme (repeatable); overrides admission.schemes")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run all four schemes on shared seeds and emit gains")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate-config", help="parse a config and print it with defaults")
    p.add_argument("config", nargs="?")
    p.add_argument("--list", action="store_true", help="list every accepted key")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
