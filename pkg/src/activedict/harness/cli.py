"""Command line entry point: ``activedict run|sweep|report|render-dict``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..checkpoint import load_dictionary, render_dictionary
from ..errors import ParameterError
from .config import SWEEP_AXES, SWEEP_DEFAULTS, ConfigError, SweepSpec, load_config
from .report import compare_report
from .runner import run_experiment, run_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

log = logging.getLogger("activedict")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat 'key = value' config file")
    p.add_argument("--profile", choices=("desk", "paper"), default="desk")
    p.add_argument("--seed", type=int)
    p.add_argument("--policy")
    p.add_argument("--encoder")
    p.add_argument("--epochs", type=int)
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key; repeatable")


def _overrides(args) -> dict:
    values = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        values[key.strip()] = value.strip()
    for key in ("seed", "policy", "encoder", "epochs", "out"):
        value = getattr(args, key, None)
        if value is not None:
            values[key] = value
    return values


def _parse_values(text: str) -> tuple:
    try:
        return tuple(float(v) if any(c in v for c in ".eE") else int(v)
                     for v in (s.strip() for s in text.split(",")) if v)
    except ValueError:
        raise ConfigError(f"--values expects comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="activedict", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one experiment (all replicates)")
    _common(run)

    sweep = sub.add_parser("sweep", help="vary one parameter across policies")
    _common(sweep)
    sweep.add_argument("--axis", choices=SWEEP_AXES, required=True)
    sweep.add_argument("--values", help="comma-separated axis values (default: built-in grid)")
    sweep.add_argument("--policies", help="comma-separated policy names (default: all nine)")

    report = sub.add_parser("report", help="rank policies across finished runs")
    report.add_argument("runs", nargs="+", help="run directories")
    report.add_argument("--out", default="report.csv")
    report.add_argument("--tail", type=int, help="average SNR / hist_dist over the last N epochs")

    render = sub.add_parser("render-dict", help="render a DSL1 checkpoint as a PGM tile image")
    render.add_argument("checkpoint")
    render.add_argument("--out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            cfg = load_config(args.config, args.profile, _overrides(args))
            out = run_experiment(cfg, jobs=args.jobs)
            print(out / "curves.csv")
        elif args.command == "sweep":
            base = load_config(args.config, args.profile, _overrides(args))
            values = (_parse_values(args.values) if args.values is not None
                      else tuple(SWEEP_DEFAULTS[args.axis]))
            spec = SweepSpec(args.axis, values, base)
            if args.policies:
                spec = SweepSpec(args.axis, values, base,
                                 tuple(p.strip() for p in args.policies.split(",") if p.strip()))
            out = run_sweep(spec, jobs=args.jobs)
            print(out / "sweep.csv")
        elif args.command == "report":
            path, warnings = compare_report(args.runs, args.out, tail=args.tail)
            for w in warnings:
                print(f"warning: skipped {w}", file=sys.stderr)
            print(path)
        elif args.command == "render-dict":
            out = Path(args.out) if args.out else Path(args.checkpoint).with_suffix(".pgm")
            render_dictionary(load_dictionary(args.checkpoint), out)
            print(out)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
