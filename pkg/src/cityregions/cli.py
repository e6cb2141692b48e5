"""Command-line entry point.

Pipeline stages run as subcommands sharing --config/--out/--stage-override;
`fixture` materializes the bundled three-taxi demo and `fit` runs the
distribution comparison on a one-value-per-line sample file.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import fixtures, pipeline, stats
from .pipeline import ConfigError, MissingArtifactError


def _parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    key, raw_value = text.split("=", 1)
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value
    return key, value


def _add_stage_parser(sub, name: str, help_text: str) -> None:
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--out", help="override the config's output directory")
    p.add_argument("--stage-override", action="append", default=[],
                   type=_parse_override, metavar="KEY=VALUE",
                   help="override a config field (dotted keys, JSON values)")
    p.set_defaults(stage=name)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cityregions",
        description="Taxi-GPS mobility toolkit: trips, quad-tree regions, "
                    "functional labels, DTN target-set simulation.")
    sub = parser.add_subparsers(dest="command", required=True)

    stage_help = {
        "ingest": "parse raw traces into the canonical clipped stream",
        "trips": "segment trajectories, detect stops, extract trips",
        "regions": "build the visit-density quad-tree and map events",
        "stats": "fit trip/stay distributions and grid correlation",
        "functions": "mine frequent itemsets and label regions",
        "dtn": "run the target-set delivery simulation",
        "all": "run every stage in order",
    }
    for name, text in stage_help.items():
        _add_stage_parser(sub, name, text)

    fx = sub.add_parser("fixture", help="write the bundled three-taxi demo fixture")
    fx.add_argument("--out", required=True, help="directory for trace + config")
    fx.set_defaults(stage=None)

    fit = sub.add_parser("fit", help="compare distribution fits on a sample file")
    fit.add_argument("samples", help="file with one positive value per line")
    fit.add_argument("--x-min", type=float, default=None,
                     help="lower cutoff for the power-law family (default: sample min)")
    fit.add_argument("--out-prefix", default=None,
                     help="also write PREFIX_fits.txt and PREFIX_ccdf.txt")
    fit.set_defaults(stage=None)
    return parser


def _cmd_stage(args: argparse.Namespace) -> int:
    overrides = list(args.stage_override)
    if args.out:
        overrides.append(("out_dir", args.out))
    cfg = pipeline.load_config(args.config, overrides)
    pipeline.run(cfg, args.stage)
    print(f"stage '{args.stage}' complete; artifacts in {cfg.out_dir}")
    return 0


def _cmd_fixture(args: argparse.Namespace) -> int:
    trace_path, config_path = fixtures.write_fixture(args.out)
    print(f"wrote {trace_path}\nwrote {config_path}")
    return 0


def _cmd_fit(args: argparse.Namespace) -> int:
    with open(args.samples, "r", encoding="utf-8") as fh:
        values = [float(line) for line in fh if line.strip()]
    cmp = stats.compare_models(stats.fit_all(values, args.x_min))
    print(stats.comparison_table(cmp))
    if args.out_prefix:
        with open(f"{args.out_prefix}_fits.txt", "w", encoding="utf-8") as fh:
            stats.write_comparison(cmp, fh)
        with open(f"{args.out_prefix}_ccdf.txt", "w", encoding="utf-8") as fh:
            stats.write_ccdf(stats.empirical_ccdf(values), fh)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "fixture":
            return _cmd_fixture(args)
        if args.command == "fit":
            return _cmd_fit(args)
        return _cmd_stage(args)
    except ConfigError as exc:
        print("config error:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return 2
    except MissingArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
