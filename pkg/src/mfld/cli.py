"""Command-line entry point for the benchmark experiments.

Subcommands mirror the experiments: quantize | teach | pro | mfg |
thin-bench, plus `aggregate` for seed summaries.  Flags override keys of
the optional `key = value` config file.
"""

import argparse
import sys

from . import harness


def _add_run_parser(sub, name: str, help_text: str) -> None:
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--config", help="path to a key = value config file")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--seeds", help="seed list: 'a..b', 'a,b,c', or a single integer")
    p.add_argument("--method", choices=harness.METHODS, help="interaction method")
    p.add_argument("--n", type=int, help="particle count")
    p.add_argument("--g", type=int, help="oversampling exponent")
    p.add_argument("--t", type=int, help="iterations (sweeps for mfg)")
    p.add_argument("--record-every", type=int, dest="record_every", help="recording stride")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="extra dotted config overrides")
    p.add_argument("--append", action="store_true", help="append to an existing CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfld", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_parser(sub, "quantize", "Gaussian-mixture quantization under squared MMD")
    _add_run_parser(sub, "teach", "online student-teacher two-layer network")
    _add_run_parser(sub, "pro", "predictive posterior for the Lotka-Volterra model")
    _add_run_parser(sub, "mfg", "mean-field game forward-backward sweeps")
    _add_run_parser(sub, "thin-bench", "coreset integration-error benchmark")

    agg = sub.add_parser("aggregate", help="summarise a run CSV over seeds")
    agg.add_argument("--csv", required=True, help="input run CSV")
    agg.add_argument("--out", required=True, help="output summary CSV")
    agg.add_argument("--group", default="experiment,method,N,g,metric_name,iteration", help="comma-separated group keys")
    return parser


def _run_config(args) -> harness.ExperimentConfig:
    options = {}
    if args.config:
        options.update(harness.load_config_file(args.config))
    options["experiment"] = args.command
    for flag in ("out", "seeds", "method", "n", "g", "t", "record_every"):
        value = getattr(args, flag)
        if value is not None:
            options[flag] = str(value)
    for item in args.set:
        if "=" not in item:
            raise harness.ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        options[key.strip()] = value.strip()
    return harness.config_from_options(options)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "aggregate":
            rows = harness.read_rows(args.csv)
            summary = harness.aggregate(rows, group_keys=tuple(args.group.split(",")))
            harness.write_aggregate(args.out, summary)
            print(f"wrote {len(summary)} summary rows to {args.out}")
            return 0
        cfg = _run_config(args)
        path = harness.run_experiment(cfg, append=args.append)
        print(f"wrote {path}")
        return 0
    except harness.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
