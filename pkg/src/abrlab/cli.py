"""Command-line entry point.

Exit codes: 0 on success, 1 on validation/usage problems (bad config, bad
trace file, bad flags), 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .errors import AbrLabError, ValidationError
from .harness import SCENARIOS, emit_plot_data, load_config, run_experiment
from .trace import BandwidthProfile, generate_synthetic, load_trace, save_trace


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the CLI contract wants usage text + 1
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="abrlab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"abrlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="execute an experiment config")
    run.add_argument("--config", required=True, help="TOML experiment file")
    run.add_argument("--scenario", choices=SCENARIOS, help="override the scenario")
    run.add_argument(
        "--seed", type=int, action="append", dest="seeds",
        help="override the seed list (repeatable)",
    )
    run.add_argument("--output", help="override the output directory")

    trace = sub.add_parser("trace", help="bandwidth trace utilities")
    trace_sub = trace.add_subparsers(dest="trace_command", required=True,
                                     parser_class=_Parser)
    gen = trace_sub.add_parser("gen", help="generate a synthetic trace file")
    gen.add_argument("--name", default="synthetic")
    gen.add_argument("--mean", type=float, required=True, help="mean speed (Mbps)")
    gen.add_argument("--jitter", type=float, default=0.15)
    gen.add_argument("--period", type=float, default=1.0, help="sample period (s)")
    gen.add_argument("--duration", type=float, required=True, help="trace length (s)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output CSV path")
    val = trace_sub.add_parser("validate", help="parse and check a trace file")
    val.add_argument("path")

    plot = sub.add_parser("plotdata", help="emit tidy plot CSVs for a run directory")
    plot.add_argument("run_dir")

    check = sub.add_parser("validate-config", help="parse and validate a config file")
    check.add_argument("path")
    return parser


def cli(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.command == "run":
            cfg = load_config(
                args.config,
                scenario_override=args.scenario,
                seeds_override=args.seeds,
                output_dir_override=args.output,
            )
            summary = run_experiment(cfg)
            print(f"run complete: {summary.run_dir}")
            iqm = summary.final_window_iqm_qoe
            if iqm is not None:
                print(f"final-window IQM QoE: {iqm:.4f}")
            return 0

        if args.command == "trace":
            if args.trace_command == "gen":
                profile = BandwidthProfile(
                    name=args.name,
                    mean_mbps=args.mean,
                    jitter_fraction=args.jitter,
                    sample_period_s=args.period,
                )
                trace = generate_synthetic(profile, args.duration, args.seed)
                save_trace(trace, args.out)
                print(f"wrote {len(trace)} samples to {args.out}")
                return 0
            trace = load_trace(args.path)
            print(
                f"{args.path}: {len(trace)} samples, duration {trace.duration_s} s, "
                f"mean {trace.speeds_mbps.mean():.3f} Mbps"
            )
            return 0

        if args.command == "plotdata":
            plot_dir = emit_plot_data(Path(args.run_dir))
            print(f"plot data written to {plot_dir}")
            return 0

        if args.command == "validate-config":
            cfg = load_config(args.path)
            print(
                f"{args.path}: ok (scenario {cfg.scenario}, "
                f"{len(cfg.seeds)} seeds, {cfg.total_updates} updates)"
            )
            return 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AbrLabError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


def main() -> None:
    raise SystemExit(cli())
