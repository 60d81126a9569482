"""Command-line entry point: run / verify / sweep.

Exit codes: 0 success, 1 verification failures, 2 invalid configuration or
usage, 3 numeric failure mid-run (the step index is reported).
"""

import argparse
import json
import os
import sys

from .config import load_config
from .errors import ConfigError, NumericError
from .verify import SUITES, run_suites


def _output_dir(args_dir: str | None, config_dir: str | None) -> str | None:
    # precedence: CLI flag, then HVAWD_OUTPUT_DIR, then the config file
    return args_dir or os.environ.get("HVAWD_OUTPUT_DIR") or config_dir


def _cmd_run(args) -> int:
    from .runner import run

    config = load_config(args.config)
    outdir = _output_dir(args.output_dir, config.output_dir)
    summary = run(config, output_dir=outdir)
    print(
        f"steps={summary.steps} cumulative_loss={summary.final_cumulative_loss:.6g} "
        f"dynamic_regret={summary.dynamic_regret if summary.dynamic_regret is None else round(summary.dynamic_regret, 6)} "
        f"per_step_s={summary.wall_time_per_step_mean:.3e}",
        file=sys.stderr,
    )
    if outdir:
        print(outdir)
    return 0


def _cmd_verify(args) -> int:
    names = "all" if args.suite == "all" else [args.suite]
    try:
        report = run_suites(names)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    for name, suite in report["suites"].items():
        for check in suite["checks"]:
            status = "pass" if check["passed"] else "FAIL"
            print(
                f"[{status}] {name}/{check['check']}: observed {check['observed']:.3e} "
                f"(tolerance {check['tolerance']:.3e})",
                file=sys.stderr,
            )
    return 0 if report["passed"] else 1


def _cmd_sweep(args) -> int:
    from .sweep import sweep

    config = load_config(args.config)
    try:
        horizons = [int(h) for h in args.horizons.split(",") if h.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad horizons list: {exc}") from exc
    outdir = _output_dir(args.output_dir, config.output_dir)
    report = sweep(config, horizons, args.regime, output_dir=outdir, repeats=args.repeats)
    print(
        f"regime={report.regime} regret_slope={report.regret_slope:.4f} "
        f"time_slope={report.time_slope:.4f}",
        file=sys.stderr,
    )
    print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hvawd",
        description="Hierarchical discounted VAW online regression over random features",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one configured run")
    p_run.add_argument("--config", required=True, help="path to the JSON run config")
    p_run.add_argument("--output-dir", default=None, help="override the output directory")
    p_run.set_defaults(func=_cmd_run)

    p_verify = sub.add_parser("verify", help="run oracle verification suites")
    p_verify.add_argument(
        "--suite", default="all", help=f"one of: all, {', '.join(SUITES)}"
    )
    p_verify.add_argument("--out", default=None, help="also write the JSON report here")
    p_verify.set_defaults(func=_cmd_verify)

    p_sweep = sub.add_parser("sweep", help="regret/cost scaling over horizons")
    p_sweep.add_argument("--config", required=True, help="path to the JSON run config")
    p_sweep.add_argument("--horizons", required=True, help="comma-separated horizons (>= 3)")
    p_sweep.add_argument("--regime", required=True, help="constant, sqrt or linear")
    p_sweep.add_argument("--repeats", type=int, default=1, help="seeds averaged per horizon")
    p_sweep.add_argument("--output-dir", default=None, help="override the output directory")
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:  # ConfigError, ParseError, SchemaError, bad values
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
