"""``bench`` command line: run, transfer, plot.

Exit codes: 0 success, 1 a learning run failed (or an output could not be
written), 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import TRANSPORTS, ConfigError, default_config, load_config, with_overrides
from .runner import CONVERGED, FAILED, read_curves, run_benchmark, summary_from_dir, transfer_from_dir

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bench", description="Dial-turning learning benchmark.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run robots x runs learning experiments")
    run.add_argument("--config", type=Path, help="INI config (default: shipped defaults)")
    run.add_argument("--out", type=Path, required=True, help="output directory")
    run.add_argument("--seed", type=int, help="override seed_base")
    run.add_argument("--transport", choices=TRANSPORTS, help="direct env calls or the line protocol")
    run.add_argument("--robots", type=int, help="number of robot profiles")
    run.add_argument("--runs", type=int, help="runs per robot")
    run.add_argument("--no-plots", action="store_true", help="skip SVG output")

    tr = sub.add_parser("transfer", help="zero-shot transfer of converged means")
    tr.add_argument("--in", dest="indir", type=Path, required=True)

    pl = sub.add_parser("plot", help="redraw SVGs from the CSV files")
    pl.add_argument("--in", dest="indir", type=Path, required=True)
    return ap


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config) if args.config else default_config()
        cfg = with_overrides(cfg, seed=args.seed, transport=args.transport, robots=args.robots, runs=args.runs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        summary, results = run_benchmark(cfg, args.out, plots=not args.no_plots)
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    for s in summary.robots:
        print(f"robot {s.robot}: converged {s.converged}/{s.runs}  "
              f"final reward {s.final_reward_mean:.6f} +/- {s.final_reward_se:.2e} (SE)")
    print(f"cross-robot overlap: {'yes' if summary.all_overlap else 'no'}")
    total = sum(r.curve.status == CONVERGED for r in results)
    print(f"{total}/{len(results)} runs converged; outputs in {args.out}")
    failed = [r.curve for r in results if r.curve.status == FAILED]
    for c in failed:
        print(f"robot {c.robot} run {c.run} failed: {c.error}", file=sys.stderr)
    return EXIT_FAILED if failed else EXIT_OK


def _missing_results(indir: Path) -> bool:
    if (indir / "config.ini").is_file():
        return False
    print(f"no benchmark results in {indir}", file=sys.stderr)
    return True


def _cmd_transfer(args) -> int:
    if _missing_results(args.indir):
        return EXIT_FAILED
    try:
        entries = transfer_from_dir(args.indir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, KeyError, ValueError) as exc:
        print(f"cannot read benchmark in {args.indir}: {exc}", file=sys.stderr)
        return EXIT_FAILED
    ok = sum(e.success for e in entries)
    for e in entries:
        print(f"robot {e.source_robot} run {e.source_run} -> robot {e.target_robot}: "
              f"{'success' if e.success else 'FAIL'} ({e.final_angle:.2f} deg)")
    print(f"{ok}/{len(entries)} transfers succeeded")
    return EXIT_OK


def _cmd_plot(args) -> int:
    from .plots import emit_plots
    if _missing_results(args.indir):
        return EXIT_FAILED
    try:
        curves = read_curves(args.indir)
        if not curves:
            raise ValueError("no curve files")
        summary = summary_from_dir(args.indir)
        for p in emit_plots(curves, summary, args.indir):
            print(p)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"cannot plot {args.indir}: {exc}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    return {"run": _cmd_run, "transfer": _cmd_transfer, "plot": _cmd_plot}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
