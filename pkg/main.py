"""
Underwater emergency response simulator - Main Entry Point

Usage:
    python main.py all                         # every stage on the default generated scenario
    python main.py all --config data/default_run.json
    python main.py erm --output-dir runs/a     # ERM partition only
    python main.py deploy --output-dir runs/a  # reuses runs/a/partition.json
    python main.py mop --velocity-mode corrected --selection ratio
    python main.py plots --output-dir runs/a

Exit codes: 0 success, 1 simulator error, 2 invalid config, 3 missing stage
input, 4 stage failure, 5 I/O error.
"""
import argparse
import logging
import sys
from dataclasses import replace
from typing import List, Optional

import config
from entities import ScenarioConfig
from errors import UecnError
from pipeline import RunConfig, RunReport, STAGE_ORDER, load_run_config, run_pipeline

logger = logging.getLogger(__name__)

VERBS = ("generate", "erm", "rl", "deploy", "mop", "all", "plots")
IO_ERROR_EXIT = 5


def configure_logging(verbosity: int):
    level = {-1: logging.WARNING, 0: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def build_config(args: argparse.Namespace) -> RunConfig:
    """Run config file (or defaults), then command-line overrides."""
    if args.config:
        cfg = load_run_config(args.config)
    else:
        cfg = RunConfig(generate=ScenarioConfig())

    overrides = {"stages": STAGE_ORDER if args.verb == "all" else (args.verb,)}
    if args.scenario:
        overrides.update(scenario_path=args.scenario, generate=None)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.output_dir:
        overrides["output_dir"] = args.output_dir
    if args.velocity_mode:
        overrides["velocity_mode"] = args.velocity_mode
    if args.selection:
        overrides["selection"] = args.selection
    if args.methods is not None:
        overrides["methods"] = tuple(m for m in args.methods.split(",") if m)
    disabled = {m for m, off in (("qlearning", args.no_qlearning), ("sarsa", args.no_sarsa),
                                 ("dqn", args.no_dqn)) if off}
    if disabled:
        base = overrides.get("methods", cfg.methods)
        overrides["methods"] = tuple(m for m in base if m not in disabled)
    return replace(cfg, **overrides).validate()


def print_summary(report: RunReport):
    print("\n" + "=" * 60)
    print("Run Summary")
    print("=" * 60)
    print(f"  Output directory: {report.output_dir}")
    print(f"  Stages: {', '.join(report.stages)}")
    if report.partition_sizes:
        a, b, c = report.partition_sizes
        print(f"  ERM partition: |A|={a} direct, |B|={b} relayed, |C|={c} isolated")
    if report.rl_summary and report.rl_summary.get("methods"):
        print("  Mean relay reward (bits/s):")
        for method, value in report.rl_summary["methods"].items():
            print(f"    {method:<10} {value:.4e}")
        print(f"    {'best':<10} {report.rl_summary['best_of_methods']:.4e}")
        print(f"    {'nearest':<10} {report.rl_summary['nearest_relay_baseline']:.4e}")
    if report.deployment_summary:
        d = report.deployment_summary
        print(f"  Deployment: {d['n_auvs']} AUVs, makespan {d['makespan']:.4e} s, "
              f"energy {d['total_energy']:.4e} J, feasible={d['feasible']}")
    if report.front_summary:
        f = report.front_summary
        print(f"  Tradeoff archive: {f['archive_size']} points")
        if f["selected"]:
            sel = f["selected"]
            print(f"  Selected ({sel['rule']}): x1={sel['x1']} (deployed {sel['n_auvs']}), "
                  f"x2={sel['x2']:.4e} W, f1={sel['f1']:.4e} s, f2={sel['f2']:.4e} J")
        if f["benefit_percent"] is not None:
            print(f"  Makespan saving vs one AUV: {f['benefit_percent']:.1f}%")
    for notice in report.notices:
        print(f"  Notice: {notice}")
    for stage, seconds in report.timings.items():
        print(f"  {stage:<10} {seconds:.2f} s")
    print("=" * 60 + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Underwater emergency response simulator")
    parser.add_argument("verb", choices=VERBS, help="stage to run, or 'all'")
    parser.add_argument("--config", type=str, default=None, help="run config JSON file")
    parser.add_argument("--scenario", type=str, default=None,
                        help="scenario JSON file (replaces the config's scenario source)")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument("--output-dir", type=str, default=None,
                        help=f"artifact directory (default {config.OUTPUT_DIR})")
    parser.add_argument("--methods", type=str, default=None,
                        help="comma-separated relay-selection methods (qlearning,sarsa,dqn)")
    parser.add_argument("--no-qlearning", action="store_true")
    parser.add_argument("--no-sarsa", action="store_true")
    parser.add_argument("--no-dqn", action="store_true")
    parser.add_argument("--velocity-mode", choices=("budget", "corrected"), default=None)
    parser.add_argument("--selection", choices=("knee", "ratio"), default=None)
    parser.add_argument("-v", "--verbose", action="store_const", const=1, default=0,
                        dest="verbosity", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_const", const=-1, dest="verbosity",
                        help="warnings only")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point with command line argument parsing."""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbosity)
    try:
        report = run_pipeline(build_config(args))
    except UecnError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return IO_ERROR_EXIT
    print_summary(report)
    return 0


if __name__ == "__main__":
    sys.exit(main())
