"""
Command-line interface.

Examples:
    Full run from a configuration document::

        omtherm pipeline --config run.json --seed 7 --out results/

    Stages one at a time::

        omtherm simulate --config run.json
        omtherm analyze --config run.json
        omtherm calibrate --config run.json
        omtherm metrics --config run.json

    Cavity linewidth from a wavelength scan::

        omtherm scan-fit scan.csv --out results/

Exit status: 0 success, 2 usage, 3 validation, 4 fit, 5 I/O or format,
6 resource limit, 7 missing dependency.
"""

from pathlib import Path
from typing import Optional, Sequence
import argparse
import json
import logging

from omtherm import __version__
from omtherm.config import RunConfig
from omtherm.exceptions import OmthermError
from omtherm.pipeline import (
    run_analyze,
    run_calibrate,
    run_metrics,
    run_pipeline,
    run_scan_fit,
    run_simulate,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 5


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="Run configuration (JSON).")
    common.add_argument("--seed", type=int, default=None, help="Override the configured seed.")
    common.add_argument("--out", type=Path, default=None, help="Override the output directory.")
    common.add_argument(
        "--threads", type=int, default=None, help="Worker threads (affects speed only)."
    )
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging.")
    return common


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with one subcommand per pipeline stage."""
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="omtherm",
        description="Pulsed heterodyne thermometry of a GHz mechanical mode.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    sub.add_parser("simulate", parents=[common], help="Synthesize trace ensembles.")
    analyze = sub.add_parser("analyze", parents=[common], help="Peak areas and heating fits.")
    analyze.add_argument(
        "traces", nargs="*", type=Path, help="Trace files (default: all under <out>/traces)."
    )
    sub.add_parser("calibrate", parents=[common], help="Noise budget and occupancy fit.")
    sub.add_parser("metrics", parents=[common], help="Cooperativities and added noise.")
    pipeline = sub.add_parser("pipeline", parents=[common], help="Run every stage.")
    pipeline.add_argument(
        "--plots", action="store_true", help="Also save figures (needs matplotlib)."
    )
    scan = sub.add_parser("scan-fit", parents=[common], help="Fit a cavity transmission scan.")
    scan.add_argument("scan", type=Path, help="Columns: wavelength in nm, transmission.")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    """Configuration document with command-line overrides applied."""
    config = RunConfig.from_json(args.config) if args.config else RunConfig.from_dict({})
    return config.with_overrides(seed=args.seed, threads=args.threads, out=args.out)


def _dispatch(args: argparse.Namespace, config: RunConfig) -> dict:
    if args.command == "simulate":
        paths = run_simulate(config)
        return {"traces": [str(p) for p in paths]}
    if args.command == "analyze":
        return run_analyze(config, args.traces or None)
    if args.command == "calibrate":
        return run_calibrate(config)
    if args.command == "metrics":
        return run_metrics(config)
    if args.command == "pipeline":
        report = run_pipeline(config)
        if args.plots:
            from omtherm.visualization.plots import save_report_figures

            figures = save_report_figures(config.output_dir)
            report = dict(report, figures=[str(p) for p in figures])
        return report
    return run_scan_fit(config, args.scan)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)-8s %(message)s",
    )

    try:
        config = load_config(args)
        result = _dispatch(args, config)
    except OmthermError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        logger.error("malformed JSON input: %s", exc)
        return EXIT_IO

    if args.command == "metrics":
        print(json.dumps(result["figures_of_merit"], indent=2, sort_keys=True, default=str))
    logger.info("%s finished (config %s, seed %d)", args.command, config.hash[:12], config.seed)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
