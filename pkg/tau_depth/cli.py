"""
Command-line interface: ``tau-depth simulate | estimate | evaluate | plot``.

Exit status: 0 on success, 2 on invalid input (files, configuration,
scenario), 3 when tracking was lost (partial output is written first),
1 on any other pipeline failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from tau_depth import __version__
from tau_depth.config import load_config
from tau_depth.core import Trajectory, TrajectoryFrame
from tau_depth.dataset import load_dataset, read_trajectory, write_dataset
from tau_depth.errors import DatasetError, InputError, TauDepthError, TrackingLostError
from tau_depth.evaluation import evaluate_sequence
from tau_depth.output import write_errors, write_table
from tau_depth.pipeline import DepthEstimator
from tau_depth.plotting import plot_csvs
from tau_depth.simulation import bundled_scenarios, load_scenario
from tau_depth.utils.validation import validate_dataset

logger = logging.getLogger("tau_depth")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT = 2
EXIT_TRACKING_LOST = 3

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _configure_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)


def cmd_simulate(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    sequence = scenario.run(workers=args.workers)
    write_dataset(args.out_dir, sequence, scenario.to_dict())
    print(f"{scenario.name}: {len(sequence.frames)} frames written to {args.out_dir}")
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace) -> int:
    config = load_config(
        args.config,
        window_s=args.window,
        fusion_rate_hz=args.rate,
        gate_threshold=args.gate,
        observer_l1=args.l1,
        observer_l2=args.l2,
        patch_size=args.patch_size,
        sample_count=args.samples,
        decimate_hz=args.decimate,
        gyro_bias_interval_s=args.gyro_bias_interval,
        median_filter=True if args.median_filter else None,
        seed=args.seed,
    )
    dataset = load_dataset(args.dataset)
    report = validate_dataset(dataset, config)
    for warning in report.warnings:
        logger.warning("%s", warning)
    if not report.is_valid:
        raise DatasetError("; ".join(report.errors))

    estimator = DepthEstimator(config, oracle_foc=args.oracle_foc,
                               center=tuple(args.center) if args.center else None)
    result = estimator.estimate(dataset)
    result.write(args.out_traj, args.diagnostics)
    print(f"{len(result.trajectory)} estimates written to {args.out_traj}")

    if result.failure is not None:
        logger.error("estimation stopped early: %s", result.failure)
        if isinstance(result.failure, TrackingLostError):
            return EXIT_TRACKING_LOST
        return EXIT_FAILURE
    return EXIT_OK


def _estimate_names(paths: Sequence[str]) -> List[str]:
    names: List[str] = []
    for path in paths:
        name = Path(path).stem
        candidate, k = name, 2
        while candidate in names:
            candidate = f"{name}-{k}"
            k += 1
        names.append(candidate)
    return names


def cmd_evaluate(args: argparse.Namespace) -> int:
    truth = read_trajectory(args.truth, TrajectoryFrame.GROUND_TRUTH)
    estimates: Dict[str, Trajectory] = {
        name: read_trajectory(path)
        for name, path in zip(_estimate_names(args.estimates), args.estimates)
    }
    report = evaluate_sequence(truth, estimates, align=not args.no_align)

    for label, value in report.to_rows():
        print(f"{label:<24} {value:10.2f}")
    if args.errors:
        write_errors(args.errors, report)
    if args.table:
        sequence = args.name or Path(args.truth).resolve().parent.name
        write_table({sequence: report}, args.table)
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    plot_csvs(args.out_svg, args.csvs, args.title)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tau-depth",
        description="Depth of a fixated scene point from a camera and an IMU.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render a synthetic dataset from a scenario")
    p.add_argument("scenario",
                   help=f"scenario JSON file or bundled name ({', '.join(bundled_scenarios())})")
    p.add_argument("out_dir", help="output dataset directory")
    p.add_argument("--workers", type=int, default=None, help="rendering threads")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate the fixated-point trajectory of a dataset")
    p.add_argument("dataset", help="dataset directory")
    p.add_argument("out_traj", help="output trajectory CSV (t_ns,x,y,z)")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--oracle-foc", action="store_true",
                   help="use the simulator's exact frequency-of-contact instead of tracking")
    p.add_argument("--decimate", type=float, metavar="HZ", help="tracker output rate")
    p.add_argument("--diagnostics", metavar="CSV", help="per-window diagnostics CSV")
    p.add_argument("--window", type=float, metavar="S", help="solver window length")
    p.add_argument("--rate", type=float, metavar="HZ", help="fusion rate")
    p.add_argument("--gate", type=float, metavar="M_S2", help="excitation gating threshold")
    p.add_argument("--l1", type=float, help="observer depth gain")
    p.add_argument("--l2", type=float, help="observer depth-rate gain")
    p.add_argument("--patch-size", type=int, metavar="PX", help="template side length")
    p.add_argument("--samples", type=int, help="template pixels kept")
    p.add_argument("--center", type=float, nargs=2, metavar=("U", "V"),
                   help="patch centre in first-frame pixels")
    p.add_argument("--median-filter", action="store_true", help="median-of-3 on the affine flow")
    p.add_argument("--gyro-bias-interval", type=float, metavar="S",
                   help="initial stationary interval used to estimate the gyro bias")
    p.add_argument("--seed", type=int, help="template subsampling seed")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("evaluate", help="ATE of estimates against ground truth")
    p.add_argument("truth", help="ground-truth trajectory CSV")
    p.add_argument("estimates", nargs="+", help="estimated trajectory CSV(s)")
    p.add_argument("--errors", metavar="CSV", help="per-sample l2 error CSV")
    p.add_argument("--table", metavar="CSV|XLSX", help="per-sequence table")
    p.add_argument("--name", help="sequence name in the table (default: truth directory)")
    p.add_argument("--no-align", action="store_true", help="skip rigid alignment")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("plot", help="SVG line plot of error or trajectory CSVs")
    p.add_argument("out_svg", help="output SVG file")
    p.add_argument("csvs", nargs="+", help="input CSV files")
    p.add_argument("--title", help="figure title")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose, args.quiet)
    try:
        return args.func(args)
    except InputError as err:
        logger.error("%s", err)
        return EXIT_INPUT
    except TrackingLostError as err:
        logger.error("%s", err)
        return EXIT_TRACKING_LOST
    except TauDepthError as err:
        logger.error("%s", err)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
