"""Command-line entry point: ingest, exclusions and run subcommands."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from shooting_resample.config import load_run_config
from shooting_resample.exceptions import ShootingResampleError
from shooting_resample.ingest import ingest_summary
from shooting_resample.models import MAX_SEED
from shooting_resample.pipeline import exclusion_summary, run_pipeline

logger = logging.getLogger("shooting_resample")

EXIT_OK = 0
EXIT_MISSING = 2
EXIT_SCHEMA = 3


def _seed(value: str) -> int:
    try:
        seed = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {value!r}") from None
    if not 0 <= seed <= MAX_SEED:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return seed


def _positive(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {value!r}") from None
    if number < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return number


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shooting-resample",
        description="Resampling tests of victim race in fatal police shootings.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="More logging (-v info, -vv debug)")
    commands = parser.add_subparsers(dest="command", required=True)

    ingest = commands.add_parser("ingest", help="Validate the fixture files and print row counts")
    ingest.add_argument("--fixtures", type=Path, default=Path("fixtures"), help="Fixture directory")

    exclusions = commands.add_parser("exclusions", help="Print per-stage exclusion counts for both weighting modes")
    exclusions.add_argument("--fixtures", type=Path, default=Path("fixtures"), help="Fixture directory")
    exclusions.add_argument("--seed", type=_seed, default=0, help="Master seed for multi-county city draws")
    exclusions.add_argument("--out", type=Path, default=None, help="Also write exclusions_<mode>.csv here")

    run = commands.add_parser("run", help="Run every configured experiment and write the output tree")
    run.add_argument("--config", type=Path, required=True, help="Key-value run configuration or a previous run.json")
    run.add_argument("--fixtures", type=Path, default=None, help="Override FIXTURE_DIR")
    run.add_argument("--out", type=Path, default=None, help="Override OUT_DIR")
    run.add_argument("--seed", type=_seed, default=None, help="Override MASTER_SEED")
    run.add_argument("--workers", type=_positive, default=None, help="Threads per experiment")
    return parser


def _configure_logging(verbose: int, default: str = "WARNING") -> None:
    if verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = getattr(logging, default.upper(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", force=True)


def cmd_ingest(fixture_dir: Path) -> int:
    """Print row counts and violations; exit 2 on missing files, 3 on violations."""
    summary = ingest_summary(fixture_dir)
    for entry in summary["datasets"]:
        rows = "invalid" if entry["rows"] is None else f"{entry['rows']} rows"
        print(f"{entry['name']}: {rows}")
    for file_name in summary["missing"]:
        print(f"missing: {fixture_dir / file_name}", file=sys.stderr)
    for violation in summary["violations"]:
        print(f"violation: {violation['error']}", file=sys.stderr)
    if summary["missing"]:
        return EXIT_MISSING
    if summary["violations"]:
        return EXIT_SCHEMA
    return EXIT_OK


def cmd_exclusions(fixture_dir: Path, seed: int = 0, out_dir: Optional[Path] = None) -> int:
    """Print the reconciliation from all incidents to each weighting mode's subset."""
    summary = exclusion_summary(fixture_dir, seed, out_dir)
    print(f"incidents: {summary['incidents']}")
    print(f"race known: {summary['race_known']}")
    print(f"linkage issues: {summary['linkage_issues']}")
    for mode, report in summary["modes"].items():
        print(f"{mode}: kept {report['kept']} of {report['input']}")
        for stage_name, count in report["by_stage"].items():
            print(f"  {stage_name}: {count}")
        counts = ", ".join(f"{race} {count}" for race, count in report["race_counts"].items())
        print(f"  races: {counts}")
    return EXIT_OK


def cmd_run(config_file: Path, fixtures: Optional[Path] = None, out: Optional[Path] = None,
            seed: Optional[int] = None, workers: Optional[int] = None, verbose: int = 0) -> int:
    """Run the configured experiments and print the p-value summary."""
    config = load_run_config(config_file).with_overrides(fixtures, out, seed, workers)
    if not verbose:
        _configure_logging(0, config.log_level)
    outcome = run_pipeline(config)
    print(f"wrote {outcome.out_dir}")
    print(outcome.summary_frame().to_string(float_format=lambda p: f"{p:.3f}"))
    if outcome.chi_square is not None:
        chi = outcome.chi_square
        print(f"chi-square {chi.statistic:.3f} on {chi.dof} dof, p = {chi.p_value:.3f}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        if args.command == "ingest":
            return cmd_ingest(args.fixtures)
        if args.command == "exclusions":
            return cmd_exclusions(args.fixtures, args.seed, args.out)
        return cmd_run(args.config, args.fixtures, args.out, args.seed, args.workers, args.verbose)
    except ShootingResampleError as exc:
        logger.debug("Failure detail", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
