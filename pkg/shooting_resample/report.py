"""Expected totals, kernel density estimates and the plot-ready output tables."""

import json
import logging
import os
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from shooting_resample.demography import distributions_frame
from shooting_resample.engine import SimulationResult
from shooting_resample.exceptions import InferenceError, ReportError
from shooting_resample.models import (
    RACES,
    ChiSquareResult,
    DensityEstimate,
    Race,
    RaceDistribution,
    SimulationConfig,
    TestReport,
)

logger = logging.getLogger(__name__)

MIN_GRID_POINTS = 512


def round_half_away(values) -> np.ndarray:
    """Round to the nearest integer, halves away from zero."""
    values = np.asarray(values, dtype=float)
    return (np.sign(values) * np.floor(np.abs(values) + 0.5)).astype(np.int64)


def expected_totals(result: SimulationResult) -> dict[Race, int]:
    """Mean resampled total per race, rounded."""
    if result.n_replications == 0:
        raise ReportError(f"{result.label}: no replications")
    rounded = round_half_away(result.counts.mean(axis=0))
    return {race: int(value) for race, value in zip(RACES, rounded)}


def silverman_bandwidth(samples: np.ndarray) -> float:
    """0.9 * min(sd, IQR/1.34) * n^(-1/5); the IQR term is skipped when it is zero."""
    sd = float(samples.std(ddof=1))
    q75, q25 = np.percentile(samples, [75, 25])
    iqr = float(q75 - q25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * samples.size ** -0.2


def kde(samples: Sequence[float], grid_points: int = MIN_GRID_POINTS, race: Optional[Race] = None) -> DensityEstimate:
    """Gaussian kernel density estimate on an evenly spaced grid.

    The grid spans three bandwidths beyond the smallest and largest sample.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise InferenceError("density estimate needs at least two samples")
    if float(x.std(ddof=1)) == 0.0:
        raise InferenceError("density estimate undefined: samples have zero variance")
    if grid_points < MIN_GRID_POINTS:
        raise ReportError(f"density grid needs at least {MIN_GRID_POINTS} points, got {grid_points}")

    h = silverman_bandwidth(x)
    grid = np.linspace(x.min() - 3 * h, x.max() + 3 * h, grid_points)
    z = (grid[:, None] - x[None, :]) / h
    density = np.exp(-0.5 * z ** 2).sum(axis=1) / (x.size * h * np.sqrt(2 * np.pi))
    return DensityEstimate(race=race, grid=grid.tolist(), density=density.tolist(), bandwidth=h)


# ============================================================================
# TABLES
# ============================================================================

def observed_proportions(
    observed: Mapping[Race, int],
    population: Optional[Mapping[Race, float]] = None,
) -> pd.DataFrame:
    """Observed victims per race and their share of all race-known victims.

    With ``population`` the pooled population share of each race is added
    alongside, for the victims-against-population bar chart.
    """
    total = sum(observed.get(race, 0) for race in RACES)
    frame = pd.DataFrame(
        {
            "race": [race.code for race in RACES],
            "observed": [observed.get(race, 0) for race in RACES],
            "proportion": [observed.get(race, 0) / total if total else 0.0 for race in RACES],
        }
    )
    if population is not None:
        frame["population_share"] = [population.get(race, 0.0) for race in RACES]
    return frame


def bars_frame(report: TestReport) -> pd.DataFrame:
    """Observed against expected totals for one experiment."""
    return pd.DataFrame(
        [(row.race.code, row.observed, row.expected_total, row.mean) for row in report.rows],
        columns=["race", "observed", "expected", "mean"],
    )


def race_table(reports: Sequence[TestReport], field: str) -> pd.DataFrame:
    """One column per experiment, one row per race, holding a TestReport row field."""
    frame = pd.DataFrame({"race": [race.code for race in RACES]})
    for report in reports:
        frame[report.label] = [getattr(report.row(race), field) for race in RACES]
    return frame


def tests_frame(reports: Sequence[TestReport]) -> pd.DataFrame:
    records = []
    for report in reports:
        for row in report.rows:
            record = {"label": report.label, "n_replications": report.n_replications}
            record.update(row.model_dump(mode="json"))
            record["race"] = row.race.code
            records.append(record)
    return pd.DataFrame(records)


def density_frame(result: SimulationResult, report: Optional[TestReport], grid_points: int) -> pd.DataFrame:
    """Long table of density curves per race with the observed total as a marker."""
    parts = []
    for race in RACES:
        try:
            estimate = kde(result.column(race), grid_points, race)
        except InferenceError as exc:
            logger.debug("%s/%s: no density (%s)", result.label, race.value, exc)
            continue
        observed = report.row(race).observed if report is not None else None
        parts.append(pd.DataFrame({
            "race": race.code,
            "x": estimate.grid,
            "density": estimate.density,
            "bandwidth": estimate.bandwidth,
            "observed": observed,
        }))
    if not parts:
        return pd.DataFrame(columns=["race", "x", "density", "bandwidth", "observed"])
    return pd.concat(parts, ignore_index=True)


def chi_square_frames(result: ChiSquareResult) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Test summary and the observed/expected contingency table."""
    summary = pd.DataFrame([{"statistic": result.statistic, "dof": result.dof, "p_value": result.p_value}])
    records = []
    for index, (observed, expected) in enumerate(zip(result.observed, result.expected)):
        stratum = "camera" if index == 0 else "no_camera"
        records.append({"stratum": stratum, "kind": "observed", **dict(zip((r.value for r in RACES), observed))})
        records.append({"stratum": stratum, "kind": "expected", **dict(zip((r.value for r in RACES), expected))})
    return summary, pd.DataFrame(records)


# ============================================================================
# EMISSION
# ============================================================================

def _write_csv(frame: pd.DataFrame, path: Path, written: list[Path]) -> None:
    try:
        frame.to_csv(path, index=False, lineterminator="\n")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc
    written.append(path)


def _write_json(payload, path: Path, written: list[Path]) -> None:
    try:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc
    written.append(path)


def emit_figures(
    results: Mapping[str, SimulationResult],
    reports: Mapping[str, TestReport],
    out_dir: Union[str, os.PathLike],
    *,
    chi_square: Optional[ChiSquareResult] = None,
    observed: Optional[Mapping[Race, int]] = None,
    population_shares: Optional[Mapping[Race, float]] = None,
    distributions: Sequence[RaceDistribution] = (),
    other_share: Optional[pd.DataFrame] = None,
    exclusions: Optional[Mapping[str, pd.DataFrame]] = None,
    correlations: Optional[dict] = None,
    grid_points: int = MIN_GRID_POINTS,
) -> list[Path]:
    """Write every table, density curve and bar-chart file for a run.

    Layout under ``out_dir``: ``tables/`` for p-value, SD-distance,
    randomization, chi-square and audit tables; ``densities/`` for one
    density file per experiment; ``figures/`` for bar-chart data.

    Returns:
        Paths written, in write order

    Raises:
        ReportError: nothing to report, or a file could not be written
    """
    if not results and not reports:
        raise ReportError("nothing to report")

    root = Path(out_dir)
    tables, densities, figures = root / "tables", root / "densities", root / "figures"
    try:
        for directory in (tables, densities, figures):
            directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportError(f"cannot create {exc.filename}: {exc}") from exc

    written: list[Path] = []
    experiment_reports = [
        reports[label] for label in reports
        if isinstance(results.get(label), SimulationResult) and isinstance(results[label].config, SimulationConfig)
    ]
    experiment_labels = {report.label for report in experiment_reports}
    other_reports = [report for report in reports.values() if report.label not in experiment_labels]

    if reports:
        _write_csv(tests_frame(list(reports.values())), tables / "tests.csv", written)
        _write_json([r.model_dump(mode="json") for r in reports.values()], tables / "tests.json", written)

    modes = []
    for report in experiment_reports:
        mode = results[report.label].config.mode
        if mode not in modes:
            modes.append(mode)
    for mode in modes:
        group = [r for r in experiment_reports if results[r.label].config.mode == mode]
        _write_csv(race_table(group, "p_unbiased"), tables / f"pvalues_{mode.value}.csv", written)
        _write_csv(race_table(group, "p_biased"), tables / f"pvalues_biased_{mode.value}.csv", written)
    if experiment_reports:
        _write_csv(race_table(experiment_reports, "sd_distance"), tables / "sd_distance.csv", written)

    for report in other_reports:
        columns = ["observed", "mean", "p_unbiased", "p_biased", "se_bound"]
        frame = pd.DataFrame(
            [[row.race.code] + [getattr(row, c) for c in columns] for row in report.rows],
            columns=["race"] + columns,
        )
        _write_csv(frame, tables / f"randomization_{report.label}.csv", written)

    if chi_square is not None:
        summary, contingency = chi_square_frames(chi_square)
        _write_csv(summary, tables / "chi_square.csv", written)
        _write_csv(contingency, tables / "contingency.csv", written)

    if distributions:
        _write_csv(distributions_frame(distributions), tables / "distributions.csv", written)
    if other_share is not None:
        _write_csv(other_share, tables / "census_other.csv", written)
    for name, frame in (exclusions or {}).items():
        _write_csv(frame, tables / f"exclusions_{name}.csv", written)
    if correlations is not None:
        _write_json(correlations, tables / "correlations.json", written)

    if observed is not None:
        _write_csv(observed_proportions(observed, population_shares), figures / "observed_proportions.csv", written)
    for label, report in reports.items():
        _write_csv(bars_frame(report), figures / f"bars_{label}.csv", written)
    for label, result in results.items():
        _write_csv(density_frame(result, reports.get(label), grid_points), densities / f"{label}.csv", written)

    logger.info("Wrote %d report files under %s", len(written), root)
    return written
