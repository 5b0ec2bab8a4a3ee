"""Stage orchestration: ingest, link, simulate, test, report."""

import json
import logging
import os
import shutil
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Union

import numpy as np
import pandas as pd

from shooting_resample import __version__
from shooting_resample.config import RunConfig
from shooting_resample.demography import build_distributions, other_share_summary, pooled_population_shares
from shooting_resample.engine import (
    SimulationResult,
    bodycam_config,
    derive_seed,
    eligible_counties,
    run_bodycam,
    run_fixed,
    run_random,
)
from shooting_resample.exceptions import InferenceError, StageError
from shooting_resample.inference import build_test_report, chi_square, employment_correlations
from shooting_resample.ingest import FixtureSet, load_fixtures
from shooting_resample.linkage import (
    IncidentSubset,
    LinkageResult,
    ProfileTable,
    bodycam_table,
    build_city_map,
    build_profiles,
    link_incidents,
    observed_counts,
    subset_incidents,
)
from shooting_resample.models import RACES, ChiSquareResult, LocationMode, TestReport, Vintage, WeightingMode
from shooting_resample.report import emit_figures

logger = logging.getLogger(__name__)

CITY_STREAM = "city-resolution"


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Tag any failure inside the block with the stage name."""
    logger.info("Stage %s", name)
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


@dataclass
class LinkedData:
    fixtures: FixtureSet
    profiles: ProfileTable
    linkage: LinkageResult
    subsets: dict[WeightingMode, IncidentSubset] = field(default_factory=dict)


def link_fixtures(fixtures: FixtureSet, master_seed: int) -> LinkedData:
    """Build profiles, resolve incident locations and cut both weighting-mode subsets."""
    profiles = build_profiles(fixtures.demography, fixtures.lee, fixtures.arrests, fixtures.codes)
    city_map = build_city_map(fixtures.cities or [])
    rng_seed = derive_seed(master_seed, CITY_STREAM)
    linkage = link_incidents(
        fixtures.shootings,
        city_map,
        np.random.default_rng(rng_seed),
        profiles.populations(Vintage.CENSUS_2010),
    )
    data = LinkedData(fixtures=fixtures, profiles=profiles, linkage=linkage)
    for mode in WeightingMode:
        data.subsets[mode] = subset_incidents(linkage, profiles, mode)
    return data


def exclusion_summary(
    fixture_dir: Union[str, os.PathLike],
    master_seed: int = 0,
    out_dir: Optional[Union[str, os.PathLike]] = None,
) -> dict:
    """Per-stage exclusion accounting for both weighting modes.

    When ``out_dir`` is given the exclusion report of each mode is also
    written there as ``exclusions_<mode>.csv``, and the rows that could not
    be joined while building county profiles as ``linkage_issues.csv``.
    """
    with stage("ingest"):
        fixtures = load_fixtures(fixture_dir)
    with stage("link"):
        data = link_fixtures(fixtures, master_seed)
    if out_dir is not None:
        with stage("report"):
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            for mode, subset in data.subsets.items():
                subset.write_csv(Path(out_dir) / f"exclusions_{mode.value}.csv")
            data.profiles.write_issues(Path(out_dir) / "linkage_issues.csv")
    return {
        "incidents": len(fixtures.shootings),
        "race_known": sum(1 for row in fixtures.shootings if row.race is not None),
        "modes": {mode.value: subset.summary() for mode, subset in data.subsets.items()},
        "linkage_issues": len(data.profiles.issues),
    }


@dataclass
class RunOutcome:
    """What a run produced; the files live under ``out_dir``."""
    out_dir: Path
    results: dict[str, SimulationResult]
    reports: dict[str, TestReport]
    chi_square: Optional[ChiSquareResult] = None

    def summary_frame(self) -> pd.DataFrame:
        """p-values per race (rows) and experiment (columns)."""
        frame = pd.DataFrame({"race": [race.value for race in RACES]})
        for label, report in self.reports.items():
            frame[label] = [report.row(race).p_unbiased for race in RACES]
        return frame.set_index("race")


def _simulate(config: RunConfig, data: LinkedData) -> tuple[dict, dict]:
    results: dict[str, SimulationResult] = {}
    reports: dict[str, TestReport] = {}
    for experiment in config.experiments:
        subset = data.subsets[experiment.mode]
        with stage(f"simulate:{experiment.label}"):
            if experiment.location == LocationMode.FIXED:
                result = run_fixed(subset.kept, data.profiles, experiment, config.workers)
            else:
                result = run_random(len(subset.kept), data.profiles, experiment, config.workers)
        with stage(f"test:{experiment.label}"):
            reports[experiment.label] = build_test_report(
                result, observed_counts(subset.kept), config.alpha, config.family_size, config.ties,
            )
        results[experiment.label] = result
    return results, reports


def _distributions(config: RunConfig, data: LinkedData) -> list:
    distributions = {}
    for experiment in config.experiments:
        if experiment.location == LocationMode.FIXED:
            counties = [item.county for item in data.subsets[experiment.mode].kept]
        else:
            counties = eligible_counties(data.profiles, experiment)[0]
        built = build_distributions(data.profiles, counties, experiment.mode, experiment.vintage)
        for county, dist in built.items():
            distributions[(experiment.mode, experiment.vintage, county)] = dist
    return list(distributions.values())


def _exclusion_summary_frame(data: LinkedData) -> pd.DataFrame:
    records = []
    for subset in data.subsets.values():
        summary = subset.summary()
        records.append({key: summary[key] for key in ("mode", "input", "kept", "excluded")})
    return pd.DataFrame(records, columns=["mode", "input", "kept", "excluded"])


def _write_run_json(config: RunConfig, fixtures: FixtureSet, path: Path) -> None:
    payload = {
        "version": __version__,
        "config": config.model_dump(mode="json", exclude={"out_dir", "workers"}),
        "checksums": dict(sorted(fixtures.checksums.items())),
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def run_pipeline(config: RunConfig) -> RunOutcome:
    """Execute every configured experiment and write the output tree.

    Outputs are assembled in a sibling temporary directory that replaces
    ``config.out_dir`` only once every stage has succeeded; on failure the
    temporary directory is removed and any previous output is left as it was.

    Raises:
        StageError: a stage failed; carries the stage name and the cause's exit code
    """
    out_dir = Path(config.out_dir)
    with stage("report"):
        out_dir.parent.mkdir(parents=True, exist_ok=True)
        staging = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}-", dir=out_dir.parent))
    try:
        with stage("ingest"):
            fixtures = load_fixtures(config.fixture_dir)
        with stage("link"):
            data = link_fixtures(fixtures, config.master_seed)

        results, reports = _simulate(config, data)

        chi = None
        if config.bodycam is not None:
            table = bodycam_table(fixtures.shootings)
            with stage("simulate:bodycam"):
                bodycam = bodycam_config(table, config.bodycam.replications, config.master_seed)
                result = run_bodycam(bodycam, config.workers)
            with stage("test:bodycam"):
                observed = {race: int(table[0, i]) for i, race in enumerate(RACES)}
                reports[result.label] = build_test_report(
                    result, observed, config.alpha, config.family_size, config.ties,
                )
                chi = chi_square(table)
            results[result.label] = result

        with stage("report"):
            simulations = staging / "simulations"
            simulations.mkdir()
            for result in results.values():
                result.write(simulations)
            try:
                correlations = employment_correlations(data.profiles)
            except InferenceError as exc:
                logger.warning("Employment correlations skipped: %s", exc)
                correlations = None
            race_known = [row for row in fixtures.shootings if row.race is not None]
            emit_figures(
                results,
                reports,
                staging,
                chi_square=chi,
                observed={race: sum(1 for row in race_known if row.race == race) for race in RACES},
                population_shares=pooled_population_shares(data.profiles),
                distributions=_distributions(config, data),
                other_share=other_share_summary(data.profiles),
                exclusions={mode.value: subset.to_frame() for mode, subset in data.subsets.items()},
                correlations=correlations,
                grid_points=config.kde_grid_points,
            )
            _exclusion_summary_frame(data).to_csv(
                staging / "tables" / "exclusion_summary.csv", index=False, lineterminator="\n",
            )
            data.profiles.write_issues(staging / "tables" / "linkage_issues.csv")
            _write_run_json(config, fixtures, staging / "run.json")

            if out_dir.exists():
                shutil.rmtree(out_dir)
            staging.rename(out_dir)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise

    logger.info("Run complete: %d experiments written to %s", len(results), out_dir)
    return RunOutcome(out_dir=out_dir, results=results, reports=reports, chi_square=chi)
