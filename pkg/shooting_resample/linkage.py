"""County-name canonicalization, city resolution and the join of all county tables."""

import logging
import os
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from shooting_resample.exceptions import CanonicalizationError, UnmappedCityError
from shooting_resample.geography import (
    ARREST_UNREPORTED_STATES,
    COUNTY_SUFFIXES,
    INCIDENT_LOCATION_OVERRIDES,
    WILDCARD_STATE,
    get_rename_index,
    lee_exclusion,
    normalize_state,
)
from shooting_resample.ingest import transliterate
from shooting_resample.models import (
    ARREST_RACES,
    RACES,
    CountyKey,
    CountyProfile,
    RawArrestRow,
    RawCityRow,
    RawCodeRow,
    RawDemographyRow,
    RawLeeRow,
    RawShootingRow,
    Race,
    ResolvedIncident,
    Resolution,
    Vintage,
    WeightingMode,
)

logger = logging.getLogger(__name__)

_SUFFIX = re.compile(
    r"\s+(?:" + "|".join(re.escape(suffix) for suffix in COUNTY_SUFFIXES) + r")$",
    re.IGNORECASE,
)

CityKey = tuple[str, str]
CityMap = Mapping[CityKey, tuple[CountyKey, ...]]


def canonicalize(state: str, raw_name: str) -> CountyKey:
    """Canonical join key for a county name.

    Transliterates to ASCII, collapses whitespace, strips County/Parish/
    Police Department suffixes, title-cases single-case names and finally
    applies the rename table. Idempotent.
    """
    try:
        code = normalize_state(state)
    except ValueError as exc:
        raise CanonicalizationError(str(exc)) from None
    name = " ".join(transliterate(raw_name or "").split())
    if not name:
        raise CanonicalizationError(f"empty county name in {code}")

    while True:
        stripped = _SUFFIX.sub("", name).strip()
        if stripped == name:
            break
        name = stripped

    if name.isupper() or name.islower():
        name = name.title()

    renames = get_rename_index()
    folded = name.casefold()
    name = renames.get((code, folded)) or renames.get((WILDCARD_STATE, folded)) or name
    return CountyKey(state=code, canonical_name=name)


def _city_key(city: str, state: str) -> CityKey:
    return (" ".join(transliterate(city).split()).casefold(), normalize_state(state))


# ============================================================================
# CITY RESOLUTION
# ============================================================================

def build_city_map(rows: Iterable[RawCityRow]) -> dict[CityKey, tuple[CountyKey, ...]]:
    """Group the city fixture into (city, state) -> candidate counties, file order kept."""
    grouped: dict[CityKey, list[CountyKey]] = defaultdict(list)
    for row in rows:
        county = canonicalize(row.state, row.county_name)
        candidates = grouped[_city_key(row.city, row.state)]
        if county not in candidates:
            candidates.append(county)
    return {key: tuple(value) for key, value in grouped.items()}


def resolve_city(
    city: str,
    state: str,
    city_county_map: CityMap,
    rng: np.random.Generator,
    populations: Optional[Mapping[CountyKey, int]] = None,
) -> tuple[CountyKey, Resolution]:
    """Pick the county for a city.

    A single-county city resolves directly without touching ``rng``. A city
    spanning several counties consumes exactly one uniform draw and picks a
    county with probability proportional to its population; when none of
    the candidates has population data the pick is uniform.

    Raises:
        UnmappedCityError: (city, state) is not in the map
    """
    candidates = city_county_map.get(_city_key(city, state))
    if not candidates:
        raise UnmappedCityError(city, state)
    if len(candidates) == 1:
        return candidates[0], Resolution.DIRECT

    populations = populations or {}
    weights = np.array([populations.get(county, 0) for county in candidates], dtype=float)
    if weights.sum() <= 0:
        weights = np.ones(len(candidates))
    cumulative = np.cumsum(weights) / weights.sum()
    cumulative[-1] = 1.0
    index = int(np.searchsorted(cumulative, rng.random(), side="right"))
    return candidates[min(index, len(candidates) - 1)], Resolution.MULTI_COUNTY_SAMPLED


@dataclass
class LinkageResult:
    """Incidents in file order with the county each resolved to, or why it did not."""
    incidents: list[RawShootingRow]
    resolved: dict[int, ResolvedIncident] = field(default_factory=dict)
    unresolved: dict[int, str] = field(default_factory=dict)


def link_incidents(
    incidents: Sequence[RawShootingRow],
    city_county_map: CityMap,
    rng: np.random.Generator,
    populations: Optional[Mapping[CountyKey, int]] = None,
) -> LinkageResult:
    """Resolve every incident's city to a county, once per run.

    A multi-county city is drawn once, on its first incident in file order,
    and every later incident in that city shares the draw; the draws are a
    pure function of the generator's seed. Incidents listed in the location
    override table are resolved from the override location and marked as
    imputed.
    """
    result = LinkageResult(incidents=list(incidents))
    drawn: dict[CityKey, tuple[CountyKey, Resolution]] = {}
    for incident in incidents:
        city, state = incident.city, incident.state
        override = INCIDENT_LOCATION_OVERRIDES.get(incident.id)
        if override is not None:
            city, state = override
        city_key = _city_key(city, state)
        if city_key not in drawn:
            try:
                drawn[city_key] = resolve_city(city, state, city_county_map, rng, populations)
            except UnmappedCityError as exc:
                logger.warning("Incident %d: %s", incident.id, exc)
                result.unresolved[incident.id] = "unmapped city"
                continue
        county, resolution = drawn[city_key]
        if override is not None:
            resolution = Resolution.IMPUTED
        result.resolved[incident.id] = ResolvedIncident(incident=incident, county=county, resolution=resolution)

    tally = Counter(r.resolution.value for r in result.resolved.values())
    logger.info(
        "Linked %d of %d incidents (%s); %d unmapped",
        len(result.resolved), len(result.incidents), dict(tally), len(result.unresolved),
    )
    return result


# ============================================================================
# PROFILES
# ============================================================================

@dataclass(frozen=True)
class LinkageIssue:
    """A source row that could not be joined, kept for the linkage report."""
    dataset: str
    record: str
    reason: str


@dataclass
class ProfileTable:
    """Immutable-by-convention map of CountyKey -> CountyProfile plus join issues."""
    profiles: dict[CountyKey, CountyProfile]
    issues: list[LinkageIssue] = field(default_factory=list)

    def __contains__(self, key: CountyKey) -> bool:
        return key in self.profiles

    def __getitem__(self, key: CountyKey) -> CountyProfile:
        return self.profiles[key]

    def __iter__(self):
        return iter(self.profiles.values())

    def __len__(self) -> int:
        return len(self.profiles)

    def get(self, key: CountyKey) -> Optional[CountyProfile]:
        return self.profiles.get(key)

    def populations(self, vintage: Vintage = Vintage.CENSUS_2010) -> dict[CountyKey, int]:
        """Total population per county for one vintage."""
        return {
            key: profile.demography[vintage].total_pop
            for key, profile in self.profiles.items()
            if vintage in profile.demography
        }

    def issues_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(i.dataset, i.record, i.reason) for i in self.issues],
            columns=["dataset", "record", "reason"],
        )

    def write_issues(self, path: Union[str, os.PathLike]) -> None:
        self.issues_frame().to_csv(path, index=False, lineterminator="\n")


def _canonical_or_issue(state: str, name: str, dataset: str, issues: list[LinkageIssue]) -> Optional[CountyKey]:
    try:
        return canonicalize(state, name)
    except CanonicalizationError as exc:
        issues.append(LinkageIssue(dataset, f"{name}, {state}", str(exc)))
        return None


def build_profiles(
    demography: Mapping[Vintage, Sequence[RawDemographyRow]],
    lee: Sequence[RawLeeRow],
    arrests: Sequence[RawArrestRow],
    codes: Sequence[RawCodeRow],
) -> ProfileTable:
    """Join demography, employment, arrests and codes into county profiles.

    Only counties with demography get a profile. LEE rows that canonicalize
    to the same county are summed; arrests are summed over offenses and
    joined through the UCR code crosswalk. Rows that cannot be joined are
    recorded as issues rather than raised.
    """
    issues: list[LinkageIssue] = []

    by_county: dict[CountyKey, dict[Vintage, RawDemographyRow]] = defaultdict(dict)
    for vintage, rows in demography.items():
        for row in rows:
            key = _canonical_or_issue(row.state, row.county_name, f"dem:{vintage.value}", issues)
            if key is None:
                continue
            if vintage in by_county[key]:
                issues.append(LinkageIssue(f"dem:{vintage.value}", str(key), "duplicate canonical county; first row kept"))
                continue
            by_county[key][vintage] = row

    officers: dict[CountyKey, int] = defaultdict(int)
    civilians: dict[CountyKey, int] = defaultdict(int)
    for row in lee:
        key = _canonical_or_issue(row.state, row.county_name, "lee", issues)
        if key is None:
            continue
        rule = lee_exclusion(key.state, key.canonical_name)
        if rule is not None:
            issues.append(LinkageIssue("lee", str(key), rule.reason))
            continue
        if key not in by_county:
            issues.append(LinkageIssue("lee", str(key), "county absent from demography"))
            continue
        officers[key] += row.officers
        civilians[key] += row.civilians

    county_by_ucr: dict[int, CountyKey] = {}
    codes_by_county: dict[CountyKey, RawCodeRow] = {}
    for row in codes:
        key = _canonical_or_issue(row.state, row.county_name, "codes", issues)
        if key is None:
            continue
        county_by_ucr[row.ucr_code] = key
        codes_by_county.setdefault(key, row)
        if key not in by_county:
            issues.append(LinkageIssue("codes", str(key), "county absent from demography"))

    arrest_totals: dict[CountyKey, dict[Race, int]] = {}
    for row in arrests:
        key = county_by_ucr.get(row.ucr_code)
        if key is None:
            issues.append(LinkageIssue("arrest", f"ucr {row.ucr_code} ({row.offense})", "ucr_code absent from codes"))
            continue
        totals = arrest_totals.setdefault(key, dict.fromkeys(ARREST_RACES, 0))
        for race in ARREST_RACES:
            totals[race] += row.arrests_by_race[race]

    profiles = {}
    for key, dem in by_county.items():
        code = codes_by_county.get(key)
        county_arrests = arrest_totals.get(key)
        profiles[key] = CountyProfile(
            key=key,
            fips=code.fips_code if code else None,
            ucr=code.ucr_code if code else None,
            demography=dem,
            officers=officers.get(key),
            civilians=civilians.get(key),
            arrests=county_arrests if code else None,
        )

    for issue in issues:
        logger.debug("Unlinked %s row %s: %s", issue.dataset, issue.record, issue.reason)
    logger.info(
        "Built %d county profiles: %d with employment, %d with arrests, %d join issues",
        len(profiles),
        sum(1 for p in profiles.values() if p.officers is not None),
        sum(1 for p in profiles.values() if p.arrests is not None),
        len(issues),
    )
    return ProfileTable(profiles=profiles, issues=issues)


# ============================================================================
# SUBSETS AND EXCLUSIONS
# ============================================================================

STAGES = {
    WeightingMode.POPULATION: ("race", "location", "demography"),
    WeightingMode.ARREST: ("race", "location", "demography", "arrest_state", "arrest_county"),
}


@dataclass(frozen=True)
class Exclusion:
    incident_id: int
    stage: str
    reason: str


@dataclass
class IncidentSubset:
    """Incidents kept for one weighting mode and the exclusion report for the rest."""
    mode: WeightingMode
    kept: list[ResolvedIncident]
    excluded: list[Exclusion]

    @property
    def n_input(self) -> int:
        return len(self.kept) + len(self.excluded)

    def stage_counts(self) -> dict[str, int]:
        counts = dict.fromkeys(STAGES[self.mode], 0)
        counts.update(Counter(e.stage for e in self.excluded))
        return counts

    def reason_counts(self) -> dict[str, int]:
        return dict(sorted(Counter(e.reason for e in self.excluded).items()))

    def summary(self) -> dict:
        """Exclusion accounting: input = kept + excluded, per stage and per reason."""
        return {
            "mode": self.mode.value,
            "input": self.n_input,
            "kept": len(self.kept),
            "excluded": len(self.excluded),
            "by_stage": self.stage_counts(),
            "by_reason": self.reason_counts(),
            "race_counts": {race.value: count for race, count in observed_counts(self.kept).items()},
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(e.incident_id, e.stage, e.reason) for e in self.excluded],
            columns=["incident_id", "stage", "reason"],
        )

    def write_csv(self, path: Union[str, os.PathLike]) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n")


def _usable(profile: Optional[CountyProfile], vintages: Sequence[Vintage]) -> bool:
    if profile is None:
        return False
    return all(v in profile.demography and profile.demography[v].total_pop > 0 for v in vintages)


def subset_incidents(
    linkage: LinkageResult,
    profiles: ProfileTable,
    mode: WeightingMode,
    vintages: Sequence[Vintage] = tuple(Vintage),
) -> IncidentSubset:
    """Keep the incidents a weighting mode can analyse.

    Stages run in order and an incident is charged to the first one it
    fails: race not recorded, location not resolved, county without
    demography for every requested vintage, then (arrest mode only) a state
    that reports no arrests and a county with no arrests.
    """
    kept: list[ResolvedIncident] = []
    excluded: list[Exclusion] = []

    def drop(incident: RawShootingRow, stage: str, reason: str) -> None:
        excluded.append(Exclusion(incident.id, stage, reason))

    for incident in linkage.incidents:
        if incident.race is None:
            drop(incident, "race", "race not recorded")
            continue
        resolved = linkage.resolved.get(incident.id)
        if resolved is None:
            drop(incident, "location", linkage.unresolved.get(incident.id, "unmapped city"))
            continue
        profile = profiles.get(resolved.county)
        if not _usable(profile, vintages):
            drop(incident, "demography", "county absent from demography")
            continue
        if mode == WeightingMode.ARREST:
            if resolved.county.state in ARREST_UNREPORTED_STATES:
                drop(incident, "arrest_state", "state does not report arrests")
                continue
            if profile.arrests is None:
                drop(incident, "arrest_county", "county absent from arrest data")
                continue
            if sum(profile.arrests.values()) == 0:
                drop(incident, "arrest_county", "no arrests recorded")
                continue
        kept.append(resolved)

    subset = IncidentSubset(mode=mode, kept=kept, excluded=excluded)
    logger.info("%s subset: kept %d of %d incidents", mode.value, len(kept), subset.n_input)
    return subset


def observed_counts(incidents: Iterable[ResolvedIncident]) -> dict[Race, int]:
    """Victim totals per race, all six races present."""
    counts = Counter(item.incident.race for item in incidents)
    return {race: counts.get(race, 0) for race in RACES}


def bodycam_table(incidents: Iterable[RawShootingRow]) -> np.ndarray:
    """2x6 table of race-known incidents: row 0 camera present, row 1 absent."""
    table = np.zeros((2, len(RACES)), dtype=np.int64)
    for incident in incidents:
        if incident.race is None:
            continue
        table[0 if incident.body_camera else 1, RACES.index(incident.race)] += 1
    return table
