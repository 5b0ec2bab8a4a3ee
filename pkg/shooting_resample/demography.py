"""Per-county race distributions under population and arrest weighting."""

import logging
import os
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
import pandas as pd

from shooting_resample.exceptions import DistributionError
from shooting_resample.models import (
    ARREST_RACES,
    CENSUS_RACES,
    RACES,
    CensusRace,
    CountyKey,
    CountyProfile,
    Race,
    RaceDistribution,
    RawDemographyRow,
    Vintage,
    WeightingMode,
)

logger = logging.getLogger(__name__)

# NH and T carry no incident-file category of their own and count as Other.
CENSUS_TO_RACE = {
    CensusRace.W: Race.W,
    CensusRace.B: Race.B,
    CensusRace.NA: Race.NA,
    CensusRace.A: Race.A,
    CensusRace.NH: Race.O,
    CensusRace.T: Race.O,
}


def _population_mass(row: RawDemographyRow) -> dict[Race, int]:
    mass = dict.fromkeys(RACES, 0)
    for census_race in CENSUS_RACES:
        hispanic = row.hispanic_by_race[census_race]
        mass[CENSUS_TO_RACE[census_race]] += row.pop_by_race[census_race] - hispanic
        mass[Race.H] += hispanic
    return mass


def population_distribution(profile: CountyProfile, vintage: Vintage) -> RaceDistribution:
    """Race law of a victim drawn from the county population.

    Each census race contributes its non-Hispanic share to its own label
    (NH and T to Other) and its Hispanic share to H.
    """
    row = profile.demography.get(vintage)
    if row is None:
        raise DistributionError(f"{profile.key}: no {vintage.value} demography")
    if row.total_pop <= 0:
        raise DistributionError(f"{profile.key}: zero total population in {vintage.value}")

    mass = _population_mass(row)
    probs = {race: mass[race] / row.total_pop for race in RACES}
    return RaceDistribution(county=profile.key, mode=WeightingMode.POPULATION, vintage=vintage, probs=probs)


def arrest_distribution(profile: CountyProfile, vintage: Vintage) -> RaceDistribution:
    """Race law weighted by arrests.

    H and O keep their population probabilities; the remaining mass is
    split over W, B, NA and A in proportion to arrests summed over offenses.
    """
    base = population_distribution(profile, vintage)
    if profile.arrests is None:
        raise DistributionError(f"{profile.key}: no arrest data")
    total = sum(profile.arrests[race] for race in ARREST_RACES)
    if total <= 0:
        raise DistributionError(f"{profile.key}: all arrest counts are zero")

    p_h, p_o = base.probs[Race.H], base.probs[Race.O]
    remaining = max(0.0, 1.0 - p_h - p_o)
    probs = {race: remaining * profile.arrests[race] / total for race in ARREST_RACES}
    probs[Race.H] = p_h
    probs[Race.O] = p_o
    return RaceDistribution(county=profile.key, mode=WeightingMode.ARREST, vintage=vintage, probs=probs)


def distribution_for(profile: CountyProfile, mode: WeightingMode, vintage: Vintage) -> RaceDistribution:
    if mode == WeightingMode.ARREST:
        return arrest_distribution(profile, vintage)
    return population_distribution(profile, vintage)


def build_distributions(
    profiles: Mapping[CountyKey, CountyProfile],
    counties: Iterable[CountyKey],
    mode: WeightingMode,
    vintage: Vintage,
) -> dict[CountyKey, RaceDistribution]:
    """Distributions for a set of counties, failing once with every unusable county named."""
    distributions: dict[CountyKey, RaceDistribution] = {}
    failures = []
    for county in counties:
        if county in distributions:
            continue
        profile = profiles.get(county)
        if profile is None:
            failures.append(f"{county}: no profile")
            continue
        try:
            distributions[county] = distribution_for(profile, mode, vintage)
        except DistributionError as exc:
            failures.append(str(exc))
    if failures:
        raise DistributionError(
            f"{len(failures)} counties unusable for {mode.value}/{vintage.value}: " + "; ".join(failures)
        )
    logger.debug("Built %d %s/%s distributions", len(distributions), mode.value, vintage.value)
    return distributions


def cumulative(probs: np.ndarray) -> np.ndarray:
    """Cumulative probabilities with every entry from the last positive one set to exactly 1.

    Works on one distribution or a stack of them (last axis).
    """
    probs = np.asarray(probs, dtype=float)
    cum = np.cumsum(probs, axis=-1)
    positive = probs > 0
    # index of the last positive entry in each row
    last = probs.shape[-1] - 1 - np.argmax(positive[..., ::-1], axis=-1)
    columns = np.arange(probs.shape[-1])
    cum[columns >= np.expand_dims(last, -1)] = 1.0
    return cum


def draw_categories(cum: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Category index for each uniform against its row of cumulative probabilities."""
    return (np.asarray(uniforms)[..., None] >= cum).sum(axis=-1)


def sample_race(dist: RaceDistribution, rng: np.random.Generator) -> Race:
    """Draw one race; consumes exactly one uniform from ``rng``."""
    index = int(draw_categories(cumulative(dist.as_array()), rng.random()))
    return RACES[index]


def distributions_frame(distributions: Iterable[RaceDistribution]) -> pd.DataFrame:
    """Audit table: county, state, mode, vintage and one probability column per race."""
    records = []
    for dist in distributions:
        record = {
            "county": dist.county.canonical_name,
            "state": dist.county.state,
            "mode": dist.mode.value,
            "vintage": dist.vintage.value,
        }
        record.update({race.value: dist.probs[race] for race in RACES})
        records.append(record)
    columns = ["county", "state", "mode", "vintage"] + [race.value for race in RACES]
    frame = pd.DataFrame(records, columns=columns)
    return frame.sort_values(["mode", "vintage", "state", "county"], kind="stable").reset_index(drop=True)


def write_distributions(distributions: Iterable[RaceDistribution], path: Union[str, os.PathLike]) -> None:
    distributions_frame(distributions).to_csv(path, index=False, lineterminator="\n")


def other_share_summary(profiles: Iterable[CountyProfile], vintages: Sequence[Vintage] = tuple(Vintage)) -> pd.DataFrame:
    """Share of NH plus T in county populations, the census proxy for Other.

    One row per vintage: number of counties, the mean county share and the
    pooled share over all counties.
    """
    profiles = list(profiles)
    rows = []
    for vintage in vintages:
        shares = []
        pooled_other = pooled_total = 0
        for profile in profiles:
            row = profile.demography.get(vintage)
            if row is None or row.total_pop <= 0:
                continue
            other = row.pop_by_race[CensusRace.NH] + row.pop_by_race[CensusRace.T]
            shares.append(other / row.total_pop)
            pooled_other += other
            pooled_total += row.total_pop
        rows.append({
            "vintage": vintage.value,
            "counties": len(shares),
            "mean_county_share": float(np.mean(shares)) if shares else float("nan"),
            "pooled_share": pooled_other / pooled_total if pooled_total else float("nan"),
        })
    return pd.DataFrame(rows, columns=["vintage", "counties", "mean_county_share", "pooled_share"])


def pooled_population_shares(profiles: Iterable[CountyProfile], vintage: Vintage = Vintage.CENSUS_2010) -> dict[Race, float]:
    """Share of each race in the combined population of every county with demography for the vintage."""
    pooled = dict.fromkeys(RACES, 0)
    total = 0
    for profile in profiles:
        row = profile.demography.get(vintage)
        if row is None or row.total_pop <= 0:
            continue
        for race, count in _population_mass(row).items():
            pooled[race] += count
        total += row.total_pop
    if total == 0:
        raise DistributionError(f"no county has {vintage.value} population")
    return {race: pooled[race] / total for race in RACES}
