"""Shared fixtures: the miniature fixture set and small profile builders."""

from pathlib import Path

import pytest

from shooting_resample.ingest import load_fixtures
from shooting_resample.linkage import ProfileTable, canonicalize
from shooting_resample.models import (
    CENSUS_RACES,
    CensusRace,
    CountyProfile,
    Race,
    RawDemographyRow,
    Vintage,
)
from shooting_resample.pipeline import link_fixtures

MINI_DIR = Path(__file__).parent / "fixtures" / "mini"
FULL_DIR = Path(__file__).parent.parent / "fixtures"


def make_demography(state, county, pop, hispanic=None, vintage=Vintage.CENSUS_2010):
    """Demography row from {CensusRace: count} dicts; missing races count zero."""
    pop = {race: pop.get(race, 0) for race in CENSUS_RACES}
    hispanic = {race: (hispanic or {}).get(race, 0) for race in CENSUS_RACES}
    return RawDemographyRow(
        state=state,
        county_name=county,
        vintage=vintage,
        total_pop=sum(pop.values()),
        pop_by_race=pop,
        hispanic_by_race=hispanic,
    )


def make_profile(county, pop, hispanic=None, state="TX", officers=None, civilians=None, arrests=None):
    """County profile with the same demography for both vintages."""
    key = canonicalize(state, county)
    demography = {
        vintage: make_demography(state, county, pop, hispanic, vintage)
        for vintage in Vintage
    }
    return CountyProfile(
        key=key,
        ucr=1 if arrests is not None else None,
        demography=demography,
        officers=officers,
        civilians=civilians,
        arrests={race: arrests.get(race, 0) for race in (Race.W, Race.B, Race.NA, Race.A)} if arrests is not None else None,
    )


def profile_table(*profiles):
    return ProfileTable(profiles={p.key: p for p in profiles})


@pytest.fixture
def mini_dir():
    return MINI_DIR


@pytest.fixture(scope="session")
def mini_fixtures():
    return load_fixtures(MINI_DIR)


@pytest.fixture(scope="session")
def mini_linked(mini_fixtures):
    return link_fixtures(mini_fixtures, master_seed=0)


@pytest.fixture
def white_county():
    return make_profile("Whiteville", {CensusRace.W: 100}, officers=10)


@pytest.fixture
def hispanic_county():
    return make_profile("Hispano", {CensusRace.W: 100}, {CensusRace.W: 100}, officers=30)


requires_full_fixtures = pytest.mark.skipif(
    not (FULL_DIR / "wp.csv").is_file(),
    reason="July 2016 snapshot not present in fixtures/; see fixtures/ACCEPTANCE.md",
)
