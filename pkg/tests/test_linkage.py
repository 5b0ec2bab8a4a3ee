"""Tests for canonicalization, city resolution, profiles and subsets."""

import datetime

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shooting_resample.exceptions import CanonicalizationError, UnmappedCityError
from shooting_resample.linkage import (
    LinkageResult,
    bodycam_table,
    build_city_map,
    build_profiles,
    canonicalize,
    link_incidents,
    observed_counts,
    resolve_city,
    subset_incidents,
)
from shooting_resample.models import (
    CensusRace,
    CountyKey,
    Race,
    RawArrestRow,
    RawCityRow,
    RawCodeRow,
    RawShootingRow,
    Resolution,
    Vintage,
    WeightingMode,
)
from tests.conftest import make_demography


def key(state, name):
    return CountyKey(state=state, canonical_name=name)


class TestCanonicalize:
    def test_parish_suffix_and_rename(self):
        assert canonicalize("LA", "Assumption Parish") == key("LA", "Assumption")
        assert canonicalize("LA", "Assymption Parish") == key("LA", "Assumption")

    def test_state_specific_rename(self):
        assert canonicalize("GA", "Augusta-Richmond") == key("GA", "Richmond")

    def test_already_canonical(self):
        assert canonicalize("TX", "Travis") == key("TX", "Travis")

    def test_police_department_suffix(self):
        assert canonicalize("TX", "Harris County Police Department") == key("TX", "Harris")

    def test_wildcard_renames(self):
        assert canonicalize("IL", "De Kalb County") == key("IL", "DeKalb")
        assert canonicalize("IL", "DU PAGE COUNTY") == key("IL", "DuPage")

    def test_case_and_whitespace(self):
        assert canonicalize("texas", "  FORT   BEND  county ") == key("TX", "Fort Bend")

    def test_transliteration(self):
        assert canonicalize("NM", "Doña Ana County") == key("NM", "Dona Ana")

    def test_empty_name(self):
        with pytest.raises(CanonicalizationError):
            canonicalize("TX", "   ")

    def test_unknown_state(self):
        with pytest.raises(CanonicalizationError):
            canonicalize("XX", "Travis")

    @given(st.from_regex(r"[A-Za-z][A-Za-z .'-]{0,30}", fullmatch=True), st.sampled_from(["TX", "LA", "GA", "IL"]))
    @settings(max_examples=300)
    def test_idempotent(self, name, state):
        once = canonicalize(state, name)
        assert canonicalize(once.state, once.canonical_name) == once


class TestResolveCity:
    def setup_method(self):
        self.city_map = build_city_map([
            RawCityRow(city="Austin", state="TX", county_name="Travis County"),
            RawCityRow(city="Houston", state="TX", county_name="Harris"),
            RawCityRow(city="Houston", state="TX", county_name="Fort Bend County"),
        ])

    def test_single_county_is_direct(self):
        rng = np.random.default_rng(0)
        county, resolution = resolve_city("austin", "Texas", self.city_map, rng)
        assert county == key("TX", "Travis")
        assert resolution == Resolution.DIRECT

    def test_unmapped(self):
        with pytest.raises(UnmappedCityError):
            resolve_city("Nowhere", "TX", self.city_map, np.random.default_rng(0))

    def test_population_weighted_draw(self):
        populations = {key("TX", "Harris"): 900000, key("TX", "Fort Bend"): 100000}
        rng = np.random.default_rng(12345)
        n = 100_000
        hits = 0
        for _ in range(n):
            county, resolution = resolve_city("Houston", "TX", self.city_map, rng, populations)
            hits += county == key("TX", "Harris")
        assert resolution == Resolution.MULTI_COUNTY_SAMPLED
        sigma = np.sqrt(0.9 * 0.1 / n)
        assert abs(hits / n - 0.9) < 3 * sigma

    def test_uniform_without_populations(self):
        rng = np.random.default_rng(7)
        picks = {resolve_city("Houston", "TX", self.city_map, rng)[0] for _ in range(200)}
        assert picks == {key("TX", "Harris"), key("TX", "Fort Bend")}

    def test_same_seed_same_draws(self):
        draws = [
            [resolve_city("Houston", "TX", self.city_map, rng)[0] for _ in range(20)]
            for rng in (np.random.default_rng(3), np.random.default_rng(3))
        ]
        assert draws[0] == draws[1]


class TestLinkIncidents:
    def test_mini_linkage(self, mini_linked):
        linkage = mini_linked.linkage
        assert len(linkage.incidents) == 14
        assert linkage.unresolved == {11: "unmapped city"}
        assert linkage.resolved[1].county == key("TX", "Travis")
        assert linkage.resolved[4].county == key("LA", "Assumption")
        assert linkage.resolved[5].county == key("GA", "Richmond")
        assert linkage.resolved[10].county == key("NM", "Dona Ana")
        assert linkage.resolved[6].resolution == Resolution.MULTI_COUNTY_SAMPLED
        assert linkage.resolved[6].county in {key("TX", "Harris"), key("TX", "Fort Bend")}
        assert linkage.resolved[7].county == linkage.resolved[6].county

    def test_multi_county_city_drawn_once(self):
        city_map = build_city_map([
            RawCityRow(city="Houston", state="TX", county_name="Harris"),
            RawCityRow(city="Houston", state="TX", county_name="Fort Bend"),
        ])
        populations = {key("TX", "Harris"): 500, key("TX", "Fort Bend"): 500}
        incidents = [
            RawShootingRow(id=i, date=datetime.date(2015, 6, 1), city="Houston", state="TX", race=Race.W)
            for i in range(1, 41)
        ]
        seen = set()
        for seed in range(20):
            result = link_incidents(incidents, city_map, np.random.default_rng(seed), populations)
            counties = {r.county for r in result.resolved.values()}
            assert len(counties) == 1
            assert {r.resolution for r in result.resolved.values()} == {Resolution.MULTI_COUNTY_SAMPLED}
            seen |= counties
        assert seen == {key("TX", "Harris"), key("TX", "Fort Bend")}

    def test_location_override_is_imputed(self):
        city_map = build_city_map([RawCityRow(city="Rush Springs", state="OK", county_name="Grady County")])
        incident = RawShootingRow(
            id=1696, date=datetime.date(2016, 1, 1), city="Somewhere", state="OK", race=Race.W,
        )
        result = link_incidents([incident], city_map, np.random.default_rng(0))
        assert result.resolved[1696].county == key("OK", "Grady")
        assert result.resolved[1696].resolution == Resolution.IMPUTED


class TestBuildProfiles:
    def test_mini_profiles(self, mini_linked):
        profiles = mini_linked.profiles
        assert len(profiles) == 7
        harris = profiles[key("TX", "Harris")]
        assert (harris.officers, harris.civilians) == (900, 220)
        assert harris.arrests == {Race.W: 250, Race.B: 210, Race.NA: 5, Race.A: 15}
        assert (harris.ucr, harris.fips) == (1004, 48201)
        assumption = profiles[key("LA", "Assumption")]
        assert assumption.officers == 20
        assert set(assumption.demography) == set(Vintage)

    def test_counties_without_arrests(self, mini_linked):
        profiles = mini_linked.profiles
        assert profiles[key("TX", "Bexar")].arrests is None
        assert profiles[key("TX", "Bexar")].ucr == 1007
        assert profiles[key("FL", "Miami-Dade")].arrests is None

    def test_issues(self, mini_linked):
        reasons = {(i.dataset, i.record): i.reason for i in mini_linked.profiles.issues}
        assert reasons[("lee", "Dona Ana, NM")].startswith("excluded by data rule")
        assert reasons[("lee", "Shannon, SD")].startswith("excluded by data rule")
        assert reasons[("arrest", "ucr 9999 (theft)")] == "ucr_code absent from codes"

    def test_offense_rows_are_summed(self):
        dem = {Vintage.CENSUS_2010: [make_demography("TX", "Travis County", {CensusRace.W: 10})]}
        codes = [RawCodeRow(state="TX", county_name="Travis", ucr_code=7, fips_code=48453)]
        arrests = [
            RawArrestRow(ucr_code=7, offense="a", arrests_by_race={Race.W: 10, Race.B: 5, Race.NA: 0, Race.A: 0}),
            RawArrestRow(ucr_code=7, offense="b", arrests_by_race={Race.W: 2, Race.B: 3, Race.NA: 0, Race.A: 0}),
        ]
        profiles = build_profiles(dem, [], arrests, codes)
        travis = profiles[key("TX", "Travis")]
        assert travis.arrests[Race.W] == 12
        assert travis.arrests[Race.B] == 8

    def test_populations(self, mini_linked):
        populations = mini_linked.profiles.populations(Vintage.CENSUS_2010)
        assert populations[key("TX", "Harris")] == 2000
        assert mini_linked.profiles.populations(Vintage.PROJ_2016)[key("TX", "Harris")] == 2200


class TestSubsetIncidents:
    def test_population_mode(self, mini_linked):
        subset = mini_linked.subsets[WeightingMode.POPULATION]
        assert len(subset.kept) == 11
        assert subset.stage_counts() == {"race": 1, "location": 1, "demography": 1}
        assert observed_counts(subset.kept) == {
            Race.W: 3, Race.B: 3, Race.NA: 1, Race.A: 1, Race.H: 2, Race.O: 1,
        }

    def test_arrest_mode(self, mini_linked):
        subset = mini_linked.subsets[WeightingMode.ARREST]
        assert len(subset.kept) == 9
        assert subset.stage_counts() == {
            "race": 1, "location": 1, "demography": 1, "arrest_state": 1, "arrest_county": 1,
        }
        excluded = {e.incident_id: e.reason for e in subset.excluded}
        assert excluded[9] == "state does not report arrests"
        assert excluded[14] == "county absent from arrest data"

    def test_counts_are_conserved(self, mini_linked):
        for subset in mini_linked.subsets.values():
            summary = subset.summary()
            assert summary["input"] == 14
            assert summary["kept"] + summary["excluded"] == summary["input"]
            assert sum(summary["by_stage"].values()) == summary["excluded"]

    def test_kept_counties_have_profiles(self, mini_linked):
        profiles = mini_linked.profiles
        for subset in mini_linked.subsets.values():
            assert all(item.county in profiles for item in subset.kept)

    def test_empty_input(self, mini_linked):
        empty = LinkageResult(incidents=[])
        subset = subset_incidents(empty, mini_linked.profiles, WeightingMode.ARREST)
        assert subset.kept == []
        assert all(count == 0 for count in subset.stage_counts().values())

    def test_report_frame(self, mini_linked, tmp_path):
        subset = mini_linked.subsets[WeightingMode.POPULATION]
        path = tmp_path / "exclusions.csv"
        subset.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "incident_id,stage,reason"
        assert "3,race,race not recorded" in lines


class TestBodycamTable:
    def test_mini_table(self, mini_fixtures):
        table = bodycam_table(mini_fixtures.shootings)
        assert table.tolist() == [[0, 1, 1, 0, 1, 0], [4, 2, 0, 1, 2, 1]]
