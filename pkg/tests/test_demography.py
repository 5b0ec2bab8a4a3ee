"""Tests for county race distributions and categorical sampling."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from shooting_resample.demography import (
    arrest_distribution,
    build_distributions,
    cumulative,
    distribution_for,
    distributions_frame,
    draw_categories,
    other_share_summary,
    pooled_population_shares,
    population_distribution,
    sample_race,
    write_distributions,
)
from shooting_resample.exceptions import DistributionError
from shooting_resample.models import (
    CENSUS_RACES,
    RACES,
    CountyKey,
    Race,
    RaceDistribution,
    Vintage,
    WeightingMode,
)
from tests.conftest import make_profile, profile_table

W, B, NA, A, NH, T = CENSUS_RACES
CENSUS = Vintage.CENSUS_2010


def point_mass(race):
    return RaceDistribution(
        county=CountyKey(state="TX", canonical_name="Travis"),
        mode=WeightingMode.POPULATION,
        vintage=CENSUS,
        probs={race: 1.0},
    )


class TestPopulationDistribution:
    def test_all_white(self, white_county):
        dist = population_distribution(white_county, CENSUS)
        assert dist.probs[Race.W] == 1.0
        assert sum(dist.probs[r] for r in RACES if r != Race.W) == 0.0

    def test_full_hispanic_substitution(self, hispanic_county):
        dist = population_distribution(hispanic_county, CENSUS)
        assert dist.probs[Race.H] == 1.0
        assert dist.probs[Race.W] == 0.0

    def test_mixed_county(self):
        profile = make_profile("Mixed", {W: 50, B: 20, NA: 5, A: 5, NH: 10, T: 10})
        dist = population_distribution(profile, CENSUS)
        expected = {Race.W: 0.5, Race.B: 0.2, Race.NA: 0.05, Race.A: 0.05, Race.H: 0.0, Race.O: 0.2}
        assert dist.probs == pytest.approx(expected, abs=1e-12)

    def test_hispanic_mass_from_every_race(self):
        profile = make_profile("Mixed", {W: 60, B: 30, T: 10}, {W: 30, B: 3, T: 2})
        dist = population_distribution(profile, CENSUS)
        assert dist.probs[Race.H] == pytest.approx(0.35)
        assert dist.probs[Race.W] == pytest.approx(0.30)
        assert dist.probs[Race.O] == pytest.approx(0.08)

    def test_zero_population(self):
        profile = make_profile("Empty", {})
        with pytest.raises(DistributionError, match="zero total population"):
            population_distribution(profile, CENSUS)

    @given(
        st.lists(
            st.tuples(st.integers(0, 10_000), st.floats(0, 1)),
            min_size=6, max_size=6,
        ).filter(lambda cells: sum(pop for pop, _ in cells) > 0)
    )
    @settings(max_examples=200, deadline=None)
    def test_normalized_and_hispanic_conserved(self, cells):
        pop = {race: count for race, (count, _) in zip(CENSUS_RACES, cells)}
        hispanic = {race: int(count * share) for race, (count, share) in zip(CENSUS_RACES, cells)}
        profile = make_profile("Generated", pop, hispanic)
        dist = population_distribution(profile, CENSUS)
        assert abs(sum(dist.probs.values()) - 1.0) <= 1e-12
        assert all(p >= 0 for p in dist.probs.values())
        assert dist.probs[Race.H] == sum(hispanic.values()) / sum(pop.values())


class TestArrestDistribution:
    def test_pure_arrest_proportions(self):
        profile = make_profile("Arrests", {W: 100}, arrests={Race.W: 80, Race.B: 20})
        dist = arrest_distribution(profile, CENSUS)
        assert dist.probs[Race.W] == pytest.approx(0.8)
        assert dist.probs[Race.B] == pytest.approx(0.2)
        assert dist.mode == WeightingMode.ARREST

    def test_hispanic_share_kept(self):
        profile = make_profile("Arrests", {W: 100}, {W: 20}, arrests={Race.W: 50, Race.B: 50})
        dist = arrest_distribution(profile, CENSUS)
        assert dist.probs[Race.H] == pytest.approx(0.2)
        assert dist.probs[Race.W] == pytest.approx(0.4)
        assert dist.probs[Race.B] == pytest.approx(0.4)

    def test_other_share_kept(self):
        profile = make_profile("Arrests", {W: 90, NH: 10}, arrests={Race.A: 3})
        dist = arrest_distribution(profile, CENSUS)
        assert dist.probs[Race.O] == pytest.approx(0.1)
        assert dist.probs[Race.A] == pytest.approx(0.9)

    def test_single_race_arrests(self):
        profile = make_profile("Arrests", {B: 100}, arrests={Race.W: 1})
        assert arrest_distribution(profile, CENSUS).probs[Race.W] == 1.0

    def test_zero_arrests(self):
        profile = make_profile("Quiet", {W: 100}, arrests={})
        with pytest.raises(DistributionError, match="Quiet"):
            arrest_distribution(profile, CENSUS)

    def test_no_arrest_data(self, white_county):
        with pytest.raises(DistributionError, match="no arrest data"):
            distribution_for(white_county, WeightingMode.ARREST, CENSUS)


class TestBuildDistributions:
    def test_names_every_unusable_county(self, white_county, hispanic_county):
        profiles = {p.key: p for p in (white_county, hispanic_county)}
        with pytest.raises(DistributionError) as exc:
            build_distributions(profiles, list(profiles), WeightingMode.ARREST, CENSUS)
        assert "Whiteville" in str(exc.value)
        assert "Hispano" in str(exc.value)

    def test_mini_profiles(self, mini_linked):
        counties = [item.county for item in mini_linked.subsets[WeightingMode.ARREST].kept]
        dists = build_distributions(mini_linked.profiles.profiles, counties, WeightingMode.ARREST, Vintage.PROJ_2016)
        assert set(dists) == set(counties)
        assert all(abs(d.as_array().sum() - 1.0) <= 1e-12 for d in dists.values())


class TestCumulative:
    def test_last_positive_entry_is_one(self):
        cum = cumulative(np.array([0.3, 0.3, 0.3999999, 0.0, 0.0, 0.0]))
        assert cum.tolist()[2:] == [1.0, 1.0, 1.0, 1.0]

    def test_stack(self):
        cum = cumulative(np.array([[1.0, 0, 0], [0, 0.5, 0.5]]))
        assert cum.tolist() == [[1.0, 1.0, 1.0], [0.0, 0.5, 1.0]]

    def test_zero_probability_never_drawn(self):
        cum = cumulative(np.array([0.5, 0.0, 0.5]))
        drawn = draw_categories(cum, np.linspace(0, 0.999999, 1001))
        assert 1 not in set(drawn.tolist())


class TestSampleRace:
    def test_point_mass(self):
        rng = np.random.default_rng(1)
        assert {sample_race(point_mass(Race.B), rng) for _ in range(100)} == {Race.B}

    def test_consumes_one_uniform(self):
        first, second = np.random.default_rng(9), np.random.default_rng(9)
        sample_race(point_mass(Race.W), first)
        second.random()
        assert first.random() == second.random()

    def test_binomial_frequency(self):
        dist = RaceDistribution(
            county=CountyKey(state="TX", canonical_name="Travis"),
            mode=WeightingMode.POPULATION,
            vintage=CENSUS,
            probs={Race.W: 0.5, Race.B: 0.5},
        )
        rng = np.random.default_rng(2024)
        n = 100_000
        whites = sum(sample_race(dist, rng) == Race.W for _ in range(n))
        assert abs(whites / n - 0.5) < 3 * np.sqrt(0.25 / n)

    def test_deterministic(self):
        dist = population_distribution(make_profile("Mixed", {W: 50, B: 50}, {W: 10}), CENSUS)
        runs = [
            [sample_race(dist, rng) for _ in range(50)]
            for rng in (np.random.default_rng(5), np.random.default_rng(5))
        ]
        assert runs[0] == runs[1]

    def test_goodness_of_fit(self):
        probs = np.array([0.4, 0.25, 0.05, 0.1, 0.15, 0.05])
        rng = np.random.default_rng(77)
        n = 100_000
        draws = draw_categories(cumulative(probs), rng.random(n))
        observed = np.bincount(draws, minlength=6)
        _, p = stats.chisquare(observed, probs * n)
        assert p > 0.01


class TestAuditTables:
    def test_distributions_frame(self, tmp_path):
        dists = [point_mass(Race.B)]
        frame = distributions_frame(dists)
        assert list(frame.columns) == ["county", "state", "mode", "vintage", "W", "B", "NA", "A", "H", "O"]
        assert frame.loc[0, "B"] == 1.0
        path = tmp_path / "distributions.csv"
        write_distributions(dists, path)
        assert path.read_text().splitlines()[0] == "county,state,mode,vintage,W,B,NA,A,H,O"

    def test_other_share_summary(self, mini_linked):
        frame = other_share_summary(mini_linked.profiles, [Vintage.CENSUS_2010])
        row = frame.iloc[0]
        assert row["counties"] == 7
        assert row["pooled_share"] == pytest.approx(650 / 9200)
        assert row["mean_county_share"] == pytest.approx(0.445 / 7)


class TestPooledPopulationShares:
    def test_counties_pool_by_head(self):
        profiles = profile_table(
            make_profile("Alpha", {W: 60, B: 40}),
            make_profile("Beta", {W: 100, B: 200}, hispanic={W: 50}),
            make_profile("Gamma", {}),
        )
        shares = pooled_population_shares(profiles)
        assert shares[Race.W] == pytest.approx(110 / 400)
        assert shares[Race.B] == pytest.approx(240 / 400)
        assert shares[Race.H] == pytest.approx(50 / 400)
        assert sum(shares.values()) == pytest.approx(1.0)

    def test_mini_shares_sum_to_one(self, mini_linked):
        shares = pooled_population_shares(mini_linked.profiles, Vintage.PROJ_2016)
        assert list(shares) == list(RACES)
        assert sum(shares.values()) == pytest.approx(1.0)

    def test_no_population(self):
        with pytest.raises(DistributionError):
            pooled_population_shares(profile_table(make_profile("Gamma", {})))
