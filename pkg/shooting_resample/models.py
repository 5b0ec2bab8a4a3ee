"""Data models for incidents, county profiles, distributions and results."""

import datetime
from enum import Enum
from typing import Annotated, ClassVar, Optional

import numpy as np
from pydantic import AfterValidator, BaseModel, ConfigDict, Field, field_validator, model_validator

from shooting_resample.geography import COUNTY_SUFFIXES, is_state_code


class Race(str, Enum):
    """Harmonized victim race labels. Member order is the column order everywhere."""
    W = "W"
    B = "B"
    NA = "NA"
    A = "A"
    H = "H"
    O = "O"

    @classmethod
    def from_incident_code(cls, code: str) -> "Race":
        """Map an incident-file race code (which writes Native American as N)."""
        code = code.strip().upper()
        if code == "N":
            return cls.NA
        return cls(code)

    @property
    def code(self) -> str:
        """Label written into CSV cells; Native American is N so readers do not take it for missing."""
        return "N" if self is Race.NA else self.value


RACES: tuple[Race, ...] = tuple(Race)

# Races the arrest tables break out.
ARREST_RACES: tuple[Race, ...] = (Race.W, Race.B, Race.NA, Race.A)


class CensusRace(str, Enum):
    """Race categories of the county demography tables."""
    W = "W"
    B = "B"
    NA = "NA"
    A = "A"
    NH = "NH"
    T = "T"


CENSUS_RACES: tuple[CensusRace, ...] = tuple(CensusRace)


class Vintage(str, Enum):
    """Which demography table a distribution is built from."""
    CENSUS_2010 = "census2010"
    PROJ_2016 = "proj2016"


class WeightingMode(str, Enum):
    """What a county's race distribution is weighted by."""
    POPULATION = "population"
    ARREST = "arrest"


class LocationMode(str, Enum):
    """Whether incident counties are held fixed or redrawn."""
    FIXED = "fixed"
    RANDOM = "random"


class EmploymentWeight(str, Enum):
    """County weight used when locations are redrawn."""
    OFFICERS = "officers"
    TOTAL = "total"


class Resolution(str, Enum):
    """How an incident's county was determined."""
    DIRECT = "direct"
    MULTI_COUNTY_SAMPLED = "multi_county_sampled"
    IMPUTED = "imputed"


class TieRule(str, Enum):
    """Where resamples equal to the observed total are counted."""
    EXCLUDE = "exclude"
    LOWER = "lower"


DEFAULT_REPLICATIONS = {
    LocationMode.FIXED: 1000,
    LocationMode.RANDOM: 2000,
}

INCIDENT_WINDOW = (datetime.date(2015, 1, 1), datetime.date(2016, 7, 11))

MAX_SEED = 2 ** 64 - 1


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True)


def _check_state(value: str) -> str:
    value = value.strip().upper()
    if not is_state_code(value):
        raise ValueError(f"not a US state/DC code: {value!r}")
    return value


StateCode = Annotated[str, AfterValidator(_check_state)]


# ============================================================================
# RAW DATASET ROWS
# ============================================================================

class RawShootingRow(_Frozen):
    """One fatal-shooting record."""
    id: int = Field(description="Incident id, unique within the file")
    date: datetime.date = Field(description="Incident date")
    city: str = Field(description="City as recorded")
    state: StateCode = Field(description="Two-letter state code")
    race: Optional[Race] = Field(default=None, description="Victim race, None when not recorded")
    body_camera: bool = Field(default=False, description="Responding officers wore body cameras")

    @field_validator("date")
    @classmethod
    def _in_window(cls, value: datetime.date) -> datetime.date:
        start, end = INCIDENT_WINDOW
        if not start <= value <= end:
            raise ValueError(f"date {value} outside {start}..{end}")
        return value


class RawDemographyRow(_Frozen):
    """County population by census race, with the Hispanic share of each race."""
    state: StateCode = Field(description="Two-letter state code")
    county_name: str = Field(description="County name as recorded")
    vintage: Vintage
    total_pop: int = Field(ge=0)
    pop_by_race: dict[CensusRace, int]
    hispanic_by_race: dict[CensusRace, int]

    @model_validator(mode="after")
    def _consistent(self) -> "RawDemographyRow":
        for table in (self.pop_by_race, self.hispanic_by_race):
            if set(table) != set(CENSUS_RACES):
                raise ValueError("race table must cover W, B, NA, A, NH, T")
            if any(v < 0 for v in table.values()):
                raise ValueError("negative count")
        if sum(self.pop_by_race.values()) != self.total_pop:
            raise ValueError(f"{self.county_name}: race totals do not sum to total population")
        for race in CENSUS_RACES:
            if self.hispanic_by_race[race] > self.pop_by_race[race]:
                raise ValueError(f"{self.county_name}: Hispanic {race.value} exceeds {race.value} population")
        return self


class RawLeeRow(_Frozen):
    """Law enforcement employment for one county."""
    state: StateCode
    county_name: str
    officers: int = Field(ge=0)
    civilians: int = Field(ge=0)


class RawArrestRow(_Frozen):
    """Arrests by race for one offense in one UCR-coded county."""
    ucr_code: int
    offense: str
    arrests_by_race: dict[Race, int]

    @field_validator("arrests_by_race")
    @classmethod
    def _arrest_races(cls, value: dict[Race, int]) -> dict[Race, int]:
        if set(value) != set(ARREST_RACES):
            raise ValueError("arrest table must cover W, B, NA, A")
        if any(v < 0 for v in value.values()):
            raise ValueError("negative count")
        return value


class RawCodeRow(_Frozen):
    """UCR/FIPS crosswalk entry."""
    state: StateCode
    county_name: str
    ucr_code: int
    fips_code: int


class RawCityRow(_Frozen):
    """City-to-county mapping entry; multi-county cities repeat."""
    city: str
    state: StateCode
    county_name: str


# ============================================================================
# LINKED RECORDS
# ============================================================================

class CountyKey(_Frozen):
    """Join key: state code plus canonical county name."""
    state: StateCode
    canonical_name: str

    @field_validator("canonical_name")
    @classmethod
    def _canonical(cls, value: str) -> str:
        if not value or value != value.strip():
            raise ValueError("canonical name must be non-empty without surrounding whitespace")
        lowered = value.lower()
        for suffix in COUNTY_SUFFIXES:
            if lowered.endswith(" " + suffix):
                raise ValueError(f"canonical name keeps suffix {suffix!r}")
        return value

    def __str__(self) -> str:
        return f"{self.canonical_name}, {self.state}"


class CountyProfile(_Frozen):
    """Everything known about one county after linkage."""
    key: CountyKey
    fips: Optional[int] = None
    ucr: Optional[int] = None
    demography: dict[Vintage, RawDemographyRow]
    officers: Optional[int] = Field(default=None, ge=0)
    civilians: Optional[int] = Field(default=None, ge=0)
    arrests: Optional[dict[Race, int]] = Field(
        default=None,
        description="Arrests per race summed over offenses",
    )

    @model_validator(mode="after")
    def _linked(self) -> "CountyProfile":
        if not self.demography:
            raise ValueError(f"{self.key}: no demography")
        if self.arrests is not None and self.ucr is None:
            raise ValueError(f"{self.key}: arrests without a UCR code")
        return self

    def employment(self, weight: EmploymentWeight) -> int:
        """Officer count, or officers plus civilians."""
        officers = self.officers or 0
        if weight == EmploymentWeight.TOTAL:
            return officers + (self.civilians or 0)
        return officers


class ResolvedIncident(_Frozen):
    """An incident with the county it is attributed to."""
    incident: RawShootingRow
    county: CountyKey
    resolution: Resolution


class RaceDistribution(_Frozen):
    """Categorical law over the six race labels for one county."""
    county: CountyKey
    mode: WeightingMode
    vintage: Vintage
    probs: dict[Race, float]

    @field_validator("probs")
    @classmethod
    def _normalized(cls, value: dict[Race, float]) -> dict[Race, float]:
        value = {race: float(value.get(race, 0.0)) for race in RACES}
        if any(not 0.0 <= p <= 1.0 for p in value.values()):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(sum(value.values()) - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")
        return value

    def as_array(self) -> np.ndarray:
        """Probabilities in race column order."""
        return np.array([self.probs[race] for race in RACES], dtype=float)


# ============================================================================
# EXPERIMENT CONFIGURATION
# ============================================================================

class SimulationConfig(_Frozen):
    """One Monte Carlo experiment."""
    mode: WeightingMode = WeightingMode.POPULATION
    location: LocationMode = LocationMode.FIXED
    vintage: Vintage = Vintage.CENSUS_2010
    replications: int = Field(
        default=DEFAULT_REPLICATIONS[LocationMode.FIXED],
        ge=1,
        description="Defaults to 1000 for fixed and 2000 for random locations",
    )
    master_seed: int = Field(default=0, ge=0, le=MAX_SEED)
    weighting: EmploymentWeight = Field(
        default=EmploymentWeight.OFFICERS,
        description="County weight for random locations",
    )

    @model_validator(mode="before")
    @classmethod
    def _default_replications(cls, data):
        if isinstance(data, dict) and data.get("replications") is None:
            location = LocationMode(data.get("location", LocationMode.FIXED))
            data = {**data, "replications": DEFAULT_REPLICATIONS[location]}
        return data

    @property
    def label(self) -> str:
        label = f"{self.mode.value}-{self.location.value}-{self.vintage.value}"
        if self.location == LocationMode.RANDOM and self.weighting != EmploymentWeight.OFFICERS:
            label += f"-{self.weighting.value}"
        return label


class BodycamConfig(_Frozen):
    """Randomization test of camera-present race counts against a reference stratum."""
    replications: int = Field(default=1000, ge=1)
    draws_per_replication: int = Field(ge=1)
    reference_counts: dict[Race, int]
    master_seed: int = Field(default=0, ge=0, le=MAX_SEED)

    @field_validator("reference_counts")
    @classmethod
    def _reference(cls, value: dict[Race, int]) -> dict[Race, int]:
        value = {race: int(value.get(race, 0)) for race in RACES}
        if any(v < 0 for v in value.values()):
            raise ValueError("negative reference count")
        if sum(value.values()) <= 0:
            raise ValueError("reference counts sum to zero")
        return value

    label: ClassVar[str] = "bodycam"


# ============================================================================
# INFERENCE RESULTS
# ============================================================================

class PValueEstimate(_Frozen):
    """Two-sided empirical p-value of an observed total against resampled totals."""
    race: Optional[Race] = None
    observed_total: float
    n_replications: int
    n_greater: int
    n_less: int
    n_ties: int
    tie_rule: TieRule = TieRule.EXCLUDE
    p_unbiased: float = Field(ge=0.0, le=1.0)
    p_biased: float = Field(ge=0.0, le=1.0)
    se_bound: float


class BonferroniFlag(_Frozen):
    """Raw and family-corrected significance of one p-value."""
    race: Optional[Race] = None
    p_value: float
    threshold: float
    corrected_threshold: float
    family_size: int
    raw: bool
    bonferroni: bool


class ChiSquareResult(_Frozen):
    """Pearson chi-square test of independence."""
    statistic: float
    dof: int
    p_value: float
    observed: list[list[int]]
    expected: list[list[float]]


class DensityEstimate(_Frozen):
    """Gaussian kernel density estimate on a grid."""
    race: Optional[Race] = None
    grid: list[float]
    density: list[float]
    bandwidth: float


class RaceTestRow(_Frozen):
    """One race's line in a test report."""
    race: Race
    observed: int
    mean: float
    sd: float
    expected_total: int
    p_unbiased: float
    p_biased: float
    se_bound: float
    sd_distance: Optional[float] = None
    raw_significant: bool
    bonferroni_significant: bool


class TestReport(_Frozen):
    """Per-race inference summary for one experiment."""
    __test__ = False

    label: str
    n_replications: int
    n_incidents: int
    alpha: float
    family_size: int
    tie_rule: TieRule
    rows: list[RaceTestRow]

    def row(self, race: Race) -> RaceTestRow:
        for row in self.rows:
            if row.race == race:
                return row
        raise KeyError(race)
