"""US geography reference tables and the county data rules applied during linkage.

This module holds the static tables the linkage stage consults: state codes,
county-name suffixes, the county rename list, and the per-dataset exclusion
and override rules.
"""

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Optional

import pandas as pd


US_STATES = {
    "AL": "Alabama", "AK": "Alaska", "AZ": "Arizona", "AR": "Arkansas",
    "CA": "California", "CO": "Colorado", "CT": "Connecticut", "DE": "Delaware",
    "DC": "District of Columbia", "FL": "Florida", "GA": "Georgia", "HI": "Hawaii",
    "ID": "Idaho", "IL": "Illinois", "IN": "Indiana", "IA": "Iowa",
    "KS": "Kansas", "KY": "Kentucky", "LA": "Louisiana", "ME": "Maine",
    "MD": "Maryland", "MA": "Massachusetts", "MI": "Michigan", "MN": "Minnesota",
    "MS": "Mississippi", "MO": "Missouri", "MT": "Montana", "NE": "Nebraska",
    "NV": "Nevada", "NH": "New Hampshire", "NJ": "New Jersey", "NM": "New Mexico",
    "NY": "New York", "NC": "North Carolina", "ND": "North Dakota", "OH": "Ohio",
    "OK": "Oklahoma", "OR": "Oregon", "PA": "Pennsylvania", "RI": "Rhode Island",
    "SC": "South Carolina", "SD": "South Dakota", "TN": "Tennessee", "TX": "Texas",
    "UT": "Utah", "VT": "Vermont", "VA": "Virginia", "WA": "Washington",
    "WV": "West Virginia", "WI": "Wisconsin", "WY": "Wyoming",
}

_STATE_BY_NAME = {name.lower(): code for code, name in US_STATES.items()}

# Longest first: "county police department" must win over "county".
COUNTY_SUFFIXES = (
    "county police department",
    "police department",
    "county",
    "parish",
)

# States whose incidents cannot be weighted by arrests.
ARREST_UNREPORTED_STATES = frozenset({"AK", "FL", "DC"})

# Incident id -> (city, state) replacing an unverifiable recorded location.
INCIDENT_LOCATION_OVERRIDES: dict[int, tuple[str, str]] = {
    1696: ("Rush Springs", "OK"),
}

WILDCARD_STATE = "*"


@dataclass(frozen=True)
class CountyRename:
    """One entry of the county rename table."""
    state: str
    from_name: str
    to_name: str


@dataclass(frozen=True)
class DataRule:
    """A county dropped from one dataset, with the reason reported for it."""
    dataset: str
    state: str
    county: str
    reason: str


LEE_EXCLUSIONS = (
    DataRule("lee", "SD", "Shannon", "excluded by data rule: no demography"),
    DataRule("lee", "NM", "Dona Ana", "excluded by data rule: no incident data"),
)


def is_state_code(code: str) -> bool:
    """True for the 50 state codes plus DC."""
    return code in US_STATES


def normalize_state(value: str) -> str:
    """Return the two-letter code for a state given by code or full name."""
    text = " ".join(value.split())
    if text.upper() in US_STATES:
        return text.upper()
    code = _STATE_BY_NAME.get(text.lower())
    if code is None:
        raise ValueError(f"unknown state: {value!r}")
    return code


@lru_cache(maxsize=None)
def load_rename_table() -> tuple[CountyRename, ...]:
    """Read the packaged county rename table (state, from_name, to_name)."""
    source = resources.files("shooting_resample").joinpath("data/county_renames.csv")
    with source.open("rb") as handle:
        frame = pd.read_csv(handle, dtype=str, keep_default_na=False, comment="#")
    return tuple(
        CountyRename(state=row.state.strip().upper(), from_name=row.from_name.strip(), to_name=row.to_name.strip())
        for row in frame.itertuples(index=False)
    )


@lru_cache(maxsize=None)
def get_rename_index() -> dict[tuple[str, str], str]:
    """Rename table keyed by (state or '*', casefolded from_name)."""
    return {
        (entry.state, entry.from_name.casefold()): entry.to_name
        for entry in load_rename_table()
    }


def lee_exclusion(state: str, county: str) -> Optional[DataRule]:
    """The rule dropping this LEE county, if any."""
    for rule in LEE_EXCLUSIONS:
        if rule.state == state and rule.county == county:
            return rule
    return None
