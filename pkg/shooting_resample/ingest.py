"""Parsers for the fixture datasets.

Each parser reads one comma-delimited UTF-8 file with a header row and returns
validated, immutable row models in file order. Parsers reject rather than
coerce: a bad cell raises an error naming the dataset, line and column.
"""

import csv
import datetime
import hashlib
import io
import logging
import os
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Callable, Iterable, Iterator, Optional, Sequence, Union

import pandas as pd
from pydantic import BaseModel, ValidationError

from shooting_resample.exceptions import (
    ConsistencyError,
    InputError,
    MissingInputError,
    ParseError,
    SchemaError,
    UniquenessError,
)
from shooting_resample.geography import normalize_state
from shooting_resample.models import (
    ARREST_RACES,
    CENSUS_RACES,
    RawArrestRow,
    RawCityRow,
    RawCodeRow,
    RawDemographyRow,
    RawLeeRow,
    RawShootingRow,
    Race,
    Vintage,
)

logger = logging.getLogger(__name__)

Source = Union[str, os.PathLike, BinaryIO]


@dataclass(frozen=True)
class FixtureDataset:
    """Metadata for one fixture file."""
    name: str
    file_name: str
    description: str
    columns: tuple[str, ...]


DEM_COLUMNS = (
    ("state", "county_name", "total_pop")
    + tuple(race.value for race in CENSUS_RACES)
    + tuple(f"H_{race.value}" for race in CENSUS_RACES)
)

WP = FixtureDataset(
    name="wp",
    file_name="wp.csv",
    description="Fatal police shootings, one row per incident",
    columns=("id", "date", "city", "state", "race", "body_camera"),
)
DEM_2010 = FixtureDataset(
    name="dem2010",
    file_name="dem2010.csv",
    description="County population by race and Hispanic origin, 2010 census",
    columns=DEM_COLUMNS,
)
DEM_2016 = FixtureDataset(
    name="dem2016",
    file_name="dem2016.csv",
    description="County population by race and Hispanic origin, 2016 projection",
    columns=DEM_COLUMNS,
)
LEE = FixtureDataset(
    name="lee",
    file_name="lee.csv",
    description="Full-time law enforcement employees by county",
    columns=("state", "county_name", "officers", "civilians"),
)
ARREST = FixtureDataset(
    name="arrest",
    file_name="arrest.csv",
    description="County arrests by offense and race, keyed by UCR code",
    columns=("ucr_code", "offense") + tuple(race.value for race in ARREST_RACES),
)
CODES = FixtureDataset(
    name="codes",
    file_name="codes.csv",
    description="County UCR/FIPS code crosswalk",
    columns=("state", "county_name", "ucr_code", "fips_code"),
)
CITIES = FixtureDataset(
    name="cities",
    file_name="cities.csv",
    description="City to county map; a city spanning counties has one row per county",
    columns=("city", "state", "county_name"),
)

CORE_DATASETS = (WP, DEM_2010, DEM_2016, LEE, ARREST, CODES)
ALL_DATASETS = CORE_DATASETS + (CITIES,)
DEM_BY_VINTAGE = {Vintage.CENSUS_2010: DEM_2010, Vintage.PROJ_2016: DEM_2016}

_TRUE = {"true", "t", "1", "yes", "y"}
_FALSE = {"false", "f", "0", "no", "n"}
_COUNT = re.compile(r"^[0-9]+$")
_LINE = re.compile(r"line ([0-9]+)")


def transliterate(text: str) -> str:
    """Fold text to ASCII, dropping diacritics (e.g. 'Doña' -> 'Dona')."""
    decomposed = unicodedata.normalize("NFKD", text)
    stripped = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
    return stripped.encode("ascii", "ignore").decode("ascii")


# ============================================================================
# CELL PARSING
# ============================================================================

@dataclass
class _Row:
    """One data row with enough context to report errors against it."""
    dataset: str
    line: int
    cells: dict[str, object] = field(default_factory=dict)

    def raw(self, column: str) -> str:
        value = self.cells[column]
        if not isinstance(value, str):
            raise ParseError(f"missing field {column!r}", self.dataset, self.line)
        return value.strip()

    def text(self, column: str) -> str:
        value = " ".join(transliterate(self.raw(column)).split())
        if not value:
            raise SchemaError(f"blank {column!r}", self.dataset, self.line)
        return value

    def count(self, column: str) -> int:
        value = self.raw(column)
        if not value:
            raise SchemaError(f"blank count in {column!r}", self.dataset, self.line)
        if not _COUNT.match(value):
            raise SchemaError(f"{column!r} is not a non-negative integer: {value!r}", self.dataset, self.line)
        return int(value)

    def boolean(self, column: str) -> bool:
        value = self.raw(column).lower()
        if value in _TRUE:
            return True
        if value in _FALSE:
            return False
        raise SchemaError(f"{column!r} is not a boolean: {value!r}", self.dataset, self.line)

    def day(self, column: str) -> datetime.date:
        value = self.raw(column)
        try:
            return datetime.date.fromisoformat(value)
        except ValueError:
            raise SchemaError(f"{column!r} is not an ISO date: {value!r}", self.dataset, self.line) from None

    def state(self, column: str = "state") -> str:
        try:
            return normalize_state(self.raw(column))
        except ValueError as exc:
            raise SchemaError(str(exc), self.dataset, self.line) from None

    def build(self, model: type[BaseModel], **values) -> BaseModel:
        try:
            return model(**values)
        except ValidationError as exc:
            first = exc.errors()[0]
            where = ".".join(str(part) for part in first.get("loc", ()))
            message = first.get("msg", str(exc))
            raise SchemaError(f"{where}: {message}" if where else message, self.dataset, self.line) from None


def _payload(source: Source) -> bytes:
    if hasattr(source, "read"):
        return source.read()
    return Path(source).read_bytes()


def _record_lines(text: str, dataset: FixtureDataset) -> list[int]:
    """Line number of every data record; a record whose field count differs from the header's is rejected."""
    reader = csv.reader(io.StringIO(text))
    width = None
    lines = []
    for record in reader:
        if not record:
            continue
        if width is None:
            width = len(record)
            continue
        if len(record) != width:
            raise ParseError(f"expected {width} fields, found {len(record)}", dataset.name, reader.line_num)
        lines.append(reader.line_num)
    return lines


def _read_rows(source: Source, dataset: FixtureDataset) -> Iterator[_Row]:
    try:
        text = _payload(source).decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8: {exc}", dataset.name) from None
    try:
        lines = _record_lines(text, dataset)
        frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise ParseError("no header row", dataset.name) from None
    except (pd.errors.ParserError, csv.Error) as exc:
        match = _LINE.search(str(exc))
        line = int(match.group(1)) if match else None
        raise ParseError(f"malformed row: {exc}", dataset.name, line) from None

    frame.columns = [str(column).strip() for column in frame.columns]
    missing = [column for column in dataset.columns if column not in frame.columns]
    if missing:
        raise SchemaError(f"header lacks columns {missing}", dataset.name, 1)

    for line, record in zip(lines, frame[list(dataset.columns)].itertuples(index=False, name=None)):
        yield _Row(dataset.name, line, dict(zip(dataset.columns, record)))


def _require_unique(rows: Iterable, key: Callable, dataset: str, what: str) -> None:
    seen: dict = {}
    for line, row in enumerate(rows, start=2):
        value = key(row)
        if value in seen:
            raise UniquenessError(f"duplicate {what} {value!r} (first on line {seen[value]})", dataset, line)
        seen[value] = line


# ============================================================================
# PARSERS
# ============================================================================

def parse_shootings(source: Source) -> list[RawShootingRow]:
    """Parse the incident file. A blank race cell yields ``race=None``."""
    rows = []
    for row in _read_rows(source, WP):
        code = row.raw("race")
        race = None
        if code:
            try:
                race = Race.from_incident_code(code)
            except ValueError:
                raise SchemaError(f"unknown race code {code!r}", WP.name, row.line) from None
        rows.append(row.build(
            RawShootingRow,
            id=row.count("id"),
            date=row.day("date"),
            city=row.text("city"),
            state=row.state(),
            race=race,
            body_camera=row.boolean("body_camera"),
        ))
    _require_unique(rows, lambda r: r.id, WP.name, "id")
    logger.info("Parsed %d incidents", len(rows))
    return rows


def parse_demography(source: Source, vintage: Vintage) -> list[RawDemographyRow]:
    """Parse one demography vintage; one row per county."""
    dataset = DEM_BY_VINTAGE[vintage]
    rows = []
    for row in _read_rows(source, dataset):
        state = row.state()
        county = row.text("county_name")
        total = row.count("total_pop")
        pop = {race: row.count(race.value) for race in CENSUS_RACES}
        hispanic = {race: row.count(f"H_{race.value}") for race in CENSUS_RACES}
        if sum(pop.values()) != total:
            raise ConsistencyError(
                f"{county}, {state}: race totals {sum(pop.values())} != total population {total}",
                dataset.name, row.line,
            )
        for race in CENSUS_RACES:
            if hispanic[race] > pop[race]:
                raise ConsistencyError(
                    f"{county}, {state}: Hispanic {race.value} {hispanic[race]} exceeds {race.value} {pop[race]}",
                    dataset.name, row.line,
                )
        rows.append(row.build(
            RawDemographyRow,
            state=state,
            county_name=county,
            vintage=vintage,
            total_pop=total,
            pop_by_race=pop,
            hispanic_by_race=hispanic,
        ))
    _require_unique(rows, lambda r: (r.state, r.county_name), dataset.name, "county")
    logger.info("Parsed %d %s counties", len(rows), vintage.value)
    return rows


def parse_lee(source: Source) -> list[RawLeeRow]:
    """Parse law enforcement employment; repeated counties are kept for later summation."""
    rows = [
        row.build(
            RawLeeRow,
            state=row.state(),
            county_name=row.text("county_name"),
            officers=row.count("officers"),
            civilians=row.count("civilians"),
        )
        for row in _read_rows(source, LEE)
    ]
    logger.info("Parsed %d employment rows", len(rows))
    return rows


def parse_arrests(source: Source) -> list[RawArrestRow]:
    """Parse arrests by offense; a county may have many offense rows."""
    rows = [
        row.build(
            RawArrestRow,
            ucr_code=row.count("ucr_code"),
            offense=row.text("offense"),
            arrests_by_race={race: row.count(race.value) for race in ARREST_RACES},
        )
        for row in _read_rows(source, ARREST)
    ]
    logger.info("Parsed %d arrest rows covering %d UCR codes", len(rows), len({r.ucr_code for r in rows}))
    return rows


def parse_codes(source: Source) -> list[RawCodeRow]:
    """Parse the UCR/FIPS crosswalk; both codes must be unique."""
    rows = [
        row.build(
            RawCodeRow,
            state=row.state(),
            county_name=row.text("county_name"),
            ucr_code=row.count("ucr_code"),
            fips_code=row.count("fips_code"),
        )
        for row in _read_rows(source, CODES)
    ]
    _require_unique(rows, lambda r: r.ucr_code, CODES.name, "ucr_code")
    _require_unique(rows, lambda r: r.fips_code, CODES.name, "fips_code")
    logger.info("Parsed %d code rows", len(rows))
    return rows


def parse_cities(source: Source) -> list[RawCityRow]:
    """Parse the city-to-county map."""
    rows = [
        row.build(
            RawCityRow,
            city=row.text("city"),
            state=row.state(),
            county_name=row.text("county_name"),
        )
        for row in _read_rows(source, CITIES)
    ]
    _require_unique(rows, lambda r: (r.city.casefold(), r.state, r.county_name.casefold()), CITIES.name, "city/county pair")
    logger.info("Parsed %d city rows", len(rows))
    return rows


# ============================================================================
# SERIALIZATION
# ============================================================================

def _shooting_record(row: RawShootingRow) -> dict:
    race = "" if row.race is None else ("N" if row.race == Race.NA else row.race.value)
    return {
        "id": row.id,
        "date": row.date.isoformat(),
        "city": row.city,
        "state": row.state,
        "race": race,
        "body_camera": "True" if row.body_camera else "False",
    }


def _demography_record(row: RawDemographyRow) -> dict:
    record = {"state": row.state, "county_name": row.county_name, "total_pop": row.total_pop}
    record.update({race.value: row.pop_by_race[race] for race in CENSUS_RACES})
    record.update({f"H_{race.value}": row.hispanic_by_race[race] for race in CENSUS_RACES})
    return record


def _arrest_record(row: RawArrestRow) -> dict:
    record = {"ucr_code": row.ucr_code, "offense": row.offense}
    record.update({race.value: row.arrests_by_race[race] for race in ARREST_RACES})
    return record


_RECORDS: dict[str, Callable[[BaseModel], dict]] = {
    WP.name: _shooting_record,
    DEM_2010.name: _demography_record,
    DEM_2016.name: _demography_record,
    LEE.name: lambda row: row.model_dump(),
    ARREST.name: _arrest_record,
    CODES.name: lambda row: row.model_dump(),
    CITIES.name: lambda row: row.model_dump(),
}


def write_rows(dataset: FixtureDataset, rows: Sequence[BaseModel], sink: Union[str, os.PathLike, BinaryIO]) -> None:
    """Write parsed rows back in the dataset's fixture schema."""
    to_record = _RECORDS[dataset.name]
    frame = pd.DataFrame([to_record(row) for row in rows], columns=list(dataset.columns))
    frame.to_csv(sink, index=False, lineterminator="\n", encoding="utf-8")


# ============================================================================
# FIXTURE DIRECTORY
# ============================================================================

@dataclass
class FixtureSet:
    """All parsed fixture tables plus the checksum of every file read."""
    shootings: list[RawShootingRow]
    demography: dict[Vintage, list[RawDemographyRow]]
    lee: list[RawLeeRow]
    arrests: list[RawArrestRow]
    codes: list[RawCodeRow]
    cities: Optional[list[RawCityRow]] = None
    checksums: dict[str, str] = field(default_factory=dict)


def _read_bytes(fixture_dir: Path, dataset: FixtureDataset) -> bytes:
    path = fixture_dir / dataset.file_name
    if not path.is_file():
        raise MissingInputError(path, dataset.name)
    return path.read_bytes()


def _parse(dataset: FixtureDataset, payload: bytes):
    stream = io.BytesIO(payload)
    if dataset.name == WP.name:
        return parse_shootings(stream)
    if dataset.name == DEM_2010.name:
        return parse_demography(stream, Vintage.CENSUS_2010)
    if dataset.name == DEM_2016.name:
        return parse_demography(stream, Vintage.PROJ_2016)
    if dataset.name == LEE.name:
        return parse_lee(stream)
    if dataset.name == ARREST.name:
        return parse_arrests(stream)
    if dataset.name == CODES.name:
        return parse_codes(stream)
    return parse_cities(stream)


def missing_datasets(fixture_dir: Union[str, os.PathLike], datasets: Sequence[FixtureDataset] = CORE_DATASETS) -> list[FixtureDataset]:
    """Datasets whose file is absent from the directory."""
    root = Path(fixture_dir)
    return [dataset for dataset in datasets if not (root / dataset.file_name).is_file()]


def load_fixtures(fixture_dir: Union[str, os.PathLike], include_cities: bool = True) -> FixtureSet:
    """Parse every fixture file in a directory.

    Args:
        fixture_dir: Directory holding wp.csv, dem2010.csv, dem2016.csv,
            lee.csv, arrest.csv, codes.csv and (unless include_cities is
            False) cities.csv
        include_cities: Whether the city-to-county map is required

    Returns:
        FixtureSet with SHA-256 checksums keyed by file name
    """
    root = Path(fixture_dir)
    datasets = ALL_DATASETS if include_cities else CORE_DATASETS
    payloads = {dataset.name: _read_bytes(root, dataset) for dataset in datasets}
    tables = {dataset.name: _parse(dataset, payloads[dataset.name]) for dataset in datasets}
    checksums = {
        dataset.file_name: hashlib.sha256(payloads[dataset.name]).hexdigest()
        for dataset in datasets
    }
    logger.info("Loaded fixtures from %s", root)
    return FixtureSet(
        shootings=tables[WP.name],
        demography={
            Vintage.CENSUS_2010: tables[DEM_2010.name],
            Vintage.PROJ_2016: tables[DEM_2016.name],
        },
        lee=tables[LEE.name],
        arrests=tables[ARREST.name],
        codes=tables[CODES.name],
        cities=tables.get(CITIES.name),
        checksums=checksums,
    )


def ingest_summary(fixture_dir: Union[str, os.PathLike]) -> dict:
    """Validate each fixture file independently and summarise the outcome.

    Args:
        fixture_dir: Directory to validate

    Returns:
        Dictionary with per-dataset row counts, the datasets that are
        missing, and every schema violation found (one per file at most,
        since parsing stops at a file's first bad row)
    """
    root = Path(fixture_dir)
    missing = missing_datasets(root, CORE_DATASETS)
    present = [d for d in ALL_DATASETS if d not in missing and (root / d.file_name).is_file()]
    datasets = []
    violations = []
    for dataset in present:
        try:
            rows = _parse(dataset, (root / dataset.file_name).read_bytes())
        except InputError as exc:
            violations.append({"dataset": dataset.name, "line": exc.line, "error": str(exc)})
            datasets.append({"name": dataset.name, "file": dataset.file_name, "rows": None})
            continue
        entry = {"name": dataset.name, "file": dataset.file_name, "rows": len(rows)}
        if dataset.name == ARREST.name:
            entry["ucr_codes"] = len({row.ucr_code for row in rows})
        if dataset.name == WP.name:
            entry["race_missing"] = sum(1 for row in rows if row.race is None)
        datasets.append(entry)
    return {
        "fixture_dir": str(root),
        "datasets": datasets,
        "missing": [dataset.file_name for dataset in missing],
        "violations": violations,
    }
