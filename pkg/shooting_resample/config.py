"""Run configuration: a dotenv-style key-value file, or the run.json of an earlier run."""

import json
import logging
import os
from pathlib import Path
from typing import Optional, Union

from dotenv import dotenv_values
from pydantic import Field, ValidationError, field_validator, model_validator

from shooting_resample.exceptions import ConfigError, MissingInputError
from shooting_resample.models import (
    MAX_SEED,
    EmploymentWeight,
    LocationMode,
    SimulationConfig,
    TieRule,
    Vintage,
    WeightingMode,
    _Frozen,
)

logger = logging.getLogger(__name__)

KNOWN_KEYS = (
    "FIXTURE_DIR",
    "OUT_DIR",
    "MASTER_SEED",
    "ALPHA",
    "FAMILY_SIZE",
    "TIES",
    "EXPERIMENTS",
    "WEIGHTING",
    "BODYCAM",
    "BODYCAM_REPLICATIONS",
    "WORKERS",
    "KDE_GRID_POINTS",
    "LOG_LEVEL",
)


class BodycamSettings(_Frozen):
    """Randomization test settings; the counts themselves come from the incident data."""
    replications: int = Field(default=1000, ge=1)


class RunConfig(_Frozen):
    """Everything one run needs besides the fixtures themselves."""
    fixture_dir: Path = Field(default=Path("fixtures"), description="Directory holding the fixture CSVs")
    out_dir: Path = Field(default=Path("out"), description="Output directory, replaced on success")
    master_seed: int = Field(default=0, ge=0, le=MAX_SEED)
    experiments: list[SimulationConfig] = Field(min_length=1)
    bodycam: Optional[BodycamSettings] = None
    alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    family_size: Optional[int] = Field(default=None, ge=1, description="Bonferroni family; defaults to the six races")
    ties: TieRule = TieRule.EXCLUDE
    workers: int = Field(default=1, ge=1)
    kde_grid_points: int = Field(default=512, ge=512)
    log_level: str = "INFO"

    @field_validator("log_level")
    @classmethod
    def _level(cls, value: str) -> str:
        value = value.strip().upper()
        if value not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"unknown log level {value!r}")
        return value

    @model_validator(mode="after")
    def _one_seed(self) -> "RunConfig":
        labels = [experiment.label for experiment in self.experiments]
        duplicates = sorted({label for label in labels if labels.count(label) > 1})
        if duplicates:
            raise ValueError(f"duplicate experiments: {', '.join(duplicates)}")
        if any(experiment.master_seed != self.master_seed for experiment in self.experiments):
            raise ValueError("every experiment must carry the run master_seed")
        return self

    def with_overrides(
        self,
        fixture_dir: Optional[Union[str, os.PathLike]] = None,
        out_dir: Optional[Union[str, os.PathLike]] = None,
        seed: Optional[int] = None,
        workers: Optional[int] = None,
    ) -> "RunConfig":
        """Copy with command-line overrides applied and revalidated."""
        data = self.model_dump()
        if fixture_dir is not None:
            data["fixture_dir"] = Path(fixture_dir)
        if out_dir is not None:
            data["out_dir"] = Path(out_dir)
        if seed is not None:
            data["master_seed"] = seed
            data["experiments"] = [{**experiment, "master_seed": seed} for experiment in data["experiments"]]
        if workers is not None:
            data["workers"] = workers
        return _validate(data, "command-line overrides")


def parse_experiments(
    text: str,
    master_seed: int = 0,
    weighting: EmploymentWeight = EmploymentWeight.OFFICERS,
) -> list[SimulationConfig]:
    """Parse ``mode:location:vintage[:replications]`` items separated by commas."""
    experiments = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        parts = [part.strip() for part in item.split(":")]
        if len(parts) not in (3, 4):
            raise ConfigError(f"experiment {item!r} is not mode:location:vintage[:replications]")
        try:
            experiments.append(SimulationConfig(
                mode=WeightingMode(parts[0]),
                location=LocationMode(parts[1]),
                vintage=Vintage(parts[2]),
                replications=int(parts[3]) if len(parts) == 4 else None,
                master_seed=master_seed,
                weighting=weighting,
            ))
        except (ValueError, ValidationError) as exc:
            raise ConfigError(f"experiment {item!r}: {exc}") from None
    return experiments


def _flag(value: str, key: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off", ""):
        return False
    raise ConfigError(f"{key} must be a boolean, got {value!r}")


def _integer(value: str, key: str) -> int:
    try:
        return int(value.strip())
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {value!r}") from None


def _validate(data: dict, source: str) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid run configuration ({source}): {exc}") from None


def config_from_mapping(values: dict[str, Optional[str]], source: str = "<mapping>") -> RunConfig:
    """Build a RunConfig from key-value pairs as read from a config file."""
    values = {key.upper(): (value or "") for key, value in values.items()}
    for key in sorted(set(values) - set(KNOWN_KEYS)):
        logger.warning("%s: ignoring unknown key %s", source, key)
    if not values.get("EXPERIMENTS", "").strip():
        raise ConfigError(f"{source}: EXPERIMENTS is required")

    seed = _integer(values.get("MASTER_SEED") or "0", "MASTER_SEED")
    try:
        weighting = EmploymentWeight(values.get("WEIGHTING", "").strip().lower() or EmploymentWeight.OFFICERS.value)
        ties = TieRule(values.get("TIES", "").strip().lower() or TieRule.EXCLUDE.value)
        alpha = float(values.get("ALPHA") or 0.05)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None

    data = {
        "master_seed": seed,
        "experiments": [e.model_dump() for e in parse_experiments(values["EXPERIMENTS"], seed, weighting)],
        "alpha": alpha,
        "ties": ties,
    }
    if values.get("FIXTURE_DIR"):
        data["fixture_dir"] = Path(values["FIXTURE_DIR"])
    if values.get("OUT_DIR"):
        data["out_dir"] = Path(values["OUT_DIR"])
    if values.get("FAMILY_SIZE"):
        data["family_size"] = _integer(values["FAMILY_SIZE"], "FAMILY_SIZE")
    if _flag(values.get("BODYCAM", ""), "BODYCAM"):
        replications = values.get("BODYCAM_REPLICATIONS")
        data["bodycam"] = {"replications": _integer(replications, "BODYCAM_REPLICATIONS")} if replications else {}
    if values.get("WORKERS"):
        data["workers"] = _integer(values["WORKERS"], "WORKERS")
    if values.get("KDE_GRID_POINTS"):
        data["kde_grid_points"] = _integer(values["KDE_GRID_POINTS"], "KDE_GRID_POINTS")
    if values.get("LOG_LEVEL"):
        data["log_level"] = values["LOG_LEVEL"]
    return _validate(data, source)


def load_run_config(path: Union[str, os.PathLike]) -> RunConfig:
    """Read a run configuration file.

    A ``.json`` file is read as the ``run.json`` written by a previous run
    and reproduces that run; anything else is read as ``KEY=value`` lines.

    Raises:
        MissingInputError: the file does not exist
        ConfigError: the file is not a valid configuration
    """
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(path, "config")
    if path.suffix.lower() == ".json":
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from None
        return _validate(payload.get("config", payload), str(path))
    return config_from_mapping(dotenv_values(path), str(path))
