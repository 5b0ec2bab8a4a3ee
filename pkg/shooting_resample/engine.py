"""Monte Carlo resampling of victim race totals.

Every replication draws from its own generator, derived from the experiment
seed and the replication index, so results do not depend on how many
workers run the replications or in which order they finish.
"""

import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
import pandas as pd

from shooting_resample.demography import build_distributions, cumulative, distribution_for, draw_categories
from shooting_resample.exceptions import DistributionError, SimulationError
from shooting_resample.geography import ARREST_UNREPORTED_STATES
from shooting_resample.linkage import ProfileTable
from shooting_resample.models import (
    RACES,
    BodycamConfig,
    CountyKey,
    LocationMode,
    Race,
    ResolvedIncident,
    SimulationConfig,
    WeightingMode,
)

logger = logging.getLogger(__name__)


def derive_seed(master_seed: int, name: str) -> int:
    """64-bit seed for a named sub-stream of a run."""
    digest = hashlib.sha256(f"{master_seed}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def replication_rng(seed: int, index: int) -> np.random.Generator:
    """Independent PCG64 stream for one replication."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


@dataclass
class SimulationResult:
    """Replication x race matrix of victim totals."""
    label: str
    config: Union[SimulationConfig, BodycamConfig]
    counts: np.ndarray
    n_incidents: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[1] != len(RACES):
            raise SimulationError(f"{self.label}: counts must be (replications, {len(RACES)}), got {self.counts.shape}")
        if (self.counts < 0).any():
            raise SimulationError(f"{self.label}: negative counts")
        if not (self.counts.sum(axis=1) == self.n_incidents).all():
            raise SimulationError(f"{self.label}: a replication does not sum to {self.n_incidents}")

    @property
    def n_replications(self) -> int:
        return self.counts.shape[0]

    def column(self, race: Race) -> np.ndarray:
        return self.counts[:, RACES.index(race)]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.counts, columns=[race.value for race in RACES])
        frame.insert(0, "replication", np.arange(self.n_replications))
        return frame

    def sidecar(self) -> dict:
        return {
            "label": self.label,
            "config": self.config.model_dump(mode="json"),
            "n_incidents": self.n_incidents,
            "n_replications": self.n_replications,
            **self.metadata,
        }

    def write(self, directory: Union[str, os.PathLike]) -> tuple[Path, Path]:
        """Write ``<label>.csv`` and its ``<label>.json`` config sidecar."""
        directory = Path(directory)
        csv_path = directory / f"{self.label}.csv"
        json_path = directory / f"{self.label}.json"
        self.to_frame().to_csv(csv_path, index=False, lineterminator="\n")
        json_path.write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return csv_path, json_path


def _replicate(n_replications: int, replicate: Callable[[int], np.ndarray], workers: int) -> np.ndarray:
    counts = np.zeros((n_replications, len(RACES)), dtype=np.int64)
    if workers <= 1:
        for index in range(n_replications):
            counts[index] = replicate(index)
        return counts
    with ThreadPoolExecutor(max_workers=workers) as executor:
        for index, row in zip(range(n_replications), executor.map(replicate, range(n_replications))):
            counts[index] = row
    return counts


def _tally(categories: np.ndarray) -> np.ndarray:
    return np.bincount(categories, minlength=len(RACES))


class CountySampler:
    """Draws county indices with probability proportional to a weight."""

    def __init__(self, counties: Sequence[CountyKey], weights: Sequence[float]):
        weights = np.asarray(weights, dtype=float)
        if len(counties) == 0 or len(counties) != len(weights):
            raise SimulationError("county sampler needs one weight per county and at least one county")
        if (weights < 0).any() or weights.sum() <= 0:
            raise SimulationError("county weights must be non-negative with a positive total")
        self.counties = list(counties)
        self.probabilities = weights / weights.sum()
        self._cum = cumulative(self.probabilities)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return draw_categories(self._cum, rng.random(size))

    def __len__(self) -> int:
        return len(self.counties)


def run_fixed(
    incidents: Sequence[ResolvedIncident],
    profiles: ProfileTable,
    config: SimulationConfig,
    workers: int = 1,
) -> SimulationResult:
    """Redraw each incident's race from its own county's distribution."""
    if config.location != LocationMode.FIXED:
        raise SimulationError(f"run_fixed needs location=fixed, got {config.location.value}")
    try:
        distributions = build_distributions(profiles, (i.county for i in incidents), config.mode, config.vintage)
    except DistributionError as exc:
        raise SimulationError(str(exc)) from exc

    cum = np.array(
        [cumulative(distributions[i.county].as_array()) for i in incidents],
        dtype=float,
    ).reshape(len(incidents), len(RACES))
    n = len(incidents)
    seed = derive_seed(config.master_seed, config.label)

    def replicate(index: int) -> np.ndarray:
        rng = replication_rng(seed, index)
        return _tally(draw_categories(cum, rng.random(n)))

    logger.info("%s: %d replications over %d incidents", config.label, config.replications, n)
    counts = _replicate(config.replications, replicate, workers)
    return SimulationResult(label=config.label, config=config, counts=counts, n_incidents=n)


def eligible_counties(profiles: ProfileTable, config: SimulationConfig) -> tuple[list[CountyKey], np.ndarray, np.ndarray]:
    """Counties a random-location run may draw, with their weights and cumulative race tables."""
    keys, weights, tables = [], [], []
    for profile in sorted(profiles, key=lambda p: (p.key.state, p.key.canonical_name)):
        weight = profile.employment(config.weighting)
        if weight <= 0:
            continue
        if config.mode == WeightingMode.ARREST and profile.key.state in ARREST_UNREPORTED_STATES:
            continue
        try:
            dist = distribution_for(profile, config.mode, config.vintage)
        except DistributionError:
            continue
        keys.append(profile.key)
        weights.append(weight)
        tables.append(cumulative(dist.as_array()))
    return keys, np.asarray(weights, dtype=float), np.asarray(tables, dtype=float)


def run_random(
    n_incidents: int,
    profiles: ProfileTable,
    config: SimulationConfig,
    workers: int = 1,
) -> SimulationResult:
    """Redraw each incident's county by employment weight, then its race from that county.

    Each replication consumes ``n_incidents`` uniforms for counties followed
    by ``n_incidents`` uniforms for races.
    """
    if config.location != LocationMode.RANDOM:
        raise SimulationError(f"run_random needs location=random, got {config.location.value}")
    if n_incidents < 0:
        raise SimulationError("n_incidents must be non-negative")
    keys, weights, cum = eligible_counties(profiles, config)
    if not keys:
        raise SimulationError(
            f"{config.label}: no county has {config.weighting.value} employment and a usable "
            f"{config.mode.value}/{config.vintage.value} distribution"
        )
    sampler = CountySampler(keys, weights)
    seed = derive_seed(config.master_seed, config.label)

    def replicate(index: int) -> np.ndarray:
        rng = replication_rng(seed, index)
        counties = sampler.sample(rng, n_incidents)
        return _tally(draw_categories(cum[counties], rng.random(n_incidents)))

    logger.info(
        "%s: %d replications of %d draws over %d eligible counties",
        config.label, config.replications, n_incidents, len(sampler),
    )
    counts = _replicate(config.replications, replicate, workers)
    return SimulationResult(
        label=config.label,
        config=config,
        counts=counts,
        n_incidents=n_incidents,
        metadata={"eligible_counties": len(sampler)},
    )


def run_bodycam(config: BodycamConfig, workers: int = 1) -> SimulationResult:
    """Draw race counts i.i.d. from the reference proportions."""
    reference = np.array([config.reference_counts[race] for race in RACES], dtype=float)
    if reference.sum() <= 0:
        raise SimulationError("reference counts sum to zero")
    cum = cumulative(reference / reference.sum())
    draws = config.draws_per_replication
    seed = derive_seed(config.master_seed, config.label)

    def replicate(index: int) -> np.ndarray:
        rng = replication_rng(seed, index)
        return _tally(draw_categories(cum, rng.random(draws)))

    logger.info("%s: %d replications of %d draws", config.label, config.replications, draws)
    counts = _replicate(config.replications, replicate, workers)
    return SimulationResult(label=config.label, config=config, counts=counts, n_incidents=draws)


def bodycam_config(table: np.ndarray, replications: int = 1000, master_seed: int = 0) -> BodycamConfig:
    """Randomization test set-up from a 2x6 camera/no-camera table.

    The no-camera row is the reference and the camera row total is the
    number of draws per replication.
    """
    table = np.asarray(table)
    draws = int(table[0].sum())
    if draws < 1:
        raise SimulationError("no race-known incident had a body camera")
    return BodycamConfig(
        replications=replications,
        draws_per_replication=draws,
        reference_counts={race: int(table[1, i]) for i, race in enumerate(RACES)},
        master_seed=master_seed,
    )
