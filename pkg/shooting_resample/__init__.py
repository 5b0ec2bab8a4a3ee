"""Shooting Resample - Monte Carlo resampling tests of victim race in fatal police shootings."""

__version__ = "0.1.0"

from shooting_resample.models import (
    Race,
    Vintage,
    WeightingMode,
    LocationMode,
    EmploymentWeight,
    TieRule,
    CountyKey,
    CountyProfile,
    RaceDistribution,
    SimulationConfig,
    BodycamConfig,
    TestReport,
)
from shooting_resample.ingest import load_fixtures
from shooting_resample.linkage import canonicalize, build_profiles, link_incidents, subset_incidents
from shooting_resample.demography import (
    population_distribution,
    arrest_distribution,
    pooled_population_shares,
    sample_race,
)
from shooting_resample.engine import SimulationResult, run_fixed, run_random, run_bodycam
from shooting_resample.inference import empirical_pvalue, bonferroni, sd_distance, chi_square, pearson
from shooting_resample.report import expected_totals, kde, emit_figures
from shooting_resample.config import RunConfig, load_run_config
from shooting_resample.pipeline import run_pipeline

__all__ = [
    "__version__",
    # Models
    "Race",
    "Vintage",
    "WeightingMode",
    "LocationMode",
    "EmploymentWeight",
    "TieRule",
    "CountyKey",
    "CountyProfile",
    "RaceDistribution",
    "SimulationConfig",
    "BodycamConfig",
    "TestReport",
    # Data
    "load_fixtures",
    "canonicalize",
    "build_profiles",
    "link_incidents",
    "subset_incidents",
    # Sampling
    "population_distribution",
    "arrest_distribution",
    "pooled_population_shares",
    "sample_race",
    "SimulationResult",
    "run_fixed",
    "run_random",
    "run_bodycam",
    # Inference and reporting
    "empirical_pvalue",
    "bonferroni",
    "sd_distance",
    "chi_square",
    "pearson",
    "expected_totals",
    "kde",
    "emit_figures",
    # Runs
    "RunConfig",
    "load_run_config",
    "run_pipeline",
]
