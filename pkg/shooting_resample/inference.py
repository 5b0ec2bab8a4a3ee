"""Empirical p-values, multiple-testing flags, SD distances, chi-square and correlations."""

import logging
import math
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.special import gammaincc

from shooting_resample.engine import SimulationResult
from shooting_resample.exceptions import InferenceError
from shooting_resample.linkage import ProfileTable
from shooting_resample.models import (
    ARREST_RACES,
    RACES,
    BonferroniFlag,
    ChiSquareResult,
    EmploymentWeight,
    PValueEstimate,
    Race,
    RaceTestRow,
    TestReport,
    TieRule,
)
from shooting_resample.report import expected_totals

logger = logging.getLogger(__name__)


def empirical_pvalue(
    observed: float,
    resampled: Sequence[float],
    race: Optional[Race] = None,
    ties: TieRule = TieRule.EXCLUDE,
) -> PValueEstimate:
    """Two-sided p-value: twice the smaller tail count over the number of resamples.

    With ``TieRule.EXCLUDE`` resamples equal to the observed total fall in
    neither tail, so an observed value equal to every resample gets p = 0.
    ``TieRule.LOWER`` counts them in the lower tail.
    """
    values = np.asarray(resampled, dtype=float).ravel()
    if values.size == 0:
        raise InferenceError("empirical p-value needs at least one resample")
    n = int(values.size)
    n_greater = int(np.count_nonzero(values > observed))
    n_less = int(np.count_nonzero(values < observed))
    n_ties = n - n_greater - n_less
    lower = n_less + n_ties if ties == TieRule.LOWER else n_less
    extreme = min(n_greater, lower)
    return PValueEstimate(
        race=race,
        observed_total=float(observed),
        n_replications=n,
        n_greater=n_greater,
        n_less=n_less,
        n_ties=n_ties,
        tie_rule=ties,
        p_unbiased=min(1.0, 2 * extreme / n),
        p_biased=min(1.0, (2 * extreme + 1) / (n + 1)),
        se_bound=1.0 / (2.0 * math.sqrt(n)),
    )


def bonferroni(
    pvalues: Sequence[PValueEstimate],
    alpha: float = 0.05,
    family_size: Optional[int] = None,
) -> list[BonferroniFlag]:
    """Raw and Bonferroni-corrected significance at level alpha.

    The family size defaults to the number of p-values given; pass it
    explicitly to correct over a larger family of tests.
    """
    if not 0.0 < alpha < 1.0:
        raise InferenceError(f"alpha must lie in (0, 1), got {alpha}")
    k = family_size if family_size is not None else len(pvalues)
    if pvalues and k < 1:
        raise InferenceError(f"family size must be positive, got {k}")
    corrected = alpha / k if k else alpha
    return [
        BonferroniFlag(
            race=estimate.race,
            p_value=estimate.p_unbiased,
            threshold=alpha,
            corrected_threshold=corrected,
            family_size=k,
            raw=estimate.p_unbiased < alpha,
            bonferroni=estimate.p_unbiased < corrected,
        )
        for estimate in pvalues
    ]


def sd_distance(observed: float, resampled: Sequence[float]) -> float:
    """Distance of the observed total from the resample mean in sample standard deviations."""
    values = np.asarray(resampled, dtype=float).ravel()
    if values.size < 2:
        raise InferenceError("SD distance needs at least two resamples")
    sd = float(values.std(ddof=1))
    if sd == 0.0:
        raise InferenceError("SD distance undefined: resamples have zero variance")
    return abs(float(observed) - float(values.mean())) / sd


def chi_square(table: Sequence[Sequence[int]]) -> ChiSquareResult:
    """Pearson chi-square test of independence, no continuity correction."""
    observed = np.asarray(table)
    if observed.ndim != 2 or observed.shape[0] < 2 or observed.shape[1] < 2:
        raise InferenceError(f"chi-square needs at least a 2x2 table, got shape {observed.shape}")
    if not np.issubdtype(observed.dtype, np.number) or (observed < 0).any():
        raise InferenceError("chi-square counts must be non-negative numbers")
    observed = observed.astype(float)
    rows = observed.sum(axis=1)
    cols = observed.sum(axis=0)
    if (rows <= 0).any() or (cols <= 0).any():
        raise InferenceError("chi-square table has a zero row or column total")

    expected = np.outer(rows, cols) / observed.sum()
    statistic = float(((observed - expected) ** 2 / expected).sum())
    dof = (observed.shape[0] - 1) * (observed.shape[1] - 1)
    p_value = float(gammaincc(dof / 2.0, statistic / 2.0))
    logger.debug("chi-square %.4f on %d dof, p=%.4f", statistic, dof, p_value)
    return ChiSquareResult(
        statistic=statistic,
        dof=dof,
        p_value=p_value,
        observed=[[int(v) for v in row] for row in np.asarray(table)],
        expected=expected.tolist(),
    )


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Product-moment correlation."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size or x.size < 2:
        raise InferenceError(f"pearson needs two equal-length samples of size >= 2, got {x.size} and {y.size}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise InferenceError("pearson undefined: zero variance")
    return float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))


def employment_correlations(profiles: ProfileTable) -> dict:
    """Officer employment against total employment and against arrests by race."""
    employed = [p for p in profiles if p.officers is not None]
    officers = [p.officers for p in employed]
    total = [p.employment(EmploymentWeight.TOTAL) for p in employed]
    with_arrests = [p for p in employed if p.arrests is not None]
    arrest_officers = [p.officers for p in with_arrests]

    result = {
        "n_employment": len(employed),
        "n_arrests": len(with_arrests),
        "officers_vs_total": pearson(officers, total),
        "officers_vs_arrests": {
            race.value: pearson(arrest_officers, [p.arrests[race] for p in with_arrests])
            for race in ARREST_RACES
        },
        "officers_vs_all_arrests": pearson(arrest_officers, [sum(p.arrests.values()) for p in with_arrests]),
    }
    logger.info(
        "Officers vs total employment r=%.3f over %d counties",
        result["officers_vs_total"], result["n_employment"],
    )
    return result


def build_test_report(
    result: SimulationResult,
    observed: Mapping[Race, int],
    alpha: float = 0.05,
    family_size: Optional[int] = None,
    ties: TieRule = TieRule.EXCLUDE,
    n_incidents: Optional[int] = None,
) -> TestReport:
    """Per-race inference for one simulation against observed totals.

    Args:
        result: SimulationResult to test against
        observed: Observed victim totals by race
        alpha: Significance level
        family_size: Number of tests the Bonferroni correction divides by;
            defaults to the six races
        ties: Where resamples equal to the observed total are counted
        n_incidents: Observed incident count, defaults to the result's

    Returns:
        TestReport with one row per race
    """
    estimates = [empirical_pvalue(observed.get(race, 0), result.column(race), race, ties) for race in RACES]
    flags = bonferroni(estimates, alpha, family_size)
    expected = expected_totals(result)

    rows = []
    for race, estimate, flag in zip(RACES, estimates, flags):
        column = result.column(race).astype(float)
        sd = float(column.std(ddof=1)) if column.size > 1 else 0.0
        distance = sd_distance(observed.get(race, 0), column) if sd > 0 else None
        rows.append(RaceTestRow(
            race=race,
            observed=int(observed.get(race, 0)),
            mean=float(column.mean()),
            sd=sd,
            expected_total=expected[race],
            p_unbiased=estimate.p_unbiased,
            p_biased=estimate.p_biased,
            se_bound=estimate.se_bound,
            sd_distance=distance,
            raw_significant=flag.raw,
            bonferroni_significant=flag.bonferroni,
        ))
    return TestReport(
        label=result.label,
        n_replications=result.n_replications,
        n_incidents=result.n_incidents if n_incidents is None else n_incidents,
        alpha=alpha,
        family_size=flags[0].family_size,
        tie_rule=ties,
        rows=rows,
    )

