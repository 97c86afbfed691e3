from __future__ import annotations
import logging
import math
from typing import Callable, List, Optional, Tuple, TypeVar

import numpy as np
from numpy.random import Generator
from scipy.spatial.distance import cdist
from scipy.stats import kstwo, kstwobign, spearmanr

from ..report import EmpiricalDistribution, TestReport
from ..util import (
    DCOR_MAX_SAMPLES,
    DT_REFINEMENT_FACTOR,
    N_PERMUTATIONS,
    SIGNIFICANCE_LEVEL,
    TREND_SIGNIFICANCE_LEVEL,
    rand_generator,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")
Cdf = Callable[[np.ndarray], np.ndarray]


def _as_distribution(sample) -> EmpiricalDistribution:
    if isinstance(sample, EmpiricalDistribution):
        return sample
    return EmpiricalDistribution(np.asarray(sample, dtype=float))


def ks_distance(a: EmpiricalDistribution, b: EmpiricalDistribution) -> float:
    points = np.union1d(a.samples, b.samples)
    return float(np.max(np.abs(a.cdf(points) - b.cdf(points))))


def ks_critical_value(n: float, m: Optional[float] = None, alpha: float = SIGNIFICANCE_LEVEL):
    """Asymptotic critical value of the one-sample (m None) or two-sample KS statistic."""
    size = n if m is None else n * m / (n + m)
    return float(kstwobign.isf(alpha) / math.sqrt(size))


def ks_two_sample(
    a: EmpiricalDistribution,
    b: EmpiricalDistribution,
    alpha: float = SIGNIFICANCE_LEVEL,
    permutations: int = 0,
    rng: Optional[Generator] = None,
) -> TestReport:
    """
    Two-sample KS test. Weighted samples use their effective sizes in the asymptotic
    critical value. With `permutations` > 0 (unweighted samples only) the critical value is
    the 1 - alpha quantile of the permutation distribution instead.
    """
    a, b = _as_distribution(a), _as_distribution(b)
    statistic = ks_distance(a, b)
    n, m = a.effective_size, b.effective_size
    notes = []
    if permutations > 0:
        if a.weights is not None or b.weights is not None:
            raise ValueError("the permutation variant needs unweighted samples")
        rng = rand_generator(rng)
        pooled = np.concatenate([a.samples, b.samples])
        null = np.empty(permutations)
        for i in range(permutations):
            shuffled = rng.permutation(pooled)
            null[i] = ks_distance(
                EmpiricalDistribution(shuffled[: len(a)]),
                EmpiricalDistribution(shuffled[len(a) :]),
            )
        critical = float(np.quantile(null, 1 - alpha))
        notes.append(f"permutation critical value over {permutations} permutations")
    else:
        critical = ks_critical_value(n, m, alpha)
        notes.append("asymptotic Kolmogorov critical value")
    return TestReport(
        test_name="ks-two-sample",
        statistic=statistic,
        critical_value=critical,
        passed=statistic <= critical,
        n_samples=len(a) + len(b),
        parameters={"alpha": alpha, "n_a_effective": n, "n_b_effective": m},
        notes=notes,
    )


def ks_one_sample(
    sample: EmpiricalDistribution,
    cdf: Cdf,
    left_cdf: Optional[Cdf] = None,
    alpha: float = SIGNIFICANCE_LEVEL,
) -> TestReport:
    """
    KS test against a reference CDF. Laws with atoms pass their left limit F(x-) as
    `left_cdf`; the statistic then also compares the left limits at the sample points.
    """
    sample = _as_distribution(sample)
    points = np.unique(sample.samples)
    ecdf = sample.cdf(points)
    ecdf_left = np.concatenate([[0.0], ecdf[:-1]])
    reference = np.asarray(cdf(points), dtype=float)
    reference_left = reference if left_cdf is None else np.asarray(left_cdf(points), dtype=float)
    statistic = float(
        max(np.max(np.abs(ecdf - reference)), np.max(np.abs(ecdf_left - reference_left)))
    )
    if sample.weights is None:
        critical = float(kstwo.isf(alpha, len(sample)))
    else:
        critical = ks_critical_value(sample.effective_size, alpha=alpha)
    return TestReport(
        test_name="ks-one-sample",
        statistic=statistic,
        critical_value=critical,
        passed=statistic <= critical,
        n_samples=len(sample),
        parameters={"alpha": alpha, "n_effective": sample.effective_size},
        notes=[] if left_cdf is None else ["reference law with atoms"],
    )


def _centered_distances(x: np.ndarray) -> np.ndarray:
    distances = cdist(x, x)
    return (
        distances
        - distances.mean(axis=0, keepdims=True)
        - distances.mean(axis=1, keepdims=True)
        + distances.mean()
    )


def _dcor(a: np.ndarray, b: np.ndarray) -> float:
    dcov = np.mean(a * b)
    denominator = math.sqrt(np.mean(a * a) * np.mean(b * b))
    return float(math.sqrt(max(dcov, 0.0) / denominator)) if denominator > 0 else 0.0


def _standardize(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(len(x), -1)
    scale = x.std(axis=0)
    return (x - x.mean(axis=0)) / np.where(scale > 0, scale, 1.0)


def distance_correlation_test(
    x: np.ndarray,
    y: np.ndarray,
    permutations: int = N_PERMUTATIONS,
    rng: Optional[Generator] = None,
    alpha: float = SIGNIFICANCE_LEVEL,
    max_samples: int = DCOR_MAX_SAMPLES,
) -> TestReport:
    """
    Permutation test of independence by distance correlation. Columns are standardized and
    only the first `max_samples` pairs are used (the statistic is quadratic in n).
    """
    if len(x) != len(y) or len(x) < 4:
        raise ValueError(f"need at least 4 paired samples, got {len(x)} and {len(y)}")
    n = min(len(x), max_samples)
    a = _centered_distances(_standardize(np.asarray(x)[:n]))
    b = _centered_distances(_standardize(np.asarray(y)[:n]))
    statistic = _dcor(a, b)
    rng = rand_generator(rng)
    null = np.empty(permutations)
    for i in range(permutations):
        p = rng.permutation(n)
        null[i] = _dcor(a, b[np.ix_(p, p)])
    critical = float(np.quantile(null, 1 - alpha))
    p_value = (1 + np.count_nonzero(null >= statistic)) / (1 + permutations)
    return TestReport(
        test_name="distance-correlation",
        statistic=statistic,
        critical_value=critical,
        passed=statistic <= critical,
        n_samples=n,
        parameters={"alpha": alpha, "permutations": permutations},
        statistics={"p_value": p_value},
    )


def spearman_trend(
    values: np.ndarray, alpha: float = TREND_SIGNIFICANCE_LEVEL, decreasing: bool = True
) -> Tuple[bool, float, float]:
    """One-sided Spearman test of a monotone trend along the sequence order: (passed, rho, p)."""
    values = np.asarray(values, dtype=float)
    if len(values) < 3:
        raise ValueError("a trend needs at least 3 points")
    result = spearmanr(
        np.arange(len(values)), values, alternative="less" if decreasing else "greater"
    )
    rho, p_value = float(result[0]), float(result[1])
    if math.isnan(p_value):
        # constant sequence
        return False, 0.0, 1.0
    return p_value < alpha, rho, p_value


def null_calibration(
    test: Callable[[Generator], TestReport], repetitions: int, seed: int
) -> Tuple[float, List[TestReport]]:
    """Pass rate of `test` over independent seeded repetitions on data it should accept."""
    reports = [test(np.random.default_rng([seed, i])) for i in range(repetitions)]
    return sum(r.passed for r in reports) / repetitions, reports


def dt_refinement(
    estimate: Callable[[float], T], dt: float, factor: int = DT_REFINEMENT_FACTOR
) -> Tuple[T, T]:
    """Runs `estimate` at dt and at dt / factor."""
    coarse = estimate(dt)
    fine = estimate(dt / factor)
    logger.debug("dt refinement %g -> %g: %s -> %s", dt, dt / factor, coarse, fine)
    return coarse, fine
