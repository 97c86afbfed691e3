import logging
from dataclasses import replace

import numpy as np

from ...conditioning import ConditionedSampleConfig, post_minimum_values, sample_conditioned_many
from ...models import LevyModelSpec
from ...report import TestReport
from ...util import SamplerExhaustedError, named_rng
from ..settings import CheckSettings
from ..stats import distance_correlation_test

logger = logging.getLogger(__name__)


def verify_independence_pre_post(
    spec: LevyModelSpec,
    x0: float,
    cfg: ConditionedSampleConfig,
    n_samples: int,
    lag: float,
    workers: int = 1,
) -> TestReport:
    """
    Distance-correlation permutation test between (m, U) and the post-minimum value `lag`
    after m, both taken on the conditioned part [0, T] of each path. A shuffled pairing
    (independent by construction) and the pairing of (m, U) with U itself (dependent by
    construction) are run as controls; the check fails when the dependent control is missed.
    """
    if not lag > 0:
        raise ValueError(f"lag must be positive, but got {lag}")
    batch = sample_conditioned_many(spec, replace(cfg, x0=x0), n_samples, workers)
    records, post = post_minimum_values(batch.paths, lag)
    if len(records) < 2:
        raise SamplerExhaustedError(
            f"fewer than 2 paths keep the conditioning up to m + {lag}",
            batch.acceptance_rate,
            batch.attempts,
        )
    pre = np.array([[r.m, r.U] for r in records])

    rng = named_rng(cfg.seed, "permutations")
    report = distance_correlation_test(pre, post, rng=rng)
    shuffled = distance_correlation_test(pre, rng.permutation(post), rng=rng)
    mismatched = distance_correlation_test(pre, pre[:, 1], rng=rng)
    report.test_name = "independence"
    report.seeds = [cfg.seed]
    report.passed = report.passed and not mismatched.passed
    report.model_label = spec.label
    report.parameters.update(
        {"x0": x0, "epsilon": cfg.epsilon, "dt": cfg.dt, "horizon": cfg.horizon, "lag": lag}
    )
    report.statistics.update(
        {
            "shuffled_statistic": shuffled.statistic,
            "shuffled_passed": float(shuffled.passed),
            "mismatched_statistic": mismatched.statistic,
            "mismatch_detected": float(not mismatched.passed),
            "acceptance_rate": batch.acceptance_rate,
            "dropped_fraction": 1 - len(records) / len(batch.paths),
        }
    )
    report.note("controls: shuffled pairs should pass, (m, U) against U must fail")
    if mismatched.passed:
        report.note("dependent control not detected: the test has no power at this size")
    report.table = {
        "m": list(pre[:, 0]),
        "U": list(pre[:, 1]),
        "post_value": list(post),
    }
    logger.info(
        "%s: dcor %.4f (critical %.4f)", spec.label, report.statistic, report.critical_value
    )
    return report


def run_independence(
    spec: LevyModelSpec, settings: CheckSettings, seed: int, workers: int = 1
) -> TestReport:
    cfg = ConditionedSampleConfig(
        settings.x0,
        settings.epsilon,
        settings.dt,
        settings.horizon,
        settings.max_rejections,
        seed,
    )
    return verify_independence_pre_post(
        spec, settings.x0, cfg, settings.n_paths, settings.lag, workers
    )
