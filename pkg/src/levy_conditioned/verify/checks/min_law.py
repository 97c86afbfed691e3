import logging
import math
from dataclasses import replace

import numpy as np

from ...conditioning import ConditionedSampleConfig, decompose_at_minimum, sample_conditioned_many
from ...harmonic import HarmonicEstimate
from ...models import LevyModelSpec, classify
from ...report import TestReport
from ...util import EQUALITY_N_STDERR, HarmonicRangeError, named_rng
from ..reference import minimum_law
from ..settings import CheckSettings, harmonic_for
from ..stats import ks_one_sample

logger = logging.getLogger(__name__)


def verify_min_law(
    spec: LevyModelSpec,
    x0: float,
    h_est: HarmonicEstimate,
    cfg: ConditionedSampleConfig,
    n_samples: int,
    workers: int = 1,
) -> TestReport:
    """
    KS test of the minimum U over the conditioned part [0, T] of paths from x0 against
    P(U >= y) = h(x0 - y)/h(x0), which puts mass h(0)/h(x0) on U = x0.
    """
    if h_est.levels[0] > 0 or h_est.levels[-1] < x0:
        raise HarmonicRangeError(f"h estimate does not cover [0, {x0}]")
    batch = sample_conditioned_many(spec, replace(cfg, x0=x0), n_samples, workers)
    conditioned = [path.conditioned for path in batch.paths]
    records = [decompose_at_minimum(path) for path in conditioned]
    U = np.array([r.U for r in records])
    unique = np.mean([np.count_nonzero(p.values == r.U) == 1 for p, r in zip(conditioned, records)])

    law = minimum_law(h_est, x0)
    report = ks_one_sample(U, law.cdf, law.left_cdf)
    report.test_name = "min-law"
    report.seeds = [cfg.seed]
    report.model_label = spec.label
    report.parameters.update(
        {"x0": x0, "epsilon": cfg.epsilon, "dt": cfg.dt, "horizon": cfg.horizon}
    )
    report.parameters["h_method"] = h_est.method.tag

    atom = float(np.mean(U == x0))
    expected_atom = h_est.evaluate(0.0) / h_est.evaluate(x0)
    spread = math.sqrt(max(expected_atom * (1 - expected_atom), 1e-12) / n_samples)
    atom_z = abs(atom - expected_atom) / spread
    report.statistics.update(
        {
            "atom_fraction": atom,
            "expected_atom": expected_atom,
            "atom_z": atom_z,
            "unique_minimum_fraction": float(unique),
            "acceptance_rate": batch.acceptance_rate,
        }
    )
    if not classify(spec).regular_downwards:
        # 0 irregular downwards: U = x0 with positive probability
        report.note(f"P(U = x0) = h(0)/h(x0) within {EQUALITY_N_STDERR:g} binomial stderr")
        report.passed = report.passed and atom_z <= EQUALITY_N_STDERR
    points = np.linspace(0.0, x0, 21)
    report.table = {
        "y": list(points),
        "empirical_cdf": [float(np.mean(U <= y)) for y in points],
        "reference_cdf": list(law.cdf(points)),
    }
    logger.info(
        "%s: min-law KS %.4f (critical %.4f)", spec.label, report.statistic, report.critical_value
    )
    return report


def run_min_law(spec: LevyModelSpec, settings: CheckSettings, seed: int, workers: int = 1):
    h_est = harmonic_for(spec, settings, named_rng(seed, "h"), workers)
    cfg = ConditionedSampleConfig(
        settings.x0,
        settings.epsilon,
        settings.dt,
        settings.horizon,
        settings.max_rejections,
        seed,
    )
    return verify_min_law(spec, settings.x0, h_est, cfg, settings.n_paths, workers)
