import logging
from functools import partial

from numpy.random import Generator
from scipy.stats import uniform

from ...models import LevyModelSpec, sample_increments
from ...report import EmpiricalDistribution, TestReport
from ...util import DCOR_CALIBRATION_SIZE, NULL_PASS_RATE, derive_seed
from ..settings import CheckSettings
from ..stats import distance_correlation_test, ks_one_sample, ks_two_sample, null_calibration

logger = logging.getLogger(__name__)


def _two_sample_null(spec: LevyModelSpec, dt: float, size: int, rng: Generator) -> TestReport:
    a = sample_increments(spec, dt, rng, size)
    b = sample_increments(spec, dt, rng, size)
    return ks_two_sample(EmpiricalDistribution(a), EmpiricalDistribution(b))


def _one_sample_null(size: int, rng: Generator) -> TestReport:
    return ks_one_sample(rng.random(size), uniform.cdf)


def _dcor_null(spec: LevyModelSpec, dt: float, size: int, rng: Generator) -> TestReport:
    pairs = sample_increments(spec, dt, rng, (size, 2))
    return distance_correlation_test(pairs[:, 0], pairs[:, 1], rng=rng)


def run_null_calibration(
    spec: LevyModelSpec, settings: CheckSettings, seed: int, workers: int = 1
) -> TestReport:
    """
    Pass rates of the two-sample KS, one-sample KS and distance-correlation tests over
    seeded repetitions on data they should accept; each rate must reach NULL_PASS_RATE.
    The statistic is one minus the smallest rate.
    """
    size, dt = settings.calibration_size, settings.dt
    tests = {
        "ks-two-sample": partial(_two_sample_null, spec, dt, size),
        "ks-one-sample": partial(_one_sample_null, size),
        "distance-correlation": partial(_dcor_null, spec, dt, min(size, DCOR_CALIBRATION_SIZE)),
    }
    rates = {}
    for name, test in tests.items():
        rates[name], _ = null_calibration(test, settings.repetitions, derive_seed(seed, name))
        logger.info("%s: null pass rate of %s is %.3f", spec.label, name, rates[name])
    statistic = 1 - min(rates.values())
    return TestReport(
        test_name="null-calibration",
        statistic=statistic,
        critical_value=1 - NULL_PASS_RATE,
        passed=statistic <= 1 - NULL_PASS_RATE + 1e-12,
        n_samples=settings.repetitions * len(tests),
        seeds=[seed],
        model_label=spec.label,
        parameters={"repetitions": settings.repetitions, "size": size, "dt": dt},
        notes=[f"each test accepts null data with frequency >= {NULL_PASS_RATE!r}"],
        statistics={f"pass_rate_{name}": rate for name, rate in rates.items()},
        table={"test": list(rates), "pass_rate": list(rates.values())},
    )
