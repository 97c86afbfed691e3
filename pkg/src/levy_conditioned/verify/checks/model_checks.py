import math

import numpy as np
from scipy.stats import norm

from ...models import Family, LevyModelSpec, sample_increments, sample_jumps
from ...report import EmpiricalDistribution, TestReport
from ...util import EQUALITY_N_STDERR, SpecValidationError, named_rng
from ..settings import CheckSettings
from ..stats import ks_one_sample, ks_two_sample


def run_stable_gaussian(
    spec: LevyModelSpec, settings: CheckSettings, seed: int, workers: int = 1
) -> TestReport:
    """alpha = 2 stable increments over dt are Normal(0, 2 scale^2 dt)."""
    if spec.family != Family.Stable or spec.alpha != 2:
        raise SpecValidationError(
            f"stable-gaussian needs a Stable model with alpha = 2 ({spec.label})"
        )
    dt = settings.dt
    sample = sample_increments(spec, dt, named_rng(seed, "increments"), settings.n_increments)
    sd = math.sqrt(2 * dt) * spec.scale
    report = ks_one_sample(sample, norm(scale=sd).cdf)
    report.test_name = "stable-gaussian"
    report.seeds = [seed]
    report.model_label = spec.label
    report.parameters.update({"dt": dt, "sd": sd})
    report.statistics["sample_sd"] = float(sample.std(ddof=1))
    return report


def run_additivity(
    spec: LevyModelSpec, settings: CheckSettings, seed: int, workers: int = 1
) -> TestReport:
    """An increment over 2 dt has the law of the sum of two independent dt increments."""
    dt, n = settings.dt, settings.n_increments
    rng = named_rng(seed, "increments")
    direct = sample_increments(spec, 2 * dt, rng, n)
    summed = sample_increments(spec, dt, rng, (n, 2)).sum(axis=1)
    report = ks_two_sample(EmpiricalDistribution(direct), EmpiricalDistribution(summed))
    report.test_name = "additivity"
    report.seeds = [seed]
    report.model_label = spec.label
    report.parameters["dt"] = dt
    mean = spec.mean()
    if mean is not None and (spec.family != Family.Stable or spec.alpha == 2):
        stderr = direct.std(ddof=1) / math.sqrt(n)
        z = abs(direct.mean() - 2 * dt * mean) / stderr if stderr > 0 else 0.0
        report.statistics["mean_z"] = float(z)
        report.statistics["mean_within_stderr"] = float(z <= EQUALITY_N_STDERR)
        report.note(f"sample mean against 2 dt E[X_1] reported, {EQUALITY_N_STDERR:g} stderr")
    return report


def run_jump_sign(
    spec: LevyModelSpec, settings: CheckSettings, seed: int, workers: int = 1
) -> TestReport:
    """Jumps of a spectrally one-sided model all have the declared sign."""
    n = settings.n_increments
    rng = named_rng(seed, "jumps")
    jumps = sample_jumps(spec, rng, n)
    if spec.family == Family.SpectrallyPositiveCPDrift:
        wrong = int(np.count_nonzero(jumps <= 0))
    else:
        wrong = int(np.count_nonzero(jumps >= 0))
    statistics = {"wrong_sign_jumps": float(wrong)}
    if spec.family == Family.SpectrallyPositiveCPDrift:
        # no Gaussian part: an increment is never below the drift contribution
        increments = sample_increments(spec, settings.dt, rng, n)
        below = int(np.count_nonzero(increments < spec.drift * settings.dt - 1e-12))
        statistics["increments_below_drift"] = float(below)
        wrong += below
    return TestReport(
        test_name="jump-sign",
        statistic=float(wrong),
        critical_value=0.0,
        passed=wrong == 0,
        n_samples=n,
        seeds=[seed],
        model_label=spec.label,
        parameters={"dt": settings.dt},
        statistics=statistics,
    )
