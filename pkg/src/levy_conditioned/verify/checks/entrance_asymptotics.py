import logging
from typing import Callable, Sequence, Tuple

import numpy as np
from numpy.random import Generator

from ...harmonic import HarmonicEstimate
from ...models import LevyModelSpec
from ...path import simulate_paths
from ...report import TestReport
from ...util import ENTRANCE_RATIO_TOLERANCE, named_rng, replicate_map, root_seed_from
from ..excursions import ExcursionSample, sample_excursions
from ..settings import CheckSettings, entrance_function, harmonic_for
from ..stats import spearman_trend
from .excursion_identity import (
    check_excursion_model,
    conditioned_mean_over_h,
    fit_excursion_constant,
    limit_values,
)

logger = logging.getLogger(__name__)

Functional = Callable[[np.ndarray], np.ndarray]


def _survival_chunk(
    size: int, rng: Generator, spec: LevyModelSpec, x: float, t: float, dt: float, f: Functional
) -> Tuple[float, float]:
    paths = simulate_paths(spec, x, dt, t, size, rng)
    alive = (paths[:, 1:] >= 0).all(axis=1)
    terms = np.where(alive, f(paths[:, -1]), 0.0)
    return float(terms.sum()), float(np.sum(terms * terms))


def killed_expectation(
    spec: LevyModelSpec,
    x: float,
    t: float,
    dt: float,
    f: Functional,
    n_paths: int,
    rng: Generator,
    workers: int = 1,
) -> Tuple[float, float]:
    """E_x[f(X_t); no grid value below 0 up to t] and its standard error."""
    seed = root_seed_from(rng)
    chunks = replicate_map(_survival_chunk, n_paths, seed, spec, x, t, dt, f, workers=workers)
    total = sum(c[0] for c in chunks)
    squares = sum(c[1] for c in chunks)
    mean = total / n_paths
    variance = max(squares / n_paths - mean * mean, 0.0) * n_paths / (n_paths - 1)
    return mean, float(np.sqrt(variance / n_paths))


def verify_entrance_asymptotics(
    spec: LevyModelSpec,
    t: float,
    x_grid: Sequence[float],
    f: Functional,
    h_est: HarmonicEstimate,
    sample: ExcursionSample,
    conditioned: np.ndarray,
    a_grid: Sequence[float],
    n_paths: int,
    rng: Generator,
    workers: int = 1,
) -> TestReport:
    """
    E_x[f(X_t); t < zeta] against h(x) k E[f(X_t)/h(X_t)] under the conditioned law from 0,
    k the constant of the excursion identity fitted at the same t. The ratio at the
    smallest x must be within tolerance of 1; h(x) times the direct excursion estimate of
    n(f(X_t), t < zeta) is reported alongside.
    """
    check_excursion_model(spec)
    x_grid = [float(x) for x in x_grid]
    k = fit_excursion_constant(sample, conditioned, h_est, t, a_grid).k
    limit_term = k * conditioned_mean_over_h(h_est, conditioned, f(conditioned))
    counting_term = sample.n_alive(t, f)

    lhs, stderr, rhs, counting, ratios = [], [], [], [], []
    for x in x_grid:
        mean, se = killed_expectation(spec, x, t, sample.dt, f, n_paths, rng, workers)
        h_x = h_est.evaluate(x)
        lhs.append(mean)
        stderr.append(se)
        rhs.append(h_x * limit_term)
        counting.append(h_x * counting_term)
        ratios.append(mean / rhs[-1] if rhs[-1] > 0 else float("nan"))

    notes = [f"k = {k!r} from the excursion identity at t = {t!r}"]
    statistics = {"k": k}
    if limit_term == 0 and all(v == 0 for v in lhs):
        notes.append("f vanishes on the samples: both sides are 0")
        statistic, passed = 0.0, True
    else:
        statistic = abs(ratios[-1] - 1)
        passed = bool(statistic <= ENTRANCE_RATIO_TOLERANCE)
        if len(x_grid) >= 3:
            trend_ok, rho, p_value = spearman_trend(np.abs(np.asarray(ratios) - 1))
            statistics.update({"spearman_rho": rho, "spearman_p": p_value})
            notes.append(f"ratio trend toward 1 {'significant' if trend_ok else 'not significant'}")
        statistics["final_ratio"] = ratios[-1]
        if counting[-1] > 0:
            statistics["final_counting_ratio"] = lhs[-1] / counting[-1]
    logger.info("%s: entrance ratio at x=%g is %s", spec.label, x_grid[-1], ratios[-1])
    return TestReport(
        test_name="entrance-asymptotics",
        statistic=statistic,
        critical_value=ENTRANCE_RATIO_TOLERANCE,
        passed=passed,
        n_samples=n_paths * len(x_grid),
        model_label=spec.label,
        parameters={"t": t, "x_grid": x_grid, "dt": sample.dt, "h_method": h_est.method.tag},
        notes=notes,
        statistics=statistics,
        table={
            "x": x_grid,
            "killed_expectation": lhs,
            "stderr": stderr,
            "h_x_limit": rhs,
            "h_x_counting": counting,
            "ratio": ratios,
        },
    )


def run_entrance_asymptotics(
    spec: LevyModelSpec, settings: CheckSettings, seed: int, workers: int = 1
) -> TestReport:
    check_excursion_model(spec)
    h_est = harmonic_for(spec, settings, named_rng(seed, "h"), workers)
    sample = sample_excursions(
        spec,
        settings.dt,
        settings.excursion_horizon,
        settings.excursion_paths,
        named_rng(seed, "excursions"),
        (settings.t,),
        workers,
    )
    conditioned = limit_values(
        spec,
        (settings.t,),
        settings.dt,
        settings.t_large,
        settings.n_paths,
        named_rng(seed, "limit"),
        workers,
    )[settings.t]
    report = verify_entrance_asymptotics(
        spec,
        settings.t,
        settings.x_grid,
        entrance_function(settings.functional),
        h_est,
        sample,
        conditioned,
        settings.a_grid,
        settings.n_paths,
        named_rng(seed, "killed"),
        workers,
    )
    report.seeds = [seed]
    return report
