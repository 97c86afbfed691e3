import logging

import numpy as np
from numpy.random import Generator

from ...conditioning import sample_post_min_limit_many
from ...models import LevyModelSpec, sample_increments
from ...path import Side, first_passage_rows
from ...report import EmpiricalDistribution, TestReport
from ...util import (
    MAX_CENSORED_FRACTION,
    STEP_BLOCK,
    grid_steps,
    named_rng,
    replicate_map,
    root_seed_from,
)
from ..settings import CheckSettings
from ..stats import ks_two_sample
from .creeping import creep_tolerance, last_passage_overshoots
from .excursion_identity import check_excursion_model

logger = logging.getLogger(__name__)


def _passage_chunk(
    size: int, rng: Generator, spec: LevyModelSpec, x: float, dt: float, max_steps: int
) -> np.ndarray:
    out = np.full(size, np.nan)
    walk = np.zeros(size)
    peak = np.zeros(size)
    active = np.arange(size)
    steps = 0
    while len(active) and steps < max_steps:
        block = min(STEP_BLOCK, max_steps - steps)
        values = walk[active, None] + np.cumsum(
            sample_increments(spec, dt, rng, (len(active), block)), axis=1
        )
        padded = np.concatenate([walk[active, None], values], axis=1)
        # peaks[:, i] is the running maximum up to padded[:, i]
        peaks = np.maximum.accumulate(np.concatenate([peak[active, None], values], axis=1), axis=1)
        first = first_passage_rows(padded, x, Side.AtOrAbove)
        hit = first > 0
        rows, f = np.flatnonzero(hit), first[hit]
        out[active[hit]] = padded[rows, f] + peaks[rows, f - 1] - padded[rows, f - 1]
        walk[active] = values[:, -1]
        peak[active] = peaks[:, -1]
        active = active[~hit]
        steps += block
    return out


def passage_combination(
    spec: LevyModelSpec,
    x: float,
    dt: float,
    horizon: float,
    n_paths: int,
    rng: Generator,
    workers: int = 1,
) -> np.ndarray:
    """
    X(tau) + X(g) - X(tau-) over unconditioned paths from 0, tau the first passage into
    [x, inf) and g the last epoch before tau where the running maximum is attained; nan
    when tau is beyond the horizon.
    """
    seed = root_seed_from(rng)
    chunks = replicate_map(
        _passage_chunk, n_paths, seed, spec, x, dt, grid_steps(horizon, dt), workers=workers
    )
    return np.concatenate(chunks)


def verify_last_passage_identity(
    spec: LevyModelSpec,
    x: float,
    n_paths: int,
    dt: float,
    horizon: float,
    t_large: float,
    seed: int,
    workers: int = 1,
) -> TestReport:
    """
    Two-sample KS test of X(sigma_x) under the conditioned law from 0, sigma_x the last
    passage below x, against X(tau) + X(g) - X(tau-) under the unconditioned law. No verdict
    is given when either side has too many censored samples.
    """
    check_excursion_model(spec)
    if not x > 0:
        raise ValueError(f"x must be positive, but got {x}")
    segments = sample_post_min_limit_many(
        spec, t_large, dt, n_paths, named_rng(seed, "limit"), workers=workers
    )
    lhs = last_passage_overshoots(segments, [x])[:, 0] + x
    rhs = passage_combination(spec, x, dt, horizon, n_paths, named_rng(seed, "passage"), workers)
    censored_lhs = float(np.isnan(lhs).mean())
    censored_rhs = float(np.isnan(rhs).mean())
    lhs, rhs = lhs[~np.isnan(lhs)], rhs[~np.isnan(rhs)]

    tolerance = creep_tolerance(spec, dt)
    statistics = {
        "censored_conditioned": censored_lhs,
        "censored_unconditioned": censored_rhs,
        "atom_conditioned": float(np.mean(lhs - x <= tolerance)) if len(lhs) else 0.0,
        "atom_unconditioned": float(np.mean(rhs - x <= tolerance)) if len(rhs) else 0.0,
    }
    parameters = {"x": x, "dt": dt, "horizon": horizon, "t_large": t_large}
    if max(censored_lhs, censored_rhs) > MAX_CENSORED_FRACTION or not len(lhs) or not len(rhs):
        logger.warning(
            "%s: censored last passage %.4f, first passage %.4f; extend t_large or the horizon",
            spec.label,
            censored_lhs,
            censored_rhs,
        )
        return TestReport(
            test_name="last-passage",
            statistic=float("nan"),
            critical_value=float("nan"),
            passed=False,
            n_samples=len(lhs) + len(rhs),
            seeds=[seed],
            model_label=spec.label,
            parameters=parameters,
            notes=[f"censored fraction above {MAX_CENSORED_FRACTION!r}: no verdict"],
            statistics=statistics,
            conclusive=False,
        )
    report = ks_two_sample(EmpiricalDistribution(lhs), EmpiricalDistribution(rhs))
    report.test_name = "last-passage"
    report.seeds = [seed]
    report.model_label = spec.label
    report.parameters.update(parameters)
    report.statistics.update(statistics)
    quantiles = np.linspace(0.05, 0.95, 19)
    report.table = {
        "quantile": list(quantiles),
        "conditioned": list(np.quantile(lhs, quantiles)),
        "unconditioned": list(np.quantile(rhs, quantiles)),
    }
    return report


def run_last_passage(
    spec: LevyModelSpec, settings: CheckSettings, seed: int, workers: int = 1
) -> TestReport:
    return verify_last_passage_identity(
        spec,
        settings.level,
        settings.n_paths,
        settings.dt,
        settings.horizon,
        settings.t_large,
        seed,
        workers,
    )
