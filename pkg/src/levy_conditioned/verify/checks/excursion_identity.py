import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from ...conditioning import sample_post_min_limit_many
from ...harmonic import HarmonicEstimate
from ...models import LevyModelSpec, classify
from ...report import TestReport
from ...util import (
    EXCURSION_K_STABILITY,
    EXCURSION_RESIDUAL_TOLERANCE,
    DegenerateEstimateError,
    SpecValidationError,
    grid_steps,
    named_rng,
)
from ..excursions import ExcursionSample, sample_excursions
from ..settings import CheckSettings, harmonic_for

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExcursionFit:
    """
    n(X_t > a, t < zeta) against E[1{X_t > a} / h(X_t)] under the conditioned law from 0,
    one row per a, with the single constant k fitted by least squares.
    """

    t: float
    a_grid: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    k: float

    @property
    def residuals(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.lhs > 0, np.abs(self.lhs - self.k * self.rhs) / self.lhs, 0.0)

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals))


def check_excursion_model(spec: LevyModelSpec) -> None:
    if classify(spec).drifts_to_minus_infinity:
        raise SpecValidationError(
            f"excursion identities need a model that does not drift to -infinity ({spec.label})"
        )


def limit_values(
    spec: LevyModelSpec,
    t_values: Sequence[float],
    dt: float,
    t_large: float,
    n_samples: int,
    rng: np.random.Generator,
    workers: int = 1,
) -> Dict[float, np.ndarray]:
    """Values at each t of limit-construction paths, the conditioned law from 0."""
    segments = sample_post_min_limit_many(spec, t_large, dt, n_samples, rng, max(t_values), workers)
    return {t: np.array([s.values[grid_steps(t, dt)] for s in segments]) for t in t_values}


def conditioned_mean_over_h(
    h_est: HarmonicEstimate, values: np.ndarray, functional_values: np.ndarray
) -> float:
    """E[F / h(X_t)] from conditioned samples of X_t."""
    return float(np.mean(functional_values / h_est.evaluate(values)))


def fit_excursion_constant(
    sample: ExcursionSample,
    values: np.ndarray,
    h_est: HarmonicEstimate,
    t: float,
    a_grid: Sequence[float],
) -> ExcursionFit:
    a_grid = np.asarray(a_grid, dtype=float)
    lhs = np.array([sample.n_alive(t, lambda y, a=a: y > a) for a in a_grid])
    rhs = np.array([conditioned_mean_over_h(h_est, values, values > a) for a in a_grid])
    denominator = float(np.sum(rhs * rhs))
    if denominator == 0 or not np.any(lhs > 0):
        raise DegenerateEstimateError(
            f"no excursion or conditioned sample above the a grid at t = {t}; "
            "widen the horizon or lower the a grid"
        )
    k = float(np.sum(lhs * rhs) / denominator)
    return ExcursionFit(t, a_grid, lhs, rhs, k)


def verify_excursion_identity(
    spec: LevyModelSpec,
    t_values: Sequence[float],
    a_grid: Sequence[float],
    h_est: HarmonicEstimate,
    sample: ExcursionSample,
    conditioned: Dict[float, np.ndarray],
    t: float,
) -> TestReport:
    """
    n(X_t > a, t < zeta) = k E[1{X_t > a} / h(X_t)] with one k for every a: the largest
    relative residual at `t` must be small and k must agree across `t_values`.
    """
    check_excursion_model(spec)
    times = sorted(set(t_values) | {t})
    fits = {s: fit_excursion_constant(sample, conditioned[s], h_est, s, a_grid) for s in times}
    main = fits[t]
    ks = np.array([fits[s].k for s in t_values])
    k_spread = float((ks.max() - ks.min()) / ks.mean()) if len(ks) > 1 else 0.0
    always = sample.n_alive(t, np.ones_like)
    positive = sample.n_alive(t, lambda y: y > 0)

    passed = main.max_residual <= EXCURSION_RESIDUAL_TOLERANCE and k_spread <= EXCURSION_K_STABILITY
    table: Dict[str, List[float]] = {"t": [], "a": [], "n_estimate": [], "conditioned": [], "k": []}
    for s in times:
        fit = fits[s]
        table["t"] += [s] * len(fit.a_grid)
        table["a"] += list(fit.a_grid)
        table["n_estimate"] += list(fit.lhs)
        table["conditioned"] += list(fit.rhs)
        table["k"] += [fit.k] * len(fit.a_grid)
    logger.info("%s: fitted k %.4g, residual %.4f", spec.label, main.k, main.max_residual)
    return TestReport(
        test_name="excursion-identity",
        statistic=main.max_residual,
        critical_value=EXCURSION_RESIDUAL_TOLERANCE,
        passed=bool(passed),
        n_samples=len(sample.heights),
        model_label=spec.label,
        parameters={
            "t": t,
            "t_values": list(t_values),
            "a_grid": list(main.a_grid),
            "dt": sample.dt,
            "h_method": h_est.method.tag,
        },
        notes=[
            f"k spread across t within {EXCURSION_K_STABILITY!r}",
            f"counting local time {sample.local_time}",
        ],
        statistics={
            "k": main.k,
            "k_spread": k_spread,
            "alive_minus_positive": always - positive,
            "local_time": float(sample.local_time),
        },
        table=table,
    )


def run_excursion_identity(
    spec: LevyModelSpec, settings: CheckSettings, seed: int, workers: int = 1
) -> TestReport:
    check_excursion_model(spec)
    times = sorted(set(settings.t_values) | {settings.t})
    h_est = harmonic_for(spec, settings, named_rng(seed, "h"), workers)
    sample = sample_excursions(
        spec,
        settings.dt,
        settings.excursion_horizon,
        settings.excursion_paths,
        named_rng(seed, "excursions"),
        times,
        workers,
    )
    conditioned = limit_values(
        spec,
        times,
        settings.dt,
        settings.t_large,
        settings.n_paths,
        named_rng(seed, "limit"),
        workers,
    )
    report = verify_excursion_identity(
        spec, settings.t_values, settings.a_grid, h_est, sample, conditioned, settings.t
    )
    report.seeds = [seed]
    return report
