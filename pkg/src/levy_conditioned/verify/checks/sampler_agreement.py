import logging
from typing import Sequence

import numpy as np

from ...conditioning import ConditionedSampleConfig, reweighted_marginal, sample_conditioned_many
from ...harmonic import HarmonicEstimate
from ...models import LevyModelSpec
from ...report import EmpiricalDistribution, TestReport
from ...util import MAX_REJECTIONS, derive_seed, grid_steps, named_rng
from ..settings import CheckSettings, harmonic_for
from ..stats import ks_two_sample

logger = logging.getLogger(__name__)


def verify_sampler_agreement(
    spec: LevyModelSpec,
    h_est: HarmonicEstimate,
    starts: Sequence[float],
    t: float,
    n_paths: int,
    dt: float,
    epsilon: float,
    seed: int,
    max_rejections: int = MAX_REJECTIONS,
    workers: int = 1,
) -> TestReport:
    """
    Two-sample KS test of X_t under the rejection sampler against the h-weighted
    unconditioned marginal, for each start point. Passes when every start passes.
    """
    starts = [float(x) for x in starts]
    if not starts or any(x <= 0 for x in starts):
        raise ValueError("starts must hold positive start points")
    k = grid_steps(t, dt)
    distances, criticals, acceptance, mass, n_effective = [], [], [], [], []
    for x in starts:
        cfg = ConditionedSampleConfig(
            x, epsilon, dt, t, max_rejections, derive_seed(seed, f"rejection x={x!r}")
        )
        batch = sample_conditioned_many(spec, cfg, n_paths, workers)
        rejection = EmpiricalDistribution(np.array([path.values[k] for path in batch.paths]))
        weighted = reweighted_marginal(
            spec, h_est, x, t, dt, n_paths, named_rng(seed, f"weighted x={x!r}"), workers
        )
        ks = ks_two_sample(rejection, weighted)
        distances.append(ks.statistic)
        criticals.append(ks.critical_value)
        acceptance.append(batch.acceptance_rate)
        # E[h(X_t); t < tau] / h(x), 1 when h is invariant
        mass.append(float(weighted.weights.sum() / n_paths))
        n_effective.append(weighted.effective_size)
        logger.info("%s: x=%g rejection against weighted %.4f", spec.label, x, ks.statistic)

    worst = int(np.argmax(np.array(distances) / np.array(criticals)))
    return TestReport(
        test_name="sampler-agreement",
        statistic=distances[worst],
        critical_value=criticals[worst],
        passed=all(d <= c for d, c in zip(distances, criticals)),
        n_samples=2 * n_paths * len(starts),
        seeds=[seed],
        model_label=spec.label,
        parameters={
            "starts": starts,
            "t": t,
            "dt": dt,
            "epsilon": epsilon,
            "h_method": h_est.method.tag,
        },
        notes=[
            "weighted sample uses its Kish effective size in the critical value",
            f"reported statistic is the start x={starts[worst]!r} closest to its critical value",
        ],
        table={
            "x": starts,
            "distance": distances,
            "critical": criticals,
            "acceptance_rate": acceptance,
            "weighted_mass": mass,
            "weighted_effective_size": n_effective,
        },
    )


def run_sampler_agreement(
    spec: LevyModelSpec, settings: CheckSettings, seed: int, workers: int = 1
) -> TestReport:
    h_est = harmonic_for(spec, settings, named_rng(seed, "h"), workers)
    return verify_sampler_agreement(
        spec,
        h_est,
        settings.agreement_starts,
        settings.t,
        settings.n_paths,
        settings.dt,
        settings.epsilon,
        seed,
        settings.max_rejections,
        workers,
    )
