import logging
import math
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ...conditioning import sample_entrance_law, sample_post_min_limit_many
from ...harmonic import (
    HarmonicEstimate,
    check_excessive_invariant,
    estimate_h_exit_ratio,
    estimate_h_ladder,
    h_closed_form,
)
from ...models import Family, LevyModelSpec, classify
from ...report import EmpiricalDistribution, TestReport
from ...util import EQUALITY_N_STDERR, SpecValidationError, named_rng
from ..reference import size_biased_jump_law
from ..settings import CheckSettings, harmonic_for
from ..stats import ks_one_sample, ks_two_sample

logger = logging.getLogger(__name__)


def subadditivity_violations(h_est: HarmonicEstimate, n_stderr: float = 2.0) -> int:
    """Number of grid pairs with h(x + y) > h(x) + h(y) beyond n_stderr standard errors."""
    levels, top = h_est.levels, h_est.levels[-1]
    count = 0
    for i, x in enumerate(levels):
        for y in levels[i:]:
            if x + y > top:
                break
            excess = h_est.evaluate(x + y) - h_est.evaluate(x) - h_est.evaluate(y)
            slack = n_stderr * math.sqrt(
                h_est.evaluate_stderr(x + y) ** 2
                + h_est.evaluate_stderr(x) ** 2
                + h_est.evaluate_stderr(y) ** 2
            )
            count += excess > slack
    return count


def verify_h_consistency(
    spec: LevyModelSpec,
    pairs: Sequence[Tuple[float, float]],
    ladder: HarmonicEstimate,
    barrier: float,
    n_paths: int,
    dt: float,
    seed: int,
    ratio_tolerance: float,
    workers: int = 1,
) -> TestReport:
    """
    h(x)/h(y) from ladder counting against the two-barrier exit ratio (within 3 combined
    standard errors) and against the registered closed form, if any (within
    `ratio_tolerance` relative error).
    """
    closed = None
    if h_closed_form(spec, 1.0) is not None:
        closed = HarmonicEstimate.from_closed_form(spec, ladder.levels, dt)
    with_exit = not classify(spec).drifts_to_minus_infinity
    table: Dict[str, List[float]] = {
        "x": [],
        "y": [],
        "ladder_ratio": [],
        "ladder_stderr": [],
        "exit_ratio": [],
        "exit_stderr": [],
        "z": [],
        "closed_ratio": [],
    }
    z_max, closed_dev = 0.0, 0.0
    for x, y in pairs:
        ratio, stderr = ladder.ratio(x, y)
        table["x"].append(x)
        table["y"].append(y)
        table["ladder_ratio"].append(ratio)
        table["ladder_stderr"].append(stderr)
        if with_exit:
            rng = named_rng(seed, f"exit {x!r} {y!r}")
            exit_est = estimate_h_exit_ratio(spec, x, y, barrier, dt, n_paths, rng, workers=workers)
            combined = math.hypot(stderr, exit_est.stderr)
            z = abs(ratio - exit_est.ratio) / combined if combined > 0 else 0.0
            z_max = max(z_max, z)
            table["exit_ratio"].append(exit_est.ratio)
            table["exit_stderr"].append(exit_est.stderr)
            table["z"].append(z)
        if closed is not None:
            closed_ratio = closed.ratio(x, y)[0]
            closed_dev = max(closed_dev, abs(ratio / closed_ratio - 1))
            table["closed_ratio"].append(closed_ratio)

    notes = [f"ladder and exit ratios within {EQUALITY_N_STDERR:g} combined stderr"]
    if not with_exit:
        notes.append("model drifts to -infinity: no exit-ratio estimate")
    passed = z_max <= EQUALITY_N_STDERR
    if closed is not None:
        notes.append(f"ladder and closed-form ratios within {ratio_tolerance!r} relative error")
        passed = passed and closed_dev <= ratio_tolerance
    return TestReport(
        test_name="h-consistency",
        statistic=z_max,
        critical_value=EQUALITY_N_STDERR,
        passed=bool(passed),
        n_samples=n_paths,
        seeds=[seed],
        model_label=spec.label,
        parameters={"pairs": [list(p) for p in pairs], "barrier": barrier, "dt": dt},
        notes=notes,
        statistics={
            "closed_form_deviation": closed_dev,
            "monotone": float(ladder.is_monotone()),
            "subadditivity_violations": float(subadditivity_violations(ladder)),
        },
        table=table,
    )


def run_h_consistency(
    spec: LevyModelSpec, settings: CheckSettings, seed: int, workers: int = 1
) -> TestReport:
    ladder = estimate_h_ladder(
        spec,
        settings.levels,
        settings.dt,
        settings.n_paths,
        settings.ladder_cap,
        named_rng(seed, "h"),
        workers,
    )
    return verify_h_consistency(
        spec,
        settings.pairs,
        ladder,
        settings.barrier,
        settings.n_paths,
        settings.dt,
        seed,
        settings.ratio_tolerance,
        workers,
    )


def run_excessive_invariant(
    spec: LevyModelSpec, settings: CheckSettings, seed: int, workers: int = 1
) -> TestReport:
    """The invariance (or excessiveness) check at every configured (x, t) point."""
    h_est = harmonic_for(spec, settings, named_rng(seed, "h"), workers)
    reports = [
        check_excessive_invariant(
            spec,
            h_est,
            x,
            t,
            settings.dt,
            settings.n_paths,
            named_rng(seed, f"x={x!r} t={t!r}"),
            workers,
        )
        for x, t in settings.xt_points
    ]
    worst = max(reports, key=lambda r: r.statistic)
    return TestReport(
        test_name="excessive-invariant",
        statistic=worst.statistic,
        critical_value=worst.critical_value,
        passed=all(r.passed for r in reports),
        n_samples=sum(r.n_samples for r in reports),
        seeds=[seed],
        model_label=spec.label,
        parameters={"xt_points": [list(p) for p in settings.xt_points], "dt": settings.dt},
        notes=worst.notes,
        table={
            "x": [r.parameters["x"] for r in reports],
            "t": [r.parameters["t"] for r in reports],
            "mean": [r.statistics["mean"] for r in reports],
            "stderr": [r.statistics["stderr"] for r in reports],
            "h_x": [r.statistics["h_x"] for r in reports],
            "statistic": [r.statistic for r in reports],
        },
    )


def verify_entrance_law(
    spec: LevyModelSpec,
    t_large: float,
    dt: float,
    n_samples: int,
    seed: int,
    min_length: float,
    workers: int = 1,
) -> TestReport:
    """
    First grid value of the conditioned process from 0 (limit construction) against the
    h-biased jump law: x pi(dx) / int u pi(du) in closed form when the model does not
    drift to +infinity, exact draws otherwise.
    """
    if spec.family != Family.SpectrallyPositiveCPDrift or spec.jump_law is None:
        raise SpecValidationError(
            f"the entrance law is only available for SpectrallyPositiveCPDrift ({spec.label})"
        )
    segments = sample_post_min_limit_many(
        spec, t_large, dt, n_samples, named_rng(seed, "limit"), min_length, workers
    )
    first = np.array([s.values[1] for s in segments])
    if classify(spec).drifts_to_plus_infinity:
        draws = sample_entrance_law(spec, named_rng(seed, "entrance"), n_samples)
        report = ks_two_sample(EmpiricalDistribution(first), EmpiricalDistribution(draws))
        report.note("reference: h-biased jump law draws")
    else:
        law = size_biased_jump_law(spec.jump_law)
        report = ks_one_sample(first, law.cdf, law.left_cdf)
        report.note(f"reference: {law.name}")
    report.test_name = "entrance-law"
    report.seeds = [seed]
    report.model_label = spec.label
    report.parameters.update(
        {"t_large": t_large, "dt": dt, "min_length": min_length, "jump_law": str(spec.jump_law)}
    )
    report.statistics["mean_first_value"] = float(first.mean())
    return report


def run_entrance_law(
    spec: LevyModelSpec, settings: CheckSettings, seed: int, workers: int = 1
) -> TestReport:
    return verify_entrance_law(
        spec,
        settings.t_large,
        settings.dt,
        settings.n_paths,
        seed,
        settings.entrance_min_length,
        workers,
    )
