from __future__ import annotations
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.random import Generator

from .harmonic import HarmonicEstimate, h_closed_form
from .models import Family, LevyModelSpec, classify, sample_increments
from .path import GridPath, argmin_time, simulate_paths
from .report import EmpiricalDistribution
from .util import (
    ACCEPTANCE_FLOOR,
    MAX_BATCH_CELLS,
    MAX_PATH_LENGTH,
    MAX_REJECTIONS,
    REPLICATE_CHUNK,
    STEP_BLOCK,
    ResampleRequired,
    ResourceGuardError,
    SamplerExhaustedError,
    SpecValidationError,
    chunk_rng,
    grid_steps,
    replicate_map,
    root_seed_from,
)

logger = logging.getLogger(__name__)

# Size of the first simulated block of an attempt; blocks double up to STEP_BLOCK
FIRST_BLOCK = 64
# Largest number of redraws of one limit-construction sample
MAX_RESAMPLES = 1000


@dataclass(frozen=True)
class ConditionedSampleConfig:
    x0: float
    epsilon: float
    dt: float
    # length of the unconditioned continuation after the exponential clock
    horizon: float
    max_rejections: int = MAX_REJECTIONS
    seed: int = 0

    def __post_init__(self) -> None:
        if self.x0 < 0:
            raise ValueError(f"x0 must be nonnegative, but got {self.x0}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, but got {self.epsilon}")
        if not self.dt > 0 or self.horizon < self.dt:
            raise ValueError(f"need dt > 0 and horizon >= dt, got {self.dt}, {self.horizon}")
        if self.max_rejections < 1:
            raise ValueError(f"max_rejections must be positive, but got {self.max_rejections}")


@dataclass(frozen=True)
class DecompositionRecord:
    """Split of a path at its (last-attaining) minimum; `post_min` is shifted by -U."""

    pre_min: Optional[GridPath]
    post_min: GridPath
    U: float
    m: float
    m_index: int


@dataclass(frozen=True, eq=False)
class ConditionedPath(GridPath):
    """
    Accepted rejection path on [0, T + horizon], T = clock_index * dt the exponential clock
    of its attempt. Grid values are > 0 on [0, T] only; the rest is a free continuation.
    """

    clock_index: int = 0

    @property
    def clock(self) -> float:
        return self.clock_index * self.dt

    @property
    def conditioned(self) -> GridPath:
        """The part on [0, T] where the conditioning holds."""
        return self.segment(0, self.clock_index + 1)


@dataclass
class ConditionedBatch:
    paths: List[GridPath]
    attempts: int
    seed: int
    parameters: Dict[str, Any] = field(default_factory=dict)

    @property
    def acceptance_rate(self) -> float:
        return len(self.paths) / self.attempts if self.attempts else 0.0

    def manifest(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "accepted": len(self.paths),
            "attempts": self.attempts,
            "rejections": self.attempts - len(self.paths),
            "acceptance_rate": self.acceptance_rate,
            **self.parameters,
        }


def _walk_positive(
    spec: LevyModelSpec,
    x0: float,
    dt: float,
    n_steps: int,
    rng: Generator,
    stop_above: float = math.inf,
) -> Tuple[Optional[np.ndarray], bool]:
    """
    Simulates up to n_steps grid steps from x0 while every grid value after index 0 stays
    > 0. Returns (values, reached) where values is None when the walk left (0, inf), and
    `reached` tells whether [stop_above, inf) was entered (the walk stops there).
    """
    if n_steps + 1 > MAX_PATH_LENGTH:
        raise ResourceGuardError(f"path of {n_steps + 1} grid points exceeds {MAX_PATH_LENGTH}")
    pieces = [np.array([x0], dtype=float)]
    level, filled, block = x0, 0, FIRST_BLOCK
    while filled < n_steps:
        size = min(block, n_steps - filled)
        piece = level + np.cumsum(sample_increments(spec, dt, rng, size))
        out = np.flatnonzero(piece <= 0)
        up = np.flatnonzero(piece >= stop_above)
        if len(up) and (len(out) == 0 or up[0] < out[0]):
            pieces.append(piece[: up[0] + 1])
            return np.concatenate(pieces), True
        if len(out):
            return None, False
        pieces.append(piece)
        level, filled = piece[-1], filled + size
        block = min(2 * block, STEP_BLOCK)
    return np.concatenate(pieces), False


def _rejection_attempt(
    spec: LevyModelSpec, cfg: ConditionedSampleConfig, index: int
) -> Optional[ConditionedPath]:
    rng = chunk_rng(cfg.seed, index)
    clock_index = grid_steps(rng.exponential(1.0 / cfg.epsilon), cfg.dt)
    extra = grid_steps(cfg.horizon, cfg.dt)
    if clock_index + extra + 1 > MAX_PATH_LENGTH:
        raise ResourceGuardError(
            f"path of {clock_index + extra + 1} grid points exceeds {MAX_PATH_LENGTH}"
        )
    values, _ = _walk_positive(spec, cfg.x0, cfg.dt, clock_index, rng)
    if values is None:
        return None
    tail = values[-1] + np.cumsum(sample_increments(spec, cfg.dt, rng, extra))
    return ConditionedPath(cfg.dt, np.concatenate([values, tail]), None, spec.label, clock_index)


def _barrier_attempt(
    spec: LevyModelSpec, x0: float, level: float, dt: float, seed: int, index: int
):
    rng = chunk_rng(seed, index)
    values, reached = _walk_positive(spec, x0, dt, MAX_PATH_LENGTH - 1, rng, stop_above=level)
    return GridPath(dt, values, None, spec.label) if reached else None


def _attempt_range(attempt: Callable[[int], Optional[GridPath]], first: int, count: int):
    return [attempt(i) for i in range(first, first + count)]


def _run_attempts(
    attempt: Callable[[int], Optional[GridPath]],
    n_samples: int,
    max_rejections: int,
    workers: int,
) -> Tuple[List[GridPath], int]:
    """
    Runs attempts 0, 1, 2, ... and keeps the first n_samples acceptances in attempt order.
    Attempts are dispatched in blocks, so the outcome does not depend on `workers`.
    """
    accepted: List[GridPath] = []
    attempts, streak = 0, 0
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while len(accepted) < n_samples:
            starts = [attempts + k * REPLICATE_CHUNK for k in range(max(1, workers))]
            job = partial(_attempt_range, attempt, count=REPLICATE_CHUNK)
            if executor is None:
                blocks = [job(first) for first in starts]
            else:
                blocks = list(executor.map(job, starts))
            for result in (r for block in blocks for r in block):
                attempts += 1
                if result is None:
                    streak += 1
                    if streak > max_rejections:
                        raise SamplerExhaustedError(
                            f"{max_rejections} consecutive rejections "
                            f"({len(accepted)} accepted in {attempts} attempts)",
                            len(accepted) / attempts,
                            attempts,
                        )
                    continue
                streak = 0
                accepted.append(result)
                if len(accepted) == n_samples:
                    break
    finally:
        if executor is not None:
            executor.shutdown()
    return accepted, attempts


def _check_start(spec: LevyModelSpec, x0: float) -> None:
    if x0 == 0 and classify(spec).regular_downwards:
        raise SpecValidationError(
            f"x0 = 0 is only allowed when 0 is not regular downwards ({spec.label})"
        )


def sample_conditioned_many(
    spec: LevyModelSpec, cfg: ConditionedSampleConfig, n_samples: int, workers: int = 1
) -> ConditionedBatch:
    """
    Paths started at x0 that keep every grid value > 0 on [0, T], T = e/epsilon with e a
    unit exponential drawn per attempt, continued freely on [T, T + horizon]. Fixed-time
    functionals read the whole path; functionals of the whole trajectory (minimum,
    decomposition) read `ConditionedPath.conditioned`. Attempt i uses the stream (seed, i).
    """
    _check_start(spec, cfg.x0)
    paths, attempts = _run_attempts(
        partial(_rejection_attempt, spec, cfg), n_samples, cfg.max_rejections, workers
    )
    batch = ConditionedBatch(
        paths,
        attempts,
        cfg.seed,
        {"x0": cfg.x0, "epsilon": cfg.epsilon, "dt": cfg.dt, "horizon": cfg.horizon},
    )
    logger.info(
        "conditioned %s from x0=%g: %d paths, acceptance rate %.4f",
        spec.label,
        cfg.x0,
        len(paths),
        batch.acceptance_rate,
    )
    if batch.acceptance_rate < ACCEPTANCE_FLOOR:
        logger.warning(
            "acceptance rate %.2e below %g; use a larger x0 or epsilon",
            batch.acceptance_rate,
            ACCEPTANCE_FLOOR,
        )
    return batch


def sample_conditioned_rejection(
    spec: LevyModelSpec, cfg: ConditionedSampleConfig
) -> ConditionedPath:
    return sample_conditioned_many(spec, cfg, 1).paths[0]


def sample_conditioned_barrier(
    spec: LevyModelSpec,
    x0: float,
    level: float,
    dt: float,
    n_samples: int,
    seed: int,
    max_rejections: int = MAX_REJECTIONS,
    workers: int = 1,
) -> ConditionedBatch:
    """
    Paths started at x0 conditioned to enter [level, inf) before (-inf, 0]; the law of
    the part before a fixed time tends to the conditioned law as level grows.
    """
    if classify(spec).drifts_to_minus_infinity:
        raise SpecValidationError(
            f"barrier conditioning needs a model that does not drift to -infinity ({spec.label})"
        )
    if not level > x0:
        raise ValueError(f"level {level} must exceed the start point {x0}")
    _check_start(spec, x0)
    paths, attempts = _run_attempts(
        partial(_barrier_attempt, spec, x0, level, dt, seed), n_samples, max_rejections, workers
    )
    return ConditionedBatch(paths, attempts, seed, {"x0": x0, "level": level, "dt": dt})


def htransform_weight(path: GridPath, h_est: HarmonicEstimate, x0: float, t: float) -> float:
    """h(X_t)/h(x0) when the path keeps every grid value in (0, inf) up to t, else 0."""
    k = grid_steps(t, path.dt)
    if k >= len(path.values):
        raise ValueError(f"path of length {len(path)} does not reach t = {t}")
    if path.killed_at is not None and path.killed_at <= k:
        return 0.0
    if np.any(path.values[1 : k + 1] <= 0):
        return 0.0
    return h_est.evaluate(path.values[k]) / h_est.evaluate(x0)


def _marginal_chunk(
    size: int, rng: Generator, spec: LevyModelSpec, x0: float, t: float, dt: float
) -> Tuple[np.ndarray, np.ndarray]:
    paths = simulate_paths(spec, x0, dt, t, size, rng)
    alive = (paths[:, 1:] > 0).all(axis=1)
    return alive, paths[:, -1]


def reweighted_marginal(
    spec: LevyModelSpec,
    h_est: HarmonicEstimate,
    x0: float,
    t: float,
    dt: float,
    n_paths: int,
    rng: Generator,
    workers: int = 1,
) -> EmpiricalDistribution:
    """Law of X_t under the conditioned law from x0, as h-weighted unconditioned samples."""
    seed = root_seed_from(rng)
    chunks = replicate_map(_marginal_chunk, n_paths, seed, spec, x0, t, dt, workers=workers)
    alive = np.concatenate([c[0] for c in chunks])
    final = np.concatenate([c[1] for c in chunks])[alive]
    if len(final) == 0:
        raise SamplerExhaustedError(f"no path from {x0} survived to t = {t}", 0.0, n_paths)
    return EmpiricalDistribution(final, h_est.evaluate(final) / h_est.evaluate(x0))


def decompose_at_minimum(path: GridPath) -> DecompositionRecord:
    """
    >>> record = decompose_at_minimum(GridPath(1.0, [2, 1, 3]))
    >>> assert (record.U, record.m, list(record.post_min.values)) == (1.0, 1.0, [0.0, 2.0])
    """
    m = argmin_time(path)
    alive = path.alive
    U = float(alive[m])
    pre = GridPath(path.dt, alive[:m], None, path.label) if m > 0 else None
    post = GridPath(path.dt, alive[m:] - U, None, path.label)
    return DecompositionRecord(pre, post, U, m * path.dt, int(m))


def post_minimum_values(
    paths: Sequence[ConditionedPath], lag: float
) -> Tuple[List[DecompositionRecord], np.ndarray]:
    """
    Decomposition of the conditioned part of each path and the post-minimum value X - U
    `lag` after m. Paths whose conditioned part ends before m + lag are left out.
    """
    k = grid_steps(lag, paths[0].dt) if paths else 0
    records, post = [], []
    for path in paths:
        record = decompose_at_minimum(path.conditioned)
        if record.m_index + k <= path.clock_index:
            records.append(record)
            post.append(record.post_min.values[k])
    return records, np.array(post)


def minimum_law_cdf(h_est: HarmonicEstimate, x: float, y: float) -> float:
    """P(U >= y) = h(x - y)/h(x) for 0 <= y <= x, and 0 for y > x."""
    if not x > 0 or y < 0:
        raise ValueError(f"need x > 0 and y >= 0, but got x={x}, y={y}")
    if y > x:
        return 0.0
    return h_est.evaluate(x - y) / h_est.evaluate(x)


def _check_entrance_model(spec: LevyModelSpec) -> None:
    if spec.family != Family.SpectrallyPositiveCPDrift or spec.jump_law is None:
        raise SpecValidationError(
            f"the entrance law is only available for SpectrallyPositiveCPDrift ({spec.label})"
        )


def sample_entrance_law(
    spec: LevyModelSpec, rng: Generator, size: Optional[int] = None
) -> Union[float, np.ndarray]:
    """
    Initial law of the conditioned process started at 0: the jump law biased by h, which is
    x pi(dx) / int u pi(du) unless the model drifts to +infinity.
    """
    _check_entrance_model(spec)
    law = spec.jump_law
    n = 1 if size is None else size
    if not classify(spec).drifts_to_plus_infinity:
        out = law.sample_size_biased(rng, n)
    else:
        # h(x) <= x: thin size-biased draws with probability h(x)/x
        out = np.empty(0)
        while len(out) < n:
            proposal = law.sample_size_biased(rng, n)
            keep = np.array([h_closed_form(spec, x) / x for x in proposal])
            out = np.concatenate([out, proposal[rng.random(n) < keep]])
        out = out[:n]
    return float(out[0]) if size is None else out


def _last_zero_segments(
    spec: LevyModelSpec, t_large: float, dt: float, rng: Generator, size: int, min_steps: int
) -> List[Optional[np.ndarray]]:
    paths = simulate_paths(spec, 0.0, dt, t_large, size, rng)
    reflected = paths - np.minimum.accumulate(paths, axis=1)
    n = reflected.shape[1]
    last_zero = n - 1 - np.argmax(reflected[:, ::-1] == 0, axis=1)
    return [
        reflected[i, g:].copy() if n - g > min_steps else None for i, g in enumerate(last_zero)
    ]


def sample_post_min_limit_construction(
    spec: LevyModelSpec, t_large: float, dt: float, rng: Generator
) -> GridPath:
    """
    Reflected path X - inf X after its last zero g before t_large. Its law approximates the
    conditioned law started at 0 when t_large is much larger than the excursion lengths.
    """
    if classify(spec).drifts_to_minus_infinity:
        raise SpecValidationError(
            f"limit construction needs a model that does not drift to -infinity ({spec.label})"
        )
    (segment,) = _last_zero_segments(spec, t_large, dt, rng, 1, 1)
    if segment is None:
        raise ResampleRequired("last zero of the reflected path is the final grid point")
    return GridPath(dt, segment, None, spec.label)


def _limit_chunk(
    size: int,
    rng: Generator,
    spec: LevyModelSpec,
    t_large: float,
    dt: float,
    min_steps: int,
) -> Tuple[List[np.ndarray], int]:
    segments = _last_zero_segments(spec, t_large, dt, rng, size, min_steps)
    redraws = 0
    for i in range(size):
        while segments[i] is None:
            redraws += 1
            if redraws > MAX_RESAMPLES * size:
                raise ResampleRequired(
                    f"limit construction kept returning segments shorter than {min_steps} steps"
                )
            (segments[i],) = _last_zero_segments(spec, t_large, dt, rng, 1, min_steps)
    return segments, redraws


def sample_post_min_limit_many(
    spec: LevyModelSpec,
    t_large: float,
    dt: float,
    n_samples: int,
    rng: Generator,
    min_length: float = 0.0,
    workers: int = 1,
) -> List[GridPath]:
    """
    Batch of limit-construction segments. Segments with fewer than min_length/dt steps after
    the last zero (at least one step) are redrawn.
    """
    if classify(spec).drifts_to_minus_infinity:
        raise SpecValidationError(
            f"limit construction needs a model that does not drift to -infinity ({spec.label})"
        )
    min_steps = max(1, grid_steps(min_length, dt))
    # whole chunks of paths are held in memory at once
    chunk = max(1, min(REPLICATE_CHUNK, MAX_BATCH_CELLS // (grid_steps(t_large, dt) + 1)))
    seed = root_seed_from(rng)
    chunks = replicate_map(
        _limit_chunk, n_samples, seed, spec, t_large, dt, min_steps, workers=workers, chunk=chunk
    )
    redraws = sum(c[1] for c in chunks)
    if redraws:
        logger.info("limit construction redrew %d short segments", redraws)
    return [GridPath(dt, s, None, spec.label) for c in chunks for s in c[0]]
