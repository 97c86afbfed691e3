from __future__ import annotations
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from numpy.random import Generator

from ..models import LevyModelSpec
from ..path import extract_excursions, reflect_at_infimum, simulate_path
from ..util import grid_steps, replicate_map, root_seed_from

logger = logging.getLogger(__name__)

# Long reflected paths are simulated one by one; a chunk holds this many of them
EXCURSION_CHUNK = 16


@dataclass(frozen=True, eq=False)
class ExcursionSample:
    """
    Excursions of the reflected process X - inf X away from 0, read off long skeleton paths
    started at 0. The counting local time is the number of zeros of the reflected path, so
    every estimate of the excursion measure is `count / local_time`.
    """

    dt: float
    local_time: int
    heights: np.ndarray
    lag_values: Dict[int, np.ndarray]
    lag_local_time: Dict[int, int]
    n_paths: int

    def lag_steps(self, t: float) -> int:
        return grid_steps(t, self.dt)

    def n_height_above(self, x: float) -> Tuple[float, int]:
        """Estimate of n(H > x) and the number of excursions behind it."""
        count = int(np.count_nonzero(self.heights > x))
        return count / self.local_time, count

    def n_alive(self, t: float, functional: Callable[[np.ndarray], np.ndarray]) -> float:
        """Estimate of n(F(X_t), t < zeta) for F a function of the value at t."""
        k = self.lag_steps(t)
        values = self.lag_values[k]
        return float(np.sum(functional(values))) / self.lag_local_time[k]

    def alive_values(self, t: float) -> np.ndarray:
        return self.lag_values[self.lag_steps(t)]


def _excursion_chunk(
    size: int,
    rng: Generator,
    spec: LevyModelSpec,
    dt: float,
    horizon: float,
    lags: Tuple[int, ...],
):
    local_time = 0
    heights: List[float] = []
    lag_values: Dict[int, List[np.ndarray]] = {k: [] for k in lags}
    lag_local_time = {k: 0 for k in lags}
    for _ in range(size):
        path = simulate_path(spec, 0.0, dt, horizon, rng)
        reflected = reflect_at_infimum(path).values
        n = len(reflected)
        zeros = np.flatnonzero(reflected == 0)
        records = extract_excursions(path)
        complete = [r for r in records if not r.censored]
        heights.extend(r.height for r in complete)
        # the zero opening a censored excursion has no observed height
        censored_tail = bool(records) and records[-1].censored
        local_time += len(zeros) - int(censored_tail)

        starts = np.array([r.start_index for r in records], dtype=np.int64)
        ends = np.array([r.end_index for r in records], dtype=np.int64)
        censored = np.array([r.censored for r in records], dtype=bool)
        for k in lags:
            last_start = n - 1 - k
            lag_local_time[k] += int(np.count_nonzero(zeros <= last_start))
            alive = (starts <= last_start) & (censored | (ends > starts + k))
            lag_values[k].append(reflected[starts[alive] + k])
    return (
        local_time,
        np.asarray(heights),
        {k: np.concatenate(v) if v else np.empty(0) for k, v in lag_values.items()},
        lag_local_time,
    )


def sample_excursions(
    spec: LevyModelSpec,
    dt: float,
    horizon: float,
    n_paths: int,
    rng: Generator,
    lag_times: Sequence[float] = (),
    workers: int = 1,
) -> ExcursionSample:
    lags = tuple(sorted({grid_steps(t, dt) for t in lag_times}))
    seed = root_seed_from(rng)
    chunks = replicate_map(
        _excursion_chunk,
        n_paths,
        seed,
        spec,
        dt,
        horizon,
        lags,
        workers=workers,
        chunk=EXCURSION_CHUNK,
    )
    local_time = sum(c[0] for c in chunks)
    if local_time == 0:
        raise ValueError("no zero of the reflected path was observed")
    sample = ExcursionSample(
        dt,
        local_time,
        np.concatenate([c[1] for c in chunks]),
        {k: np.concatenate([c[2][k] for c in chunks]) for k in lags},
        {k: sum(c[3][k] for c in chunks) for k in lags},
        n_paths,
    )
    logger.info(
        "%s: %d complete excursions over counting local time %d",
        spec.label,
        len(sample.heights),
        local_time,
    )
    return sample


def poisson_interval(estimate: float, count: int, z: float = 1.96) -> Tuple[float, float]:
    """Normal approximation of the interval of an estimate proportional to a count."""
    if count == 0:
        return 0.0, math.inf
    half = z / math.sqrt(count)
    return estimate * (1 - half), estimate * (1 + half)
