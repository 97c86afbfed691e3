from __future__ import annotations
import csv
import logging
from dataclasses import dataclass, replace
from enum import IntEnum, auto
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.random import Generator

from .models import LevyModelSpec, sample_increments
from .util import (
    MAX_BATCH_CELLS,
    MAX_PATH_LENGTH,
    GridIndex,
    ResourceGuardError,
    grid_steps,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GridPath:
    """
    Skeleton of a càdlàg path: values[k] is X at time k * dt, no interpolation in between.
    When `killed_at` is set the path is only alive on the indices [0, killed_at).
    """

    dt: float
    values: np.ndarray
    killed_at: Optional[int] = None
    label: str = ""

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or len(values) == 0:
            raise ValueError("GridPath needs a nonempty one-dimensional value array")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, but got {self.dt}")
        if self.killed_at is not None and not 0 < self.killed_at <= len(values):
            raise ValueError(f"killed_at={self.killed_at} outside (0, {len(values)}]")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def alive(self) -> np.ndarray:
        """Values on [0, zeta)."""
        return self.values if self.killed_at is None else self.values[: self.killed_at]

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.dt

    @property
    def start(self) -> float:
        return float(self.values[0])

    def value_at(self, t: float) -> float:
        return float(self.values[grid_steps(t, self.dt)])

    def segment(self, begin: int, end: Optional[int] = None) -> GridPath:
        """Sub-path on [begin, end), re-indexed from 0."""
        return GridPath(self.dt, self.values[begin:end], None, self.label)


class Side(IntEnum):
    """The entrance sets of first_passage: (-inf, b), [b, inf), (b, inf), (-inf, b]."""

    BelowStrict = auto()
    AtOrAbove = auto()
    AboveStrict = auto()
    AtOrBelow = auto()

    def enters(self, values: np.ndarray, barrier: float) -> np.ndarray:
        if self == Side.BelowStrict:
            return values < barrier
        if self == Side.AtOrAbove:
            return values >= barrier
        if self == Side.AboveStrict:
            return values > barrier
        return values <= barrier


@dataclass(frozen=True)
class ExcursionRecord:
    """
    One excursion of the reflected path away from 0. `start_index` is the new-minimum
    epoch it leaves from, `end_index` the next new-minimum epoch (or the last index of the
    path when censored).
    """

    start_index: int
    end_index: int
    length: float
    height: float
    censored: bool = False

    @property
    def span_size(self) -> int:
        """Number of grid points where the reflected path is positive."""
        return self.end_index - self.start_index - (0 if self.censored else 1)


PathLike = Union[GridPath, np.ndarray, Sequence[float]]


def _alive_values(path: PathLike) -> np.ndarray:
    if isinstance(path, GridPath):
        return path.alive
    values = np.asarray(path, dtype=float)
    if values.ndim != 1 or len(values) == 0:
        raise ValueError("path must be a nonempty one-dimensional sequence")
    return values


def _check_grid(dt: float, horizon: float) -> int:
    if not dt > 0:
        raise ValueError(f"dt must be positive, but got {dt}")
    if horizon < dt:
        raise ValueError(f"horizon {horizon} is shorter than one step {dt}")
    n_steps = grid_steps(horizon, dt)
    if n_steps + 1 > MAX_PATH_LENGTH:
        raise ResourceGuardError(
            f"path of {n_steps + 1} grid points exceeds the cap of {MAX_PATH_LENGTH}"
        )
    return n_steps


def simulate_path(
    spec: LevyModelSpec, x0: float, dt: float, horizon: float, rng: Generator
) -> GridPath:
    """Path on [0, horizon] started at x0, with floor(horizon/dt) + 1 grid points."""
    n_steps = _check_grid(dt, horizon)
    values = np.empty(n_steps + 1)
    values[0] = x0
    np.cumsum(sample_increments(spec, dt, rng, n_steps), out=values[1:])
    values[1:] += x0
    return GridPath(dt, values, None, spec.label)


def simulate_paths(
    spec: LevyModelSpec,
    x0: Union[float, np.ndarray],
    dt: float,
    horizon: float,
    n_paths: int,
    rng: Generator,
) -> np.ndarray:
    """
    Batch of independent paths as an (n_paths, n_steps + 1) array. `x0` is a scalar or
    one start point per row.
    """
    n_steps = _check_grid(dt, horizon)
    if n_paths * (n_steps + 1) > MAX_BATCH_CELLS:
        raise ResourceGuardError(
            f"batch of {n_paths} x {n_steps + 1} exceeds the cap of {MAX_BATCH_CELLS} cells"
        )
    out = np.empty((n_paths, n_steps + 1))
    out[:, 0] = 0.0
    np.cumsum(sample_increments(spec, dt, rng, (n_paths, n_steps)), axis=1, out=out[:, 1:])
    out += np.reshape(x0, (-1, 1)) if np.ndim(x0) else x0
    return out


def running_extrema(path: PathLike) -> Tuple[np.ndarray, np.ndarray]:
    """
    >>> sup, inf = running_extrema([1, 0.5, 2])
    >>> assert list(sup) == [1, 1, 2] and list(inf) == [1, 0.5, 0.5]
    """
    values = _alive_values(path)
    return np.maximum.accumulate(values), np.minimum.accumulate(values)


def argmin_time(path: PathLike) -> GridIndex:
    """Last index attaining the minimum over [0, zeta)."""
    values = _alive_values(path)
    return GridIndex(len(values) - 1 - int(np.argmin(values[::-1])))


def first_passage(path: PathLike, barrier: float, side: Side) -> Optional[GridIndex]:
    """First index k >= 1 whose value lies in the entrance set, None when never."""
    values = _alive_values(path)
    hits = np.flatnonzero(side.enters(values[1:], barrier))
    if len(hits) == 0:
        return None
    return GridIndex(int(hits[0]) + 1)


def first_passage_rows(paths: np.ndarray, barrier: float, side: Side) -> np.ndarray:
    """Row-wise first_passage over a batch; -1 when a row never enters."""
    hits = side.enters(paths[:, 1:], barrier)
    first = np.argmax(hits, axis=1) + 1
    return np.where(hits.any(axis=1), first, -1)


def reflect_at_infimum(path: PathLike) -> GridPath:
    values = _alive_values(path)
    reflected = values - np.minimum.accumulate(values)
    if isinstance(path, GridPath):
        return replace(path, values=reflected, killed_at=None)
    return GridPath(1.0, reflected)


def extract_excursions(path: PathLike, dt: Optional[float] = None) -> List[ExcursionRecord]:
    """
    Maximal runs where the reflected path is positive, delimited by new-minimum epochs.

    >>> records = extract_excursions([0, 1, 0.5, -0.5, 0.5])
    >>> assert [(r.height, r.censored) for r in records] == [(1.0, False), (1.0, True)]
    """
    if dt is None:
        dt = path.dt if isinstance(path, GridPath) else 1.0
    reflected = reflect_at_infimum(path).values
    positive = np.concatenate([[0], (reflected > 0).astype(np.int8), [0]])
    edges = np.diff(positive)
    # runs cover [first, last)
    firsts = np.flatnonzero(edges == 1)
    lasts = np.flatnonzero(edges == -1)
    if len(firsts) == 0:
        return []
    heights = np.maximum.reduceat(reflected, firsts)[: len(firsts)]
    # reduceat spills into the following zero run; a zero never exceeds a positive maximum
    n = len(reflected)
    records = []
    for first, last, height in zip(firsts, lasts, heights):
        censored = bool(last == n)
        start = int(first) - 1
        end = n - 1 if censored else int(last)
        records.append(ExcursionRecord(start, end, (end - start) * dt, float(height), censored))
    return records


def last_passage(path: PathLike, x: float) -> Optional[GridIndex]:
    """Last index whose value is <= x, None when the path stays above x."""
    values = _alive_values(path)
    below = np.flatnonzero(values <= x)
    if len(below) == 0:
        return None
    return GridIndex(int(below[-1]))


def running_max_epoch(path: PathLike, before: int) -> GridIndex:
    """Last index strictly before `before` where the running maximum is attained."""
    values = _alive_values(path)
    if not 0 < before <= len(values):
        raise ValueError(f"index {before} outside (0, {len(values)}]")
    head = values[:before]
    return GridIndex(before - 1 - int(np.argmax(head[::-1])))


def write_path_csv(path: GridPath, file: Union[str, Path]) -> None:
    with open(file, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["time", "value"])
        for t, value in zip(path.times, path.values):
            writer.writerow([repr(float(t)), repr(float(value))])


def save_path_npz(path: GridPath, file: Union[str, Path]) -> None:
    killed_at = -1 if path.killed_at is None else path.killed_at
    np.savez(file, dt=path.dt, values=path.values, killed_at=killed_at, label=path.label)


def load_path_npz(file: Union[str, Path]) -> GridPath:
    with np.load(file) as data:
        killed_at = int(data["killed_at"])
        return GridPath(
            float(data["dt"]),
            data["values"],
            None if killed_at < 0 else killed_at,
            str(data["label"]),
        )
