from __future__ import annotations
import logging
from dataclasses import dataclass, fields, replace
from typing import Any, Callable, Dict, Mapping, Tuple

import numpy as np
from numpy.random import Generator

from ..harmonic import HarmonicEstimate, estimate_h_ladder, h_closed_form
from ..models import LevyModelSpec
from ..util import (
    DEFAULT_LEVEL_EXPONENTS,
    EPSILON_SCHEDULE,
    IN_PROOF_ETA,
    LADDER_EXCURSION_CAP,
    MAX_REJECTIONS,
    geometric_levels,
)

logger = logging.getLogger(__name__)

H_SOURCES = ("ladder", "closed-form")
DEFAULT_LEVELS = tuple(float(v) for v in geometric_levels(DEFAULT_LEVEL_EXPONENTS))


@dataclass(frozen=True)
class CheckSettings:
    """
    Numeric parameters shared by the checks. `[experiment]` values set them for every check
    and `[check:<name>]` sections override them for one check.
    """

    dt: float = 0.01
    horizon: float = 50.0
    n_paths: int = 2000
    x0: float = 1.0
    epsilon: float = EPSILON_SCHEDULE[-1]
    epsilon_schedule: Tuple[float, ...] = EPSILON_SCHEDULE
    x_grid: Tuple[float, ...] = (0.8, 0.4, 0.2, 0.1)
    agreement_starts: Tuple[float, ...] = (1.0, 0.5)
    t: float = 1.0
    t_values: Tuple[float, ...] = (0.5, 1.0)
    levels: Tuple[float, ...] = DEFAULT_LEVELS
    h_source: str = "ladder"
    ladder_cap: float = LADDER_EXCURSION_CAP
    barrier: float = 20.0
    x_pairs: Tuple[float, ...] = (1.0, 2.0, 0.5, 2.0)
    xt_pairs: Tuple[float, ...] = (1.0, 1.0, 0.5, 0.5)
    ratio_tolerance: float = 0.10
    t_large: float = 100.0
    entrance_min_length: float = 50.0
    excursion_horizon: float = 1000.0
    excursion_paths: int = 200
    a_grid: Tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    functional: str = "exp"
    eta: float = IN_PROOF_ETA
    lag: float = 0.5
    level: float = 1.0
    max_rejections: int = MAX_REJECTIONS
    n_increments: int = 100_000
    repetitions: int = 100
    calibration_size: int = 500

    def __post_init__(self) -> None:
        if not self.dt > 0 or self.horizon < self.dt:
            raise ValueError(f"need dt > 0 and horizon >= dt, got {self.dt}, {self.horizon}")
        if self.n_paths < 2:
            raise ValueError(f"n_paths must be at least 2, but got {self.n_paths}")
        if self.h_source not in H_SOURCES:
            raise ValueError(f"h_source must be one of {H_SOURCES}, but got {self.h_source!r}")
        if self.functional not in ENTRANCE_FUNCTIONS:
            raise ValueError(
                f"functional must be one of {sorted(ENTRANCE_FUNCTIONS)}, got {self.functional!r}"
            )
        for name in ("x_pairs", "xt_pairs"):
            if len(getattr(self, name)) % 2:
                raise ValueError(f"{name} must hold an even number of values")

    @staticmethod
    def field_types() -> Dict[str, Any]:
        return {f.name: f.type for f in fields(CheckSettings)}

    def updated(self, values: Mapping[str, Any]) -> CheckSettings:
        return replace(self, **values)

    @property
    def pairs(self) -> Tuple[Tuple[float, float], ...]:
        return tuple(zip(self.x_pairs[::2], self.x_pairs[1::2]))

    @property
    def xt_points(self) -> Tuple[Tuple[float, float], ...]:
        return tuple(zip(self.xt_pairs[::2], self.xt_pairs[1::2]))

    def summary(self, *names: str) -> Dict[str, Any]:
        return {name: getattr(self, name) for name in names}


def harmonic_for(
    spec: LevyModelSpec, settings: CheckSettings, rng: Generator, workers: int = 1
) -> HarmonicEstimate:
    """
    h on the settings level grid: the ladder estimate at the settings dt, or the closed
    form (with the skeleton shift) when requested and registered.
    """
    if settings.h_source == "closed-form":
        if h_closed_form(spec, 1.0) is not None:
            return HarmonicEstimate.from_closed_form(spec, settings.levels, settings.dt)
        logger.warning("no closed form of h for %s, using ladder counting", spec.label)
    return estimate_h_ladder(
        spec, settings.levels, settings.dt, settings.n_paths, settings.ladder_cap, rng, workers
    )


def _exp_decay(y: np.ndarray) -> np.ndarray:
    return np.exp(-np.asarray(y, dtype=float))


def _one(y: np.ndarray) -> np.ndarray:
    return np.ones_like(np.asarray(y, dtype=float))


def _zero(y: np.ndarray) -> np.ndarray:
    return np.zeros_like(np.asarray(y, dtype=float))


# module-level so that worker processes can unpickle them
ENTRANCE_FUNCTIONS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "exp": _exp_decay,
    "one": _one,
    "zero": _zero,
}


def entrance_function(name: str) -> Callable[[np.ndarray], np.ndarray]:
    """Bounded continuous test functions f(y) of the entrance asymptotics."""
    return ENTRANCE_FUNCTIONS[name]

