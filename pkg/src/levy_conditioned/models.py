from __future__ import annotations
import logging
import math
import re
from dataclasses import dataclass
from enum import IntEnum, auto
from typing import Mapping, Optional, Tuple, Union

import numpy as np
from numpy.random import Generator
from scipy.optimize import brentq

from .util import SpecValidationError

logger = logging.getLogger(__name__)

Size = Union[int, Tuple[int, ...]]


class Family(IntEnum):
    """
    Implemented Lévy model families. None of them is a compound Poisson process: the
    jump families always carry a drift or a Gaussian part.
    """

    BrownianWithDrift = auto()  # drift, sigma
    Stable = auto()  # alpha, beta, scale
    SpectrallyPositiveCPDrift = auto()  # drift < 0, jump_rate, jump_law
    SpectrallyNegativeBMCP = auto()  # drift, sigma > 0, jump_rate, jump_law

    @staticmethod
    def from_name(name: str) -> Family:
        key = name.strip().lower().replace("-", "_")
        for family, aliases in FAMILY_ALIASES.items():
            if key in aliases:
                return family
        raise SpecValidationError(
            f"Unknown model family {name!r}, expected one of "
            f"{sorted(alias for aliases in FAMILY_ALIASES.values() for alias in aliases)}"
        )


FAMILY_ALIASES = {
    Family.BrownianWithDrift: ("brownian", "brownian_with_drift", "bm"),
    Family.Stable: ("stable",),
    Family.SpectrallyPositiveCPDrift: ("spectrally_positive", "spectrally_positive_cp_drift"),
    Family.SpectrallyNegativeBMCP: ("spectrally_negative", "spectrally_negative_bm_cp"),
}


class JumpLawTag(IntEnum):
    Exponential = auto()  # rate theta, mean 1/theta
    Uniform = auto()  # uniform on (0, b)
    PointMass = auto()  # point mass at a


JUMP_LAW_PATTERN = re.compile(r"^\s*(exponential|uniform|point)\s*\(\s*([^)]+?)\s*\)\s*$")


@dataclass(frozen=True)
class JumpLaw:
    """Law of the jump magnitudes of a compound Poisson part (always positive)."""

    tag: JumpLawTag
    parameter: float

    def __post_init__(self) -> None:
        if not self.parameter > 0 or not math.isfinite(self.parameter):
            raise SpecValidationError(
                f"{self.tag.name} jump law expects a positive parameter, but got {self.parameter}"
            )

    @staticmethod
    def exponential(rate: float) -> JumpLaw:
        return JumpLaw(JumpLawTag.Exponential, rate)

    @staticmethod
    def uniform(b: float) -> JumpLaw:
        return JumpLaw(JumpLawTag.Uniform, b)

    @staticmethod
    def point_mass(a: float) -> JumpLaw:
        return JumpLaw(JumpLawTag.PointMass, a)

    @staticmethod
    def parse(text: str) -> JumpLaw:
        """
        >>> assert JumpLaw.parse("exponential(2)") == JumpLaw.exponential(2.0)
        """
        match = JUMP_LAW_PATTERN.match(text.lower())
        if match is None:
            raise SpecValidationError(
                f"Cannot parse jump law {text!r}, expected exponential(θ), uniform(b) or point(a)"
            )
        name, value = match.groups()
        try:
            parameter = float(value)
        except ValueError:
            raise SpecValidationError(f"Jump law parameter {value!r} is not a number")
        tag = {
            "exponential": JumpLawTag.Exponential,
            "uniform": JumpLawTag.Uniform,
            "point": JumpLawTag.PointMass,
        }[name]
        return JumpLaw(tag, parameter)

    def __str__(self) -> str:
        name = {
            JumpLawTag.Exponential: "exponential",
            JumpLawTag.Uniform: "uniform",
            JumpLawTag.PointMass: "point",
        }[self.tag]
        return f"{name}({self.parameter!r})"

    def mean(self) -> float:
        if self.tag == JumpLawTag.Exponential:
            return 1.0 / self.parameter
        if self.tag == JumpLawTag.Uniform:
            return self.parameter / 2.0
        return self.parameter

    def laplace(self, lam: float) -> float:
        """E[exp(-lam * J)]"""
        if self.tag == JumpLawTag.Exponential:
            return self.parameter / (self.parameter + lam)
        if self.tag == JumpLawTag.Uniform:
            z = lam * self.parameter
            return -math.expm1(-z) / z if z > 0 else 1.0
        return math.exp(-lam * self.parameter)

    def sample(self, rng: Generator, size: Size) -> np.ndarray:
        if self.tag == JumpLawTag.Exponential:
            return rng.exponential(1.0 / self.parameter, size)
        if self.tag == JumpLawTag.Uniform:
            return rng.uniform(0.0, self.parameter, size)
        return np.full(size, self.parameter, dtype=float)

    def sample_size_biased(self, rng: Generator, size: Size) -> np.ndarray:
        """Draws from x * law(dx) / mean."""
        if self.tag == JumpLawTag.Exponential:
            return rng.gamma(2.0, 1.0 / self.parameter, size)
        if self.tag == JumpLawTag.Uniform:
            return self.parameter * np.sqrt(rng.random(size))
        return np.full(size, self.parameter, dtype=float)


@dataclass(frozen=True)
class LevyModelSpec:
    """
    Parametric description of one model. Only the fields of the chosen family are
    meaningful; `validate` enforces the family constraints.
    """

    family: Family
    label: str
    drift: float = 0.0
    sigma: float = 0.0
    alpha: float = 2.0
    beta: float = 0.0
    scale: float = 1.0
    jump_rate: float = 0.0
    jump_law: Optional[JumpLaw] = None

    def __post_init__(self) -> None:
        self.validate()

    @staticmethod
    def brownian(drift: float = 0.0, sigma: float = 1.0, label: str = "bm") -> LevyModelSpec:
        return LevyModelSpec(Family.BrownianWithDrift, label, drift=drift, sigma=sigma)

    @staticmethod
    def stable(
        alpha: float, beta: float = 0.0, scale: float = 1.0, label: str = "stable"
    ) -> LevyModelSpec:
        return LevyModelSpec(Family.Stable, label, alpha=alpha, beta=beta, scale=scale)

    @staticmethod
    def spectrally_positive(
        drift: float, jump_rate: float, jump_law: JumpLaw, label: str = "sp"
    ) -> LevyModelSpec:
        return LevyModelSpec(
            Family.SpectrallyPositiveCPDrift,
            label,
            drift=drift,
            jump_rate=jump_rate,
            jump_law=jump_law,
        )

    @staticmethod
    def spectrally_negative(
        drift: float,
        sigma: float,
        jump_rate: float = 0.0,
        jump_law: Optional[JumpLaw] = None,
        label: str = "sn",
    ) -> LevyModelSpec:
        return LevyModelSpec(
            Family.SpectrallyNegativeBMCP,
            label,
            drift=drift,
            sigma=sigma,
            jump_rate=jump_rate,
            jump_law=jump_law,
        )

    @staticmethod
    def from_mapping(label: str, values: Mapping[str, str]) -> LevyModelSpec:
        """Build a spec from the string key/values of a `[model:<label>]` config section."""
        if "family" not in values:
            raise SpecValidationError(f"Model {label!r} has no family")
        family = Family.from_name(values["family"])
        allowed = {"family"} | set(FAMILY_FIELDS[family])
        unknown = sorted(set(values) - allowed)
        if unknown:
            raise SpecValidationError(
                f"Model {label!r} of family {family.name} does not accept keys {unknown}"
            )
        kwargs = {}
        for key, raw in values.items():
            if key == "family":
                continue
            if key == "jump_law":
                kwargs[key] = JumpLaw.parse(raw)
                continue
            try:
                kwargs[key] = float(raw)
            except ValueError:
                raise SpecValidationError(f"Model {label!r}: {key} = {raw!r} is not a number")
        return LevyModelSpec(family, label, **kwargs)

    def validate(self) -> None:
        if not self.label or not re.match(r"^[A-Za-z0-9_.-]+$", self.label):
            raise SpecValidationError(f"Model label {self.label!r} is not a valid identifier")
        if self.family == Family.BrownianWithDrift:
            if self.sigma < 0:
                raise SpecValidationError(f"sigma must be nonnegative, but got {self.sigma}")
            if self.sigma == 0 and self.drift == 0:
                raise SpecValidationError("BrownianWithDrift(0, 0) is the null process")
        elif self.family == Family.Stable:
            if not 0 < self.alpha <= 2:
                raise SpecValidationError(f"alpha must be in (0, 2], but got {self.alpha}")
            if not -1 <= self.beta <= 1:
                raise SpecValidationError(f"beta must be in [-1, 1], but got {self.beta}")
            if not self.scale > 0:
                raise SpecValidationError(f"scale must be positive, but got {self.scale}")
            if self.alpha <= 1 and abs(self.beta) == 1:
                raise SpecValidationError(
                    f"Stable(alpha={self.alpha}, beta={self.beta}) is a monotone process, "
                    "outside the validated range of the sampler"
                )
            if self.alpha == 1 and self.beta != 0:
                raise SpecValidationError(
                    "Stable with alpha = 1 is only supported in the symmetric case beta = 0"
                )
        elif self.family == Family.SpectrallyPositiveCPDrift:
            if not self.drift < 0:
                raise SpecValidationError(
                    f"SpectrallyPositiveCPDrift needs a negative drift, but got {self.drift}"
                )
            if not self.jump_rate > 0 or self.jump_law is None:
                raise SpecValidationError(
                    "SpectrallyPositiveCPDrift needs jump_rate > 0 and a jump_law"
                )
        elif self.family == Family.SpectrallyNegativeBMCP:
            if not self.sigma > 0:
                raise SpecValidationError(
                    f"SpectrallyNegativeBMCP needs sigma > 0, but got {self.sigma}"
                )
            if self.jump_rate < 0:
                raise SpecValidationError(
                    f"jump_rate must be nonnegative, but got {self.jump_rate}"
                )
            if self.jump_rate > 0 and self.jump_law is None:
                raise SpecValidationError("SpectrallyNegativeBMCP with jumps needs a jump_law")

    @property
    def has_gaussian(self) -> bool:
        if self.family == Family.Stable:
            return self.alpha == 2
        return self.sigma > 0

    @property
    def has_positive_jumps(self) -> bool:
        if self.family == Family.Stable:
            return self.alpha < 2 and self.beta > -1
        return self.family == Family.SpectrallyPositiveCPDrift

    @property
    def has_negative_jumps(self) -> bool:
        if self.family == Family.Stable:
            return self.alpha < 2 and self.beta < 1
        return self.family == Family.SpectrallyNegativeBMCP and self.jump_rate > 0

    def mean(self) -> Optional[float]:
        """E[X_1], or None when it does not exist."""
        if self.family == Family.BrownianWithDrift:
            return self.drift
        if self.family == Family.Stable:
            return 0.0 if self.alpha > 1 else None
        jump_mean = self.jump_rate * self.jump_law.mean() if self.jump_law else 0.0
        if self.family == Family.SpectrallyPositiveCPDrift:
            return self.drift + jump_mean
        return self.drift - jump_mean


FAMILY_FIELDS = {
    Family.BrownianWithDrift: ("drift", "sigma"),
    Family.Stable: ("alpha", "beta", "scale"),
    Family.SpectrallyPositiveCPDrift: ("drift", "jump_rate", "jump_law"),
    Family.SpectrallyNegativeBMCP: ("drift", "sigma", "jump_rate", "jump_law"),
}


@dataclass(frozen=True)
class RegularityFlags:
    regular_upwards: bool
    regular_downwards: bool
    creeps_upwards: bool
    drifts_to_minus_infinity: bool
    oscillates_or_drifts_up: bool
    drifts_to_plus_infinity: bool


def classify(spec: LevyModelSpec) -> RegularityFlags:
    """
    Closed-form fluctuation rules per family:
    - a Gaussian component makes 0 regular both ways and the process creeps upwards;
    - bounded variation with negative drift and only positive jumps: regular downwards,
      irregular upwards, no upward creeping;
    - strictly stable models with two-sided jumps are regular both ways and oscillate;
      they creep upwards only without positive jumps (beta = -1, alpha > 1);
    - E[X_1] < 0 means drifting to -infinity, E[X_1] > 0 drifting to +infinity.
    """
    spec.validate()
    mean = spec.mean()
    drifts_down = mean is not None and mean < 0
    drifts_up = mean is not None and mean > 0

    if spec.family == Family.Stable:
        return RegularityFlags(
            regular_upwards=True,
            regular_downwards=True,
            creeps_upwards=not spec.has_positive_jumps,
            drifts_to_minus_infinity=False,
            oscillates_or_drifts_up=True,
            drifts_to_plus_infinity=False,
        )
    if spec.family == Family.SpectrallyPositiveCPDrift:
        regular_up, regular_down, creeps = False, True, False
    elif spec.has_gaussian:
        regular_up, regular_down, creeps = True, True, True
    else:
        # deterministic drift
        regular_up, regular_down, creeps = spec.drift > 0, spec.drift < 0, spec.drift > 0
    return RegularityFlags(
        regular_upwards=regular_up,
        regular_downwards=regular_down,
        creeps_upwards=creeps,
        drifts_to_minus_infinity=drifts_down,
        oscillates_or_drifts_up=not drifts_down,
        drifts_to_plus_infinity=drifts_up,
    )


def positivity_parameter(spec: LevyModelSpec) -> float:
    """rho = P(X_1 > 0) for strictly stable models."""
    if spec.family != Family.Stable:
        raise SpecValidationError("positivity parameter is only defined for stable models")
    if spec.alpha in (1.0, 2.0):
        return 0.5
    zeta = spec.beta * math.tan(math.pi * spec.alpha / 2)
    return 0.5 + math.atan(zeta) / (math.pi * spec.alpha)


def descending_exponent(spec: LevyModelSpec) -> float:
    """
    For models with no negative jumps that drift to +infinity, -inf X is exponential with
    rate Phi, the positive root of the Laplace exponent of -X.
    """
    if spec.has_negative_jumps or not classify(spec).drifts_to_plus_infinity:
        raise SpecValidationError(
            f"model {spec.label} must have no negative jumps and drift to +infinity"
        )
    if spec.family == Family.BrownianWithDrift:
        if spec.sigma == 0:
            return math.inf
        return 2 * spec.drift / spec.sigma**2
    if spec.family == Family.SpectrallyNegativeBMCP:
        return 2 * spec.drift / spec.sigma**2
    assert spec.family == Family.SpectrallyPositiveCPDrift and spec.jump_law is not None
    speed = -spec.drift
    if spec.jump_law.tag == JumpLawTag.Exponential:
        return spec.jump_rate / speed - spec.jump_law.parameter
    law, rate = spec.jump_law, spec.jump_rate

    def slope(lam: float) -> float:
        return speed - rate * (1 - law.laplace(lam)) / lam

    return brentq(slope, 1e-12, rate / speed)


def increment_scale(spec: LevyModelSpec, dt: float) -> float:
    """Typical size of one grid step of the continuous part of the path."""
    if spec.family == Family.Stable:
        return spec.scale * dt ** (1.0 / spec.alpha)
    if spec.sigma > 0:
        return spec.sigma * math.sqrt(dt)
    return abs(spec.drift) * dt


def chambers_mallows_stuck(alpha: float, beta: float, rng: Generator, size: Size) -> np.ndarray:
    """
    Standard stable variates S_alpha(1, beta, 0) in the 1-parameterization, by the
    Chambers-Mallows-Stuck transform of a uniform angle and a unit exponential.
    """
    v = (rng.random(size) - 0.5) * np.pi
    w = rng.standard_exponential(size)
    if alpha == 2:
        return 2 * np.sqrt(w) * np.sin(v)
    if alpha == 1:
        half_pi_bv = np.pi / 2 + beta * v
        return (2 / np.pi) * (
            half_pi_bv * np.tan(v) - beta * np.log((np.pi / 2) * w * np.cos(v) / half_pi_bv)
        )
    zeta = beta * np.tan(np.pi * alpha / 2)
    shift = np.arctan(zeta) / alpha
    factor = (1 + zeta**2) ** (1 / (2 * alpha))
    return (
        factor
        * np.sin(alpha * (v + shift))
        / np.cos(v) ** (1 / alpha)
        * (np.cos(v - alpha * (v + shift)) / w) ** ((1 - alpha) / alpha)
    )


def compound_poisson_sums(
    rate_dt: float, law: JumpLaw, rng: Generator, size: Size
) -> np.ndarray:
    """Exact compound Poisson increments: Poisson counts, then sums of that many jumps."""
    shape = (size,) if isinstance(size, int) else tuple(size)
    n = int(np.prod(shape))
    counts = rng.poisson(rate_dt, n)
    jumps = law.sample(rng, int(counts.sum()))
    owners = np.repeat(np.arange(n), counts)
    return np.bincount(owners, weights=jumps, minlength=n).reshape(shape)


def sample_increments(spec: LevyModelSpec, dt: float, rng: Generator, size: Size) -> np.ndarray:
    """Independent exact draws of X_{t+dt} - X_t."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, but got {dt}")
    if spec.family == Family.Stable:
        z = chambers_mallows_stuck(spec.alpha, spec.beta, rng, size)
        if spec.alpha == 1:
            return spec.scale * dt * z
        return spec.scale * dt ** (1.0 / spec.alpha) * z

    out = np.full(size, spec.drift * dt, dtype=float)
    if spec.sigma > 0:
        out += spec.sigma * math.sqrt(dt) * rng.standard_normal(size)
    if spec.jump_rate > 0 and spec.jump_law is not None:
        jumps = compound_poisson_sums(spec.jump_rate * dt, spec.jump_law, rng, size)
        if spec.family == Family.SpectrallyPositiveCPDrift:
            out += jumps
        else:
            out -= jumps
    return out


def sample_increment(spec: LevyModelSpec, dt: float, rng: Generator) -> float:
    return float(sample_increments(spec, dt, rng, 1)[0])


def sample_jumps(spec: LevyModelSpec, rng: Generator, n: int) -> np.ndarray:
    """Signed jump sizes of the compound Poisson part."""
    if spec.jump_law is None or spec.jump_rate <= 0:
        raise SpecValidationError(f"model {spec.label} has no compound Poisson part")
    magnitudes = spec.jump_law.sample(rng, n)
    if spec.family == Family.SpectrallyPositiveCPDrift:
        return magnitudes
    return -magnitudes
