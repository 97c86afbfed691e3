"""Closed-form reference laws the checks compare samples against."""
from __future__ import annotations
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.stats import chi, gamma, powerlaw, uniform

from ..harmonic import HarmonicEstimate
from ..models import Family, JumpLaw, JumpLawTag, LevyModelSpec

Cdf = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ReferenceLaw:
    name: str
    cdf: Cdf
    # left limit F(x-), only differs from cdf for laws with atoms
    left_cdf: Optional[Cdf] = None


def bessel3_marginal(t: float, sigma: float = 1.0) -> ReferenceLaw:
    """
    Time-t marginal of the conditioned Brownian motion started at 0 (a BES(3) process run at
    speed sigma^2): density sqrt(2/pi) y^2 s^-3 exp(-y^2 / 2 s^2), s = sigma sqrt(t).
    """
    law = chi(3, scale=sigma * math.sqrt(t))
    return ReferenceLaw(f"bes3(t={t!r}, sigma={sigma!r})", law.cdf)


def size_biased_jump_law(jump_law: JumpLaw) -> ReferenceLaw:
    """x pi(dx) / int u pi(du) for the supported jump laws."""
    if jump_law.tag == JumpLawTag.Exponential:
        law = gamma(2, scale=1.0 / jump_law.parameter)
        return ReferenceLaw(f"gamma(2, 1/{jump_law.parameter!r})", law.cdf)
    if jump_law.tag == JumpLawTag.Uniform:
        # density 2x/b^2 on (0, b)
        law = powerlaw(2, scale=jump_law.parameter)
        return ReferenceLaw(f"size-biased uniform(0, {jump_law.parameter!r})", law.cdf)
    a = jump_law.parameter
    return ReferenceLaw(
        f"point({a!r})",
        lambda x: (np.asarray(x) >= a).astype(float),
        lambda x: (np.asarray(x) > a).astype(float),
    )


def uniform_minimum(x0: float) -> ReferenceLaw:
    """Law of the overall minimum started from x0 when h(x) = x."""
    return ReferenceLaw(f"uniform(0, {x0!r})", uniform(0, x0).cdf)


def minimum_law(h_est: HarmonicEstimate, x0: float) -> ReferenceLaw:
    """
    P(U <= y) = 1 - h(x0 - y)/h(x0) on [0, x0), with an atom of mass h(0)/h(x0) at x0.
    """
    h_x0 = h_est.evaluate(x0)

    def survival(y: np.ndarray) -> np.ndarray:
        y = np.clip(np.asarray(y, dtype=float), 0.0, x0)
        return h_est.evaluate(x0 - y) / h_x0

    def cdf(y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return np.where(y >= x0, 1.0, np.where(y < 0, 0.0, 1.0 - survival(y)))

    def left_cdf(y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return np.where(y > x0, 1.0, np.where(y <= 0, 0.0, 1.0 - survival(y)))

    return ReferenceLaw(f"minimum law from {x0!r} ({h_est.method.tag})", cdf, left_cdf)


def conditioned_limit_marginal(spec: LevyModelSpec, t: float) -> Optional[ReferenceLaw]:
    """Registered closed form of the time-t marginal of the conditioned law started at 0."""
    if spec.family == Family.BrownianWithDrift and spec.drift == 0 and spec.sigma > 0:
        return bessel3_marginal(t, spec.sigma)
    if spec.family == Family.Stable and spec.alpha == 2:
        return bessel3_marginal(t, math.sqrt(2) * spec.scale)
    return None
