from __future__ import annotations
from enum import IntEnum, auto
from typing import List


class Check(IntEnum):
    """
    All named verifications a suite can select.
    """

    MinLaw = auto()
    WeakConvergence = auto()
    ExcursionIdentity = auto()
    EntranceAsymptotics = auto()
    CreepingHeight = auto()  # with the creep probability companions
    LastPassage = auto()
    Independence = auto()
    HConsistency = auto()
    ExcessiveInvariant = auto()
    EntranceLaw = auto()
    SamplerAgreement = auto()  # rejection against h-weighted marginals

    # Model-level invariants
    StableGaussian = auto()
    Additivity = auto()
    JumpSign = auto()

    NullCalibration = auto()

    @property
    def tag(self) -> str:
        return CHECK_TAGS[self]

    @staticmethod
    def from_tag(tag: str) -> Check:
        for check, name in CHECK_TAGS.items():
            if name == tag:
                return check
        raise ValueError(f"Unknown check {tag!r}, expected one of {Check.tags()}")

    @staticmethod
    def tags() -> List[str]:
        return [CHECK_TAGS[check] for check in Check]


CHECK_TAGS = {
    Check.MinLaw: "min-law",
    Check.WeakConvergence: "weak-convergence",
    Check.ExcursionIdentity: "excursion-identity",
    Check.EntranceAsymptotics: "entrance-asymptotics",
    Check.CreepingHeight: "creeping",
    Check.LastPassage: "last-passage",
    Check.Independence: "independence",
    Check.HConsistency: "h-consistency",
    Check.ExcessiveInvariant: "excessive-invariant",
    Check.EntranceLaw: "entrance-law",
    Check.SamplerAgreement: "sampler-agreement",
    Check.StableGaussian: "stable-gaussian",
    Check.Additivity: "additivity",
    Check.JumpSign: "jump-sign",
    Check.NullCalibration: "null-calibration",
}
