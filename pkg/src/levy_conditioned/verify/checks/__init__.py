from typing import Callable, Dict

from .check import *

# Identities of the conditioned law
from .min_law import *
from .weak_convergence import *
from .excursion_identity import *
from .entrance_asymptotics import *
from .creeping import *
from .last_passage import *
from .independence import *
from .sampler_agreement import *

# Harmonic function and entrance law
from .harmonic_checks import *

# Model-level invariants
from .model_checks import *
from .calibration import *

# Every runner has the signature (spec, settings, seed, workers) -> TestReport
CHECK_IMPL: Dict[Check, Callable] = {
    Check.MinLaw: run_min_law,
    Check.WeakConvergence: run_weak_convergence,
    Check.ExcursionIdentity: run_excursion_identity,
    Check.EntranceAsymptotics: run_entrance_asymptotics,
    Check.CreepingHeight: run_creeping,
    Check.LastPassage: run_last_passage,
    Check.Independence: run_independence,
    Check.HConsistency: run_h_consistency,
    Check.ExcessiveInvariant: run_excessive_invariant,
    Check.EntranceLaw: run_entrance_law,
    Check.SamplerAgreement: run_sampler_agreement,
    Check.StableGaussian: run_stable_gaussian,
    Check.Additivity: run_additivity,
    Check.JumpSign: run_jump_sign,
    Check.NullCalibration: run_null_calibration,
}
