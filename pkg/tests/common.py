from pathlib import Path

import numpy as np

from levy_conditioned.models import JumpLaw, LevyModelSpec
from levy_conditioned.verify import CheckSettings

BM = LevyModelSpec.brownian()
BM_UP = LevyModelSpec.brownian(drift=1.0, label="bm-up")
BM_DOWN = LevyModelSpec.brownian(drift=-1.0, label="bm-down")
CAUCHY = LevyModelSpec.stable(1.0, label="cauchy")
STABLE_GAUSSIAN = LevyModelSpec.stable(2.0, label="stable2")
SP_EXP = LevyModelSpec.spectrally_positive(-0.5, 1.0, JumpLaw.exponential(1.0), label="sp-exp")
# mean -1.5 < 0: does not drift to +infinity
SP_EXP_DOWN = LevyModelSpec.spectrally_positive(
    -2.0, 0.5, JumpLaw.exponential(1.0), label="sp-exp-down"
)
# mean 0: oscillates
SP_OSC = LevyModelSpec.spectrally_positive(-1.0, 1.0, JumpLaw.exponential(1.0), label="sp-osc")
SN = LevyModelSpec.spectrally_negative(0.5, 1.0, 1.0, JumpLaw.exponential(2.0), label="sn")

# level grid shared by the closed-form estimates of the tests
LEVELS = (0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0)

# desk-scale settings: every check finishes in seconds with these
TINY = CheckSettings(
    dt=0.02,
    horizon=20.0,
    n_paths=200,
    x0=1.0,
    epsilon=0.1,
    levels=LEVELS,
    h_source="closed-form",
    n_increments=2000,
    repetitions=10,
    calibration_size=100,
)


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)


def write_config(directory: Path, text: str, name: str = "experiment.ini") -> Path:
    path = directory / name
    path.write_text(text)
    return path


def within_ks_margin(report, factor: float = 1.5) -> bool:
    """KS statistic below a multiple of its 1% critical value."""
    return report.statistic <= factor * report.critical_value
