from typing import Optional, Union

import numpy as np
from numpy.random import Generator

from .errors import *
from .hash import *
from .param import *
from .parallel import *
from .typing import *


def rand_generator(seed: Optional[Union[int, Generator]] = None) -> Generator:
    if isinstance(seed, Generator):
        return seed
    return np.random.default_rng(seed)


def geometric_levels(exponents=DEFAULT_LEVEL_EXPONENTS, base: float = 2.0) -> np.ndarray:
    """Level grid 0, base**e0, base**e1, ... used for h estimates."""
    return np.concatenate([[0.0], base ** np.asarray(exponents, dtype=float)])


def grid_steps(span: float, dt: float) -> int:
    """Number of whole grid steps of size dt in span (robust to float round-off)."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, but got {dt}")
    return int(np.floor(span / dt + 1e-9))


def named_rng(seed: int, name: str) -> Generator:
    """Generator of the named sub-stream of a job seed."""
    return np.random.default_rng(derive_seed(seed, name))
