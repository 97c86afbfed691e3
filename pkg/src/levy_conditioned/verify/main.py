import logging

from ..models import LevyModelSpec
from ..report import TestReport
from .checks import CHECK_IMPL, Check
from .settings import CheckSettings

logger = logging.getLogger(__name__)


def run_check(
    check: Check, spec: LevyModelSpec, settings: CheckSettings, seed: int, workers: int = 1
) -> TestReport:
    if check not in CHECK_IMPL:
        raise NotImplementedError(check.tag)
    logger.info("running %s on %s with seed %d", check.tag, spec.label, seed)
    report = CHECK_IMPL[check](spec, settings, seed, workers)
    logger.info("%s on %s: %s", check.tag, spec.label, report.status)
    return report
