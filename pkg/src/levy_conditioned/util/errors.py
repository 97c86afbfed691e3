from typing import Optional


class LevyError(Exception):
    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.message = message


class SpecValidationError(LevyError):
    pass


class ResourceGuardError(LevyError):
    pass


class HarmonicRangeError(LevyError):
    pass


class DegenerateEstimateError(LevyError):
    pass


class ResampleRequired(LevyError):
    pass


class SamplerExhaustedError(LevyError):
    acceptance_rate: float
    attempts: int

    def __init__(self, message: str, acceptance_rate: float, attempts: int) -> None:
        super().__init__(message)
        self.acceptance_rate = acceptance_rate
        self.attempts = attempts


class ConfigError(LevyError):
    filename: Optional[str]
    line: Optional[int]

    def __init__(self, message: str, filename: Optional[str] = None, line: Optional[int] = None):
        location = ""
        if filename is not None:
            location = f"{filename}:{line}: " if line is not None else f"{filename}: "
        super().__init__(location + message)
        self.filename = filename
        self.line = line
