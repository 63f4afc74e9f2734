"""Exception types raised across the package."""


class CalibrationError(Exception):
    """Base class for all package errors."""


class InvalidInputError(CalibrationError, ValueError):
    pass


class DegenerateGeometryError(CalibrationError, ValueError):
    pass


class InnovationDegenerateError(CalibrationError, ArithmeticError):
    pass


class FilterDivergenceError(CalibrationError, ArithmeticError):
    pass


class IllConditionedError(CalibrationError, ArithmeticError):
    pass


class GenerationError(CalibrationError):
    """A requested plane point could not be reached under the nominal model."""


class DivergenceError(CalibrationError, ArithmeticError):
    """Identification produced a non-finite objective; ``stage`` names where."""

    def __init__(self, stage: str, message: str = ""):
        self.stage = stage
        super().__init__(f"{stage}: {message or 'non-finite objective'}")


class ConfigError(CalibrationError, ValueError):
    pass
