"""Exception hierarchy shared across the package."""


class ForeganError(Exception):
    """Base class for all package errors."""


class ShapeError(ForeganError, ValueError):
    pass


class ParameterError(ForeganError, ValueError):
    pass


class LoadError(ForeganError, OSError):
    pass


class StructuralError(ForeganError, ValueError):
    """Dataset directory is readable but internally inconsistent."""


class ConfigurationError(ForeganError, ValueError):
    pass


class DataError(ForeganError, ValueError):
    pass


class TrainingError(ForeganError, RuntimeError):
    def __init__(self, message: str, epoch: int):
        super().__init__(f"{message} (epoch {epoch})")
        self.epoch = epoch


class InversionError(ForeganError, RuntimeError):
    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step
