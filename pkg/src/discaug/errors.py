"""Exception hierarchy shared by all discaug modules."""


class DiscaugError(Exception):
    """Base class for every error raised deliberately by discaug."""


class ConfigError(DiscaugError, ValueError):
    """Invalid user configuration (bad flag values, inconsistent settings)."""


class DataError(DiscaugError, ValueError):
    """Unreadable or malformed input data."""


class DivergenceError(DiscaugError, ArithmeticError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, epoch, message="non-finite loss"):
        self.epoch = epoch
        super().__init__(f"{message} at epoch {epoch}")
