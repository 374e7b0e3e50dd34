"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class SingularTimeError(ValueError):
    """An evaluation was requested exactly at a singular time point."""


class SweepAbort(RuntimeError):
    """A sweep produced a non-finite quantity and cannot continue."""


class ConfigError(ValueError):
    """A problem file failed to parse or validate."""
