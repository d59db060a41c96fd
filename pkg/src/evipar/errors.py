"""Exception taxonomy shared across the package.

The CLI maps these onto process exit codes, so raising the right class
matters more than the message text: ConfigError -> 2, DataError -> 3,
NumericalAbort -> 4.
"""


class ConfigError(ValueError):
    """A run or task configuration is malformed or out of range."""


class DataError(ValueError):
    """A dataset, checkpoint, or feature file is missing or corrupt."""


class NumericalAbort(RuntimeError):
    """Training was stopped because too many steps produced non-finite values."""
