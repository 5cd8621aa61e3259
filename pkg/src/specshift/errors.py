"""Error taxonomy shared by the library and the CLI exit-code mapping."""


class ConfigError(ValueError):
    """Bad configuration key, value, or combination (CLI exit code 2)."""


class DataError(ValueError):
    """Unusable input data: parse failures, ragged rows, too-short series (exit code 3)."""


class NumericError(RuntimeError):
    """Non-finite values where finite ones are required, e.g. NaN loss (exit code 4)."""


class CheckpointError(ValueError):
    """Malformed or incompatible checkpoint file (exit code 5)."""
