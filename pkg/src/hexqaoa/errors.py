"""Exception types shared across the package.

The CLI maps these onto process exit codes, so library code should raise
the most specific type that applies instead of bare ValueError when the
failure is a user-facing input problem.
"""


class ConfigError(ValueError):
    """Invalid configuration value or unknown option."""


class CapacityError(ValueError):
    """Problem size exceeds a configured resource cap."""


class MissingInputError(FileNotFoundError):
    """A required input artifact does not exist."""


class FormatError(ValueError):
    """Malformed artifact file or unsupported format version."""
