"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError (and subclasses) exit 2,
I/O problems exit 4, everything else exits 3.
"""


class RefgameError(Exception):
    """Base class for all package errors."""


class ConfigError(RefgameError):
    """Invalid configuration value; message names the offending field."""


class ManifestError(ConfigError):
    """Malformed or invalid experiment manifest."""


class ShapeError(RefgameError):
    """Dimension mismatch between arrays; message carries both shapes."""


class DomainError(RefgameError):
    """Operation called outside its domain (empty test set, too few concepts, ...)."""


class DistributionError(RefgameError):
    """Vector claimed to be a probability distribution is not one."""


class NumericError(RefgameError):
    """Non-finite values where finite ones are required."""


class WorldLookupError(RefgameError, KeyError):
    """Instance or concept not found in the world it was claimed to belong to."""


class CheckpointError(RefgameError):
    """Unreadable, corrupted, or incompatible checkpoint file."""
