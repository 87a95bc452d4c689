"""Exception types shared across the package."""


class LatentprobeError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(LatentprobeError):
    """Invalid configuration, hyperparameter, or argument combination."""


class DataError(LatentprobeError):
    """Malformed input data (CSV parsing, standardization, manifests)."""


class TrainingDivergence(LatentprobeError):
    """Non-finite loss or gradient encountered during optimization."""


class BundleError(LatentprobeError):
    """Missing or corrupt experiment bundle on disk."""
