"""Exception taxonomy shared across the package.

The CLI maps these to process exit codes: configuration problems exit 2,
data/protocol problems exit 3, numeric failures exit 4.
"""


class GaitmmError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(GaitmmError):
    """Invalid configuration: bad hyperparameters, violated divisibility
    invariants, mismatched module wiring."""


class DataError(GaitmmError):
    """Invalid or insufficient data: empty sequences, malformed corpora,
    batches without a valid triplet, protocol/corpus mismatches."""


class ShapeError(DataError):
    """A tensor arrived with a shape the operation cannot accept
    (e.g. a frame count not divisible by the temporal window)."""


class NumericError(GaitmmError):
    """A non-finite value surfaced where the pipeline requires finite ones."""
