"""Exception hierarchy.

Three top-level families map onto the CLI exit codes: usage problems (1),
data/validation problems (2), provider problems (3).
"""


class LoradexError(Exception):
    """Base class for all loradex errors."""


class UsageError(LoradexError):
    """Bad invocation: unknown flag values, missing arguments, bad combinations."""

    exit_code = 1


class DataError(LoradexError):
    """Invalid, inconsistent, or corrupt data."""

    exit_code = 2


class DimensionMismatchError(DataError):
    """Vector length differs from the corpus/index dimension."""


class DuplicateKeyError(DataError):
    """Two records share a key but carry different payloads."""


class MissingBaseError(DataError):
    """An adapter record has no vanilla counterpart for its (prompt, seed)."""


class InsufficientSamplesError(DataError):
    """Not enough diff vectors for the requested statistic."""


class DegenerateInputError(DataError):
    """Mathematically undefined request (all-zero diffs, constant scores, ...)."""


class FormatError(DataError):
    """Unparseable or corrupt file: bad magic, checksum failure, truncation."""


class ChecksumError(FormatError):
    """Stored digest does not match the payload."""


class EncoderMismatchError(DataError):
    """encoder_tag or dimension differs between index, query, or provider."""


class ProviderError(LoradexError):
    """Embedding provider failed or is unreachable."""

    exit_code = 3


class CacheMissError(ProviderError):
    """File-backed provider has no vector for the requested input."""


class CapabilityError(ProviderError):
    """Provider does not support the requested input kind."""
