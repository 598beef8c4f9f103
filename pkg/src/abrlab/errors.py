"""Exception types shared across the package.

The split matters for the CLI: validation problems (bad config, bad trace
file, bad arguments) exit with status 1, everything else with status 2.
"""


class AbrLabError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(AbrLabError):
    """Input data or configuration violates a documented invariant."""


class TraceParseError(ValidationError):
    """A trace file failed to parse; the message names the offending line."""


class UsageError(AbrLabError):
    """An operation was called out of contract (bad index, stepped-when-done, ...)."""


class NumericalError(AbrLabError):
    """A non-finite value appeared where finite numerics are required."""
