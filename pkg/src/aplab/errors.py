"""Error taxonomy shared across the package.

The CLI maps these onto exit codes: UsageError -> 2, DataError -> 3,
CheckFailure -> 4.  ContractViolation signals a broken internal contract
(e.g. a strategy returning an edge outside the offered sample) and is never
an expected runtime outcome.
"""


class UsageError(ValueError):
    """Unknown identifier, bad flag combination, invalid parameter."""


class DataError(ValueError):
    """Malformed input file (edge list, instance JSON, CSV)."""


class CheckFailure(Exception):
    """A verification run found a violated property."""


class ContractViolation(RuntimeError):
    """An internal protocol was broken (out-of-sample edge, double swap, ...)."""
