"""Exception hierarchy. Each class maps onto one CLI exit code."""


class LabError(Exception):
    exit_code = 1


class ValidationError(LabError, ValueError):
    """Malformed input: bad matrix, invalid measure, non-Lipschitz data."""

    exit_code = 2


class CapExceededError(LabError):
    """A desk-scale cap was exceeded; the operation refuses rather than degrade."""

    exit_code = 3


class PropertyCheckError(LabError):
    """A checked mathematical property failed (martingale identity, duality gap...)."""

    exit_code = 4
