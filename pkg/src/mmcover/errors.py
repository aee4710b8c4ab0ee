"""Exception hierarchy.

Every error carries a short machine-readable ``code`` and maps onto one of the
CLI exit codes: input problems exit with 2, infeasible requests with 3 and
internal invariant violations with 4.
"""

from __future__ import annotations


class MMCError(Exception):
    code = "error"
    exit_code = 1


class InputError(MMCError):
    code = "input"
    exit_code = 2


class SchemaError(InputError):
    code = "schema"


class SymmetryError(InputError):
    code = "metric-symmetry"


class TriangleError(InputError):
    code = "metric-triangle"


class MetricError(InputError):
    """Negative distances, nonzero diagonal, non-finite entries."""

    code = "metric"


class DemandRangeError(InputError):
    code = "demand-range"


class UnknownPointError(InputError):
    code = "unknown-point"


class GuardError(InputError):
    """An exact search was asked to run beyond its configured size guard."""

    code = "guard"

    def __init__(self, message: str, count: int | None = None):
        super().__init__(message)
        self.count = count


class InfeasibleError(MMCError):
    code = "infeasible"
    exit_code = 3


class InvariantViolation(MMCError):
    code = "invariant"
    exit_code = 4

    def __init__(self, message: str, report: object = None):
        super().__init__(message)
        self.report = report


class AvailabilityError(InvariantViolation):
    code = "availability"


class HostingError(InvariantViolation):
    code = "hosting"

    def __init__(self, message: str, client: int | None = None, report: object = None):
        super().__init__(message, report)
        self.client = client
