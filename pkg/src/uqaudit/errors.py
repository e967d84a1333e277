"""Exception hierarchy.

Every error carries the name of the module that raised it so that the CLI
can print module-tagged diagnostics and map error families to exit codes.
"""

from __future__ import annotations


class AuditError(Exception):
    """Base class for all errors raised by this package."""

    module = "uqaudit"

    def __str__(self) -> str:
        return f"[{self.module}] {super().__str__()}"


class ConfigError(AuditError):
    """Invalid run or generator configuration."""


class InputError(AuditError):
    """Input data that violates a domain invariant."""


class DisparityError(AuditError):
    """Disparity evaluation cannot proceed."""

    module = "disparity"


# core
class InvalidSampleMatrix(InputError):
    module = "core"


class ConflictingAttributes(InputError):
    module = "core"

    def __init__(self, patient_id: str, detail: str = ""):
        self.patient_id = patient_id
        msg = f"patient {patient_id!r} has member cases with conflicting attributes"
        super().__init__(f"{msg}: {detail}" if detail else msg)


# uq
class DegenerateClasses(InputError):
    module = "uq"


# metrics
class LengthMismatch(InputError):
    module = "metrics"


class EmptyInput(InputError):
    module = "metrics"


# disparity
class UnknownAttribute(InputError):
    module = "disparity"


class UnknownValue(InputError):
    module = "disparity"


class SingleSubgroup(DisparityError):
    """Fewer than two subgroup values; no pair to compare."""


class UndefinedCell(DisparityError):
    """Strict mode: a subgroup cell has undefined performance."""


# synth
class InvalidConfig(ConfigError):
    module = "synth"


# io
class LineError(InputError):
    module = "io"

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class ParseError(LineError):
    pass


class InvariantViolation(LineError):
    pass


class DuplicateCaseId(LineError):
    def __init__(self, line: int, case_id: str):
        self.case_id = case_id
        super().__init__(line, f"duplicate case_id {case_id!r}")
