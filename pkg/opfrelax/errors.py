from __future__ import annotations


class OpfRelaxError(Exception):
    """Base class for every error raised by opfrelax."""


class NetworkError(OpfRelaxError):
    pass


class CaseParseError(OpfRelaxError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedCaseError(CaseParseError):
    pass


class UnknownCaseError(OpfRelaxError):
    pass


class EnvelopeDomainError(OpfRelaxError):
    pass


class NotApplicableError(OpfRelaxError):
    """The requested model does not apply to this network."""


class SolverError(OpfRelaxError):
    pass


class NonHermitianError(OpfRelaxError):
    pass


class NonConvexError(OpfRelaxError):
    """A quadratic form that should be PSD is not."""


class InfeasiblePointError(OpfRelaxError):
    """A point handed to a mapping does not satisfy its own program."""
