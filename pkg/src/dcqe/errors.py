"""Exception hierarchy for the dcqe package."""

from __future__ import annotations


class DcqeError(Exception):
    """Base class for all package errors."""


class InvalidConfig(DcqeError):
    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"invalid config field {field!r}: {reason}")


class ParseError(DcqeError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class OrderingNotValidated(DcqeError):
    """Raised when simulation is requested for a plan whose timing order failed."""


class BinsNotAssigned(DcqeError):
    pass


class DegeneratePredictions(DcqeError):
    """The causal and informational-coherence means coincide."""


class EmptyCampaign(DcqeError):
    pass


class MixedProvenance(DcqeError):
    pass


class ReportIOError(DcqeError):
    pass
