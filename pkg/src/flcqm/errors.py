"""Exception types raised across the package."""


class FlcqmError(Exception):
    """Base class for all package errors."""


class ZeroMass(FlcqmError, ArithmeticError):
    """The aggregated output membership function is identically zero."""


class FuzzyConfigError(FlcqmError, ValueError):
    """Malformed fuzzy variable, set or rule base."""


class InvalidPeriod(FlcqmError, ValueError):
    pass


class InvalidConfig(FlcqmError, ValueError):
    pass


class SchedulingInPast(FlcqmError, ValueError):
    pass


class ConservationError(FlcqmError, AssertionError):
    """Deadline accounting lost or double-counted a packet."""


class ParseError(FlcqmError, ValueError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class ValidationError(FlcqmError, ValueError):
    pass
