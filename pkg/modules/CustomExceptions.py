from typing import Optional


class RegistrationError(Exception):
    pass

class MissingFeatures(RegistrationError):
    pass

class NonFiniteInput(RegistrationError):
    pass

class MassMismatch(RegistrationError):
    pass

class NonFiniteDual(RegistrationError):
    pass

class DegenerateRow(RegistrationError):
    pass

class DegenerateGeometry(RegistrationError):
    pass

class ZeroWeight(RegistrationError):
    pass

class TooFewPoints(RegistrationError):
    pass

class InfeasibleOverlap(RegistrationError):
    pass

class SchemaMismatch(RegistrationError):
    pass

class ConfigError(RegistrationError):
    pass


class ParseError(RegistrationError):
    """Malformed input file, located by 1-based line and column."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        location = ""
        if line is not None:
            location = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(location + message)


class DimensionMismatch(ParseError):
    """A data row whose length disagrees with the header."""

    def __init__(self, message: str, row: int, line: Optional[int] = None):
        self.row = row
        super().__init__(message, line=line)


class PhaseError(RegistrationError):
    """Wraps a failure raised inside a registration phase ('coarse', 'fine', 'refine[k]')."""

    def __init__(self, phase: str, original: Exception):
        self.phase = phase
        self.original = original
        super().__init__(f"{phase} phase: {type(original).__name__}: {original}")
