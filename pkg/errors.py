"""
PhaseMarginals â exception hierarchy.

Every library failure raises a subclass of MarginalsError so the CLI can map
it onto an exit code (see mf.main). Report-carrying operations
(compatibility checks, Î»-range violations) return values instead.
"""


class MarginalsError(Exception):
    pass


class ConfigError(MarginalsError):
    pass


class TypeParseError(MarginalsError):
    """A type-string like "12'3" could not be turned into an AxisAssignment."""


class DimensionMismatch(MarginalsError):
    pass


class ShapeMismatch(MarginalsError):
    pass


class NormalizationError(MarginalsError):
    """Negative mass, or total mass (norm², weight sum) away from 1."""


class IncompatibleChain(MarginalsError):
    """Two members disagree after summing out their conflicting variables."""

    def __init__(self, message, deviation=None):
        super().__init__(message)
        self.deviation = deviation


class NotProperOrConnected(MarginalsError):
    pass


class ContainmentError(MarginalsError):
    pass


class EnumerationGuardExceeded(MarginalsError):
    pass


class InternalConsistencyError(MarginalsError):
    """A result that the admissibility theory rules out was produced."""


class NotALeaf(MarginalsError):
    pass


class SupportViolation(MarginalsError):
    pass


class CellCapExceeded(MarginalsError):
    pass


class QuantizationError(MarginalsError):
    pass


class InvalidCounterexampleOrder(MarginalsError):
    pass


class ChainFormatError(MarginalsError):
    """An input file is not valid JSON or does not follow the expected layout."""
