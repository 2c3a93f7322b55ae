"""
Exception hierarchy for the third-order integral toolkit.

Library modules raise these; main.py maps them onto exit codes
(SchemaError -> 2, every other SuperintegrabilityError -> 1).
"""


class SuperintegrabilityError(Exception):
    """Base class for all errors raised by the toolkit."""


class UnknownSymbolError(SuperintegrabilityError):
    """A variable or parameter name that was never declared."""

    def __init__(self, name):
        super().__init__(f"Unknown symbol '{name}'")
        self.name = name


class UnboundSymbolError(SuperintegrabilityError):
    """Evaluation was requested while some free symbols had no value."""

    def __init__(self, names):
        names = sorted(names)
        super().__init__(f"Unbound symbols: {', '.join(names)}")
        self.names = names


class InexactValueError(SuperintegrabilityError):
    """Exact evaluation produced (or was fed) a non-rational value."""


class NonPolynomialError(SuperintegrabilityError):
    """An expression is not polynomial in the requested variables."""


class DomainError(SuperintegrabilityError):
    """A point lies outside the domain of a chart or a potential."""


class SingularPointError(SuperintegrabilityError):
    """Evaluation at a singular locus of a chart or of a reduced equation."""


class ChartMismatchError(SuperintegrabilityError):
    """A potential tagged with one chart was used with another."""


class CompatibilityError(SuperintegrabilityError):
    """The linear compatibility condition fails where it is a precondition."""


class SingularCoefficientError(SuperintegrabilityError):
    """An ODE coefficient became singular (P_IV through w = 0)."""


class PoleRegionError(SuperintegrabilityError):
    """The requested span starts inside a flagged pole neighbourhood."""


class InitialDataError(SuperintegrabilityError):
    """Initial data violate a first integral or a required constraint."""


class NoRealRootError(SuperintegrabilityError):
    """A polynomial equation has no real root at the requested point."""


class SchemaError(SuperintegrabilityError):
    """Malformed job, candidate or coefficient input."""
