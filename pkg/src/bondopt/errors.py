"""Exception and warning types raised across the package."""


class BondOptError(Exception):
    """Base class for all package errors."""


class GridMismatch(BondOptError):
    pass


class NonAlignedShift(BondOptError):
    pass


class GridExhausted(BondOptError):
    pass


class NonPositiveCurve(BondOptError):
    pass


class FactorCountMismatch(BondOptError):
    pass


class NonFinite(BondOptError):
    pass


class DomainViolation(BondOptError):
    pass


class BracketFailure(BondOptError):
    pass


class NonConvergence(BondOptError):
    pass


class UnsupportedKind(BondOptError):
    pass


class StepTooLarge(BondOptError):
    pass


class DegenerateFund(BondOptError):
    pass


class ValidationError(BondOptError):
    """A configuration or model invariant is violated.

    ``field`` names the offending entry (dotted path) when known.
    """

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class ParseError(BondOptError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(field)
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class PositivityLost(UserWarning):
    """Euler reaction step produced a non-positive discounted price."""


class SingularGram(UserWarning):
    """Gram matrix is ill-conditioned; a pseudo-inverse was used."""
