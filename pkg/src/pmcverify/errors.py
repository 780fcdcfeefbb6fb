"""Exception hierarchy shared by every stage of the verification pipeline."""


class VerificationError(Exception):
    """Base class for all errors raised by pmcverify."""


class InputError(VerificationError, ValueError):
    """Malformed or out-of-range user input (parameters, points, configs)."""


class ContractError(VerificationError):
    """A precondition of an operation does not hold for the supplied data."""


class GeometryError(VerificationError):
    """The geometric configuration is degenerate at the requested point."""


class DegeneracyError(GeometryError):
    pass


class OrientationError(GeometryError):
    pass


class FreeBoundaryViolation(GeometryError):
    pass


class InconsistencyError(VerificationError):
    """Inputs are individually valid but jointly inconsistent."""


class InsufficientDataError(VerificationError):
    pass
