"""Exception hierarchy.

``ValidationError`` covers bad input (CLI exit code 1). ``DegeneracyError``
covers measure-zero numerical coincidences such as a singular transfer
matrix or a degenerate loop (CLI exit code 2: re-draw, don't abort).
"""


class QsatError(Exception):
    pass


class ValidationError(QsatError, ValueError):
    pass


class CapacityError(ValidationError):
    """Requested more distinct edges than the hypergraph can hold."""


class ArityError(ValidationError):
    pass


class RankError(ValidationError):
    pass


class CapExceededError(ValidationError):
    """Problem is larger than the configured exact-computation cap."""


class NoCertificateError(ValidationError):
    pass


class DegeneracyError(QsatError, ArithmeticError):
    pass


class SingularTransferError(DegeneracyError):
    def __init__(self, message: str, edge: int | None = None):
        super().__init__(message)
        self.edge = edge


class DegenerateTransferError(DegeneracyError):
    def __init__(self, message: str, edge: int | None = None):
        super().__init__(message)
        self.edge = edge


class DegenerateLoopError(DegeneracyError):
    pass
