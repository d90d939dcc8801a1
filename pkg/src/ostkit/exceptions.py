"""Exception hierarchy shared across the package.

Two broad families matter for callers (and for CLI exit codes): problems
with the inputs handed to us, and numerical failures encountered while
computing. Everything derives from :class:`OstkitError` so library users
can catch one base type.
"""


class OstkitError(Exception):
    """Base class for all errors raised by ostkit."""


class DataError(OstkitError, ValueError):
    """Invalid or degenerate input: bad shapes, bad domains, bad files,
    degenerate samples (all points identical, tau exactly zero, duplicated
    kernels), configs with unknown keys, oversized enumeration requests."""


class IdxFormatError(DataError):
    """Malformed IDX (MNIST) file. Carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class NumericalError(OstkitError, ArithmeticError):
    """A numerical procedure failed: iteration cap hit, a required
    positivity assumption violated in floating point, and similar."""


class SingularMatrixError(NumericalError):
    """Matrix too ill-conditioned for the requested operation.

    ``condition_number`` is the estimated spectral condition number
    (``inf`` when an eigenvalue is non-positive).
    """

    def __init__(self, message: str, condition_number: float):
        super().__init__(f"{message} (condition number {condition_number:.3e})")
        self.condition_number = condition_number
