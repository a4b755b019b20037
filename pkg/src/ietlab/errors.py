"""Exception taxonomy shared by all ietlab modules."""


class IetLabError(Exception):
    """Base class for every error raised by ietlab."""


class ZeroLength(IetLabError, ValueError):
    pass


class BadPermutation(IetLabError, ValueError):
    pass


class ReduciblePermutation(IetLabError, ValueError):
    pass


class OutOfDomain(IetLabError, ValueError):
    pass


class PrecisionExhausted(IetLabError, ArithmeticError):
    """A comparison fell below the working tolerance without an exact answer."""

    def __init__(self, msg, path=None):
        super().__init__(msg)
        self.path = path


class Tie(IetLabError):
    """Rauzy step undefined: the two competing lengths coincide.

    ``path`` carries the part of the induction built before the tie, when any.
    """

    def __init__(self, msg, path=None):
        super().__init__(msg)
        self.path = path


class RunTooLong(IetLabError):
    def __init__(self, msg, path=None):
        super().__init__(msg)
        self.path = path


class IndexOutOfRange(IetLabError, IndexError):
    pass


class SingularMatrix(IetLabError, ArithmeticError):
    pass


class NonPositiveInput(IetLabError, ValueError):
    pass


class NonPositiveMatrix(IetLabError, ValueError):
    pass


class ZeroImage(IetLabError, ValueError):
    pass


class FloorCountExceeded(IetLabError):
    pass


class ReturnTimeExceeded(IetLabError):
    pass


class VerificationFailed(IetLabError):
    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


class SingularHit(IetLabError, ArithmeticError):
    """An orbit point came within tolerance of a roof singularity."""

    def __init__(self, msg, index=None):
        super().__init__(msg)
        self.index = index


class RegionOutsideXf(IetLabError, ValueError):
    pass
