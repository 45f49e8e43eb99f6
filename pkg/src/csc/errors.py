"""Exception and warning types raised across the package."""


class CSCError(Exception):
    """Base class for all package errors."""


class ZeroAtom(CSCError, ValueError):
    pass


class DimensionMismatch(CSCError, ValueError):
    pass


class IndexOutOfRange(CSCError, IndexError):
    pass


class TooLarge(CSCError, MemoryError):
    pass


class RankDeficient(CSCError, ArithmeticError):
    pass


class SpecInvalid(CSCError, ValueError):
    pass


class PlanInvalid(CSCError, ValueError):
    pass


class MissingArtifact(CSCError, FileNotFoundError):
    pass


class FormatError(CSCError, ValueError):
    """Malformed dictionary / vector / key=value file."""


class NoConvergence(UserWarning):
    """Iteration cap reached before the stopping rule fired.

    Issued as a warning; the (flagged) result is still returned.
    """


class StoppingNotReached(NoConvergence):
    pass
