"""Exception hierarchy shared by all modules."""


class LioGraphError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(LioGraphError, ValueError):
    pass


class SingularSystemError(LioGraphError, ArithmeticError):
    """A triangular or normal system has a (numerically) zero pivot."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class UnderConstrainedError(SingularSystemError):
    """Elimination produced a singular conditional; `index` names the keyframe."""


class LayoutError(LioGraphError, ValueError):
    pass


class CovarianceError(LioGraphError, ValueError):
    pass


class ChainViolationError(LioGraphError, ValueError):
    pass


class DivergenceError(LioGraphError, ArithmeticError):
    pass


class FormatError(LioGraphError, ValueError):
    """Malformed encoded stream; `offset` is the byte position of the failure."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class KeyframeIndexError(LioGraphError, IndexError):
    pass
