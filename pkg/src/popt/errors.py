"""Exception types shared across the package."""


class PoptError(Exception):
    """Base class for all mechanism errors."""


class NumericalFailure(PoptError):
    """An iterative numerical routine did not reach its stopping test."""


class InvalidConfig(PoptError, ValueError):
    pass


class BundleSpaceTooLarge(PoptError, ValueError):
    pass


class RoundingStall(PoptError):
    """Iterative rounding found an all-fractional extreme point with no droppable good."""


class LotteryDivergence(PoptError):
    pass


class VerificationFailure(PoptError):
    """A runtime property check failed.

    The ``condition`` attribute names the violated property.
    """

    def __init__(self, condition, message=""):
        self.condition = condition
        super().__init__(f"{condition}: {message}" if message else condition)


class InputError(PoptError, ValueError):
    """Malformed input file; ``field`` and ``line`` locate the problem when known."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class ProblemTooLarge(PoptError, ValueError):
    pass
