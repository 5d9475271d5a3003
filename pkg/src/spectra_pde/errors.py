"""Exception hierarchy shared by every layer of the solver."""


class SpectraError(Exception):
    """Base class for all solver errors."""


class DomainError(SpectraError, ValueError):
    """A point lies outside the interval or rectangle of a representation."""


class EmptyInputError(SpectraError, ValueError):
    pass


class EvaluationError(SpectraError, ValueError):
    """A sampled function returned a non-finite value."""


class UnresolvedError(SpectraError):
    """Adaptive refinement hit its size cap before the tail test passed."""

    def __init__(self, message, cap=None, size=None):
        super().__init__(message)
        self.cap = cap
        self.size = size


class IllPosedError(SpectraError):
    """The discrete problem has no unique solution."""


class IllPosedOperatorError(IllPosedError):
    pass


class SingularSystemError(IllPosedError):
    """A structured factorization met a (numerically) zero pivot."""

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class NonUniqueSolutionError(IllPosedError):
    """Eigenvalues of the two Sylvester pencils collide."""


class DependentConstraintsError(IllPosedError):
    pass


class CompatibilityError(IllPosedError):
    """Boundary data disagree where constraints meet (e.g. at corners)."""

    def __init__(self, message, defect=None):
        super().__init__(message)
        self.defect = defect


class ZeroOperatorError(IllPosedError):
    pass


class InternalConsistencyError(SpectraError):
    pass


class ResourceError(SpectraError):
    """A dense assembly would exceed the configured memory cap."""


class ParseError(SpectraError, ValueError):
    """Syntax error in an operator or constraint string."""

    def __init__(self, message, offset=None, text=None):
        self.reason = message
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset
        self.text = text

    def shifted(self, delta: int, text=None) -> "ParseError":
        """Same error with its offset moved by ``delta`` bytes (for substrings)."""
        off = None if self.offset is None else self.offset + delta
        return type(self)(self.reason, offset=off, text=text if text is not None else self.text)


class NonlinearityError(ParseError):
    pass


class SchemaError(SpectraError, ValueError):
    """A problem or result document is malformed."""
