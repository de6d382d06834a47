"""Exception hierarchy shared by all submodules."""


class FixtureError(Exception):
    """Base class for every error raised by this package."""


class InvalidSpecError(FixtureError, ValueError):
    """A model or run specification violates its preconditions."""


class DegenerateElementError(FixtureError, ValueError):
    """A beam element has (numerically) zero length."""


class SingularSystemError(FixtureError):
    """Stiffness factorization hit a nonpositive pivot (the structure is a mechanism)."""


class ParseError(FixtureError, ValueError):
    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{self.path}:{lineno}: {message}")


class DimensionMismatchError(FixtureError, ValueError):
    pass


class SymmetryViolationError(FixtureError, ValueError):
    pass


class InvalidPotentialError(FixtureError, ValueError):
    """Potential fixture set overlaps the pre-specified clamps or leaves the model."""


class NotApplicableError(FixtureError):
    """Rank certification requested for an (almost) zero force vector."""


class EmptyLayoutError(FixtureError):
    pass


class RankNotAchievedError(FixtureError):
    """Escalating the trace weight never produced a rank-one lifted matrix."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class BudgetUnreachableError(FixtureError):
    """Even without the group-lasso penalty fewer than n_a nodes carry force."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class MonotonicityError(FixtureError):
    """Cardinality increased with the lasso weight along a probed ladder."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class TooLargeError(FixtureError, ValueError):
    pass


class MissingInputError(FixtureError):
    pass


class SolverFailureError(FixtureError):
    """The conic solver stopped without an optimal point."""

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status
