"""Exception hierarchy shared by all modules."""


class ClusteringError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(ClusteringError, ValueError):
    pass


class EmptyCenters(ClusteringError, ValueError):
    pass


class EmptyInput(ClusteringError, ValueError):
    pass


class NonFiniteCoordinate(ClusteringError, ValueError):
    pass


class TooLarge(ClusteringError, ValueError):
    """Exhaustive enumeration would exceed the configured bound."""


class InvalidFixed(ClusteringError, ValueError):
    pass


class BadDimension(ClusteringError, ValueError):
    pass


class EmptyCoreset(ClusteringError):
    """Every noisy cell weight fell below the pruning floor."""


class SolverFailure(ClusteringError, RuntimeError):
    pass


class TooManyCandidates(ClusteringError):
    pass


class NonTermination(ClusteringError, RuntimeError):
    pass


class BudgetExceeded(ClusteringError):
    pass


class ParseError(ClusteringError, ValueError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column
