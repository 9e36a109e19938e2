"""Exception types shared across the package.

Grouping them here keeps error handling in the CLI simple: anything that
derives from ValueError is a caller mistake (bad arguments, malformed
config), anything deriving from RuntimeError is a failure encountered
while computing.
"""


class OutOfDomainError(ValueError):
    """A query point lies outside the interpolant's domain box."""


class IncompleteBatchError(ValueError):
    """A surplus update was attempted without values for every new node."""


class EvaluationError(RuntimeError):
    """The user-supplied model evaluator raised at some collocation point.

    The offending physical point is attached so a failed refinement run
    can be diagnosed without re-running the model.
    """

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = None if point is None else tuple(point)


class UnrepairableGeometryError(RuntimeError):
    """No azimuth adjustment can separate a conflicting borehole pair."""


class InsufficientDataError(ValueError):
    """Too few samples to build a density estimate."""


class DegenerateParametersError(ValueError):
    """Physical parameters produce a singular or meaningless model."""


class SingularEvaluationError(ValueError):
    """A response was requested on a source's own axis."""
