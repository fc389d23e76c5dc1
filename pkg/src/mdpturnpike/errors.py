"""Exception hierarchy.

Validation problems (bad input) derive from :class:`ValidationError`;
everything that signals an inconclusive or numerically broken analysis
derives from :class:`AnalysisError`. The CLI maps the two families to
exit codes 1 and 2.
"""


class TurnpikeError(Exception):
    """Base class for all package errors."""


class ValidationError(TurnpikeError, ValueError):
    """Input does not satisfy a schema or a documented invariant."""


class DimensionError(ValidationError):
    """Vector or matrix has the wrong (or empty) shape."""


class AnalysisError(TurnpikeError):
    """Analysis could not be completed or its result is inconclusive."""


class ModelConstructionError(AnalysisError):
    """A constructed transition matrix failed the stochasticity check."""


class EnumerationLimitError(AnalysisError):
    """An exhaustive enumeration would exceed its configured cap."""

    def __init__(self, what, count, cap):
        self.what = what
        self.count = count
        self.cap = cap
        super().__init__(f"{what}: {count} items exceed the enumeration cap {cap}")


class AssumptionViolationError(AnalysisError):
    """No single decision attains the component-wise maximum."""

    def __init__(self, states, message=None):
        self.states = tuple(states)
        super().__init__(
            message
            or f"no decision attains the component-wise maximum; conflicting states {list(self.states)}"
        )


class NumericError(AnalysisError):
    """Singular system, non-convergence, or a breached numeric invariant."""


class ReportValidationError(AnalysisError):
    """A computed report failed one of its algebraic identities."""

    def __init__(self, identity, residual, tol):
        self.identity = identity
        self.residual = residual
        self.tol = tol
        super().__init__(f"identity {identity!r} violated: residual {residual:.3e} > {tol:.1e}")


class DominanceFailureError(AnalysisError):
    """No decision's gain dominates all others component-wise."""

    def __init__(self, frontier):
        self.frontier = frontier
        super().__init__(f"no dominating gain; Pareto frontier has {len(frontier)} decisions")


class GridResolutionError(AnalysisError):
    """No decision is discounted-optimal on every point of the beta grid."""


class PreconditionError(AnalysisError):
    """A theorem hypothesis required by the operation does not hold."""


class ResolutionError(AnalysisError):
    """The requested tolerance cannot separate optimal from suboptimal actions."""


class ConsistencyError(AnalysisError):
    """Two routes to the same quantity disagree beyond tolerance."""
