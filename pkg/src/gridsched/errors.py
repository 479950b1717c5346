"""Exception types shared across the package."""


class GridschedError(Exception):
    """Base class for all package errors."""


class ParseError(GridschedError):
    """A case, modification, config, or dataset file could not be parsed."""


class ValidationError(GridschedError):
    """An input violates a structural invariant; the message names the field."""


class SingularTopologyError(GridschedError):
    """A topology disconnects a load-carrying bus from every reference bus."""


class InfeasibleWindowError(GridschedError):
    """Requested day windows cannot be packed into the month."""


class NumericalError(GridschedError):
    """The LP engine exceeded its iteration cap or lost feasibility."""


class CapacityError(GridschedError):
    """An enumeration (binary fixings, topology keys) exceeds its size limit."""


class InfeasibleError(GridschedError):
    """An optimization subproblem has no feasible point."""


class MissingTopologyError(GridschedError):
    """A proxy lookup hit a topology bucket with no stored records."""


class MaxIterationsError(GridschedError):
    """Cross-entropy ran out of iterations before the entropy criterion.

    Carries the best result found so far in ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class OracleDriftError(GridschedError):
    """Regenerated oracle data disagrees with the committed files."""

    def __init__(self, message, diffs=None):
        super().__init__(message)
        self.diffs = diffs or []
