"""Exception types shared across the package."""


class PomdpMilpError(Exception):
    """Base class for all package errors."""


class ZeroLikelihood(PomdpMilpError):
    """An observation has probability zero under the current belief and model."""


class InfeasibleAction(PomdpMilpError):
    """A joint action violates the resource constraints of the action space."""


class SizeLimitExceeded(PomdpMilpError):
    """An explicit enumeration or materialization would exceed its guard limit."""


class EmptyActionSpace(PomdpMilpError):
    """No joint action satisfies the resource constraints."""


class IterationCapExceeded(PomdpMilpError):
    """An iterative scheme (row or column generation) hit its iteration cap.

    Carries the best result found so far in ``partial`` when available.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class RejectionCapExceeded(PomdpMilpError):
    """Rejection sampling failed to draw a feasible joint action under the cap."""


class FormatError(PomdpMilpError):
    """A text-format input could not be parsed or failed semantic checks."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class SolveError(PomdpMilpError):
    """A solver backend failed or returned an unusable status."""
