"""Exception types raised across the package."""


class DegenerateInputError(ValueError):
    """Input has too few points (or otherwise no spread) for the requested operation."""


class ParameterError(ValueError):
    """A numeric parameter is outside its admissible range."""


class ContractError(ValueError):
    """Array shapes or counts do not agree."""


class InvalidStateError(RuntimeError):
    """The current iterate cannot be evaluated (NaN objective)."""


class GeometryError(ValueError):
    """Invalid rotation block or a rotation outside the principal log branch."""


class UnsupportedCombinationError(ValueError):
    """Soft formulation cannot handle the given constraint kinds."""


class BarrierDomainError(ValueError):
    """Log barrier evaluated at a point that is not strictly feasible."""


class InfeasibleTargetError(RuntimeError):
    """Rejection sampling acceptance rate is too low to be useful."""
