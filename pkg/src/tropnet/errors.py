"""Exception types shared across the toolkit."""


class TropnetError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(TropnetError):
    """Operands have non-conformable shapes."""


class StructureError(TropnetError):
    """A structural precondition (connectivity, irreducibility) fails."""


class UnboundedError(TropnetError):
    """A quantity diverges (positive cycle of zero duration, rate mismatch)."""


class SizeLimitError(TropnetError):
    """Input exceeds the size supported by a brute-force routine."""


class ImplicitCycleError(TropnetError):
    """Same-step dependencies form a cycle; the system is not triangular."""


class ConvergenceError(TropnetError):
    """An iterative computation failed to reach its tolerance."""


class DegenerateLineError(TropnetError):
    """Train count m is 0 or n; no movement is possible (headway infinite)."""


class SaturationError(TropnetError):
    """Passenger demand exceeds door capacity (x_j >= 1)."""


class StabilityError(TropnetError):
    """A stability hypothesis (coefficient in [0, 1]) is violated."""


class RangeError(TropnetError):
    """Requested value lies outside the achievable range."""


class UnitError(TropnetError):
    """Mismatched time steps or units between operands."""


class IncomparableFlowsError(TropnetError):
    """Flows with different asymptotic rates cannot share a time-shift matrix."""


class GeometryError(TropnetError):
    """Fundamental-diagram parameters are inconsistent."""


class CausalityError(TropnetError):
    """Cumulative inputs must start at zero."""


class ConfigError(TropnetError):
    """Scenario or section configuration is invalid."""
