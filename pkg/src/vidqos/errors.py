"""Exception hierarchy shared across the package."""


class VidqosError(Exception):
    """Base class for all library errors."""


class DistributionError(VidqosError):
    """Invalid fading-distribution parameters."""


class IntegrationError(VidqosError):
    """Numerical quadrature did not converge to the requested accuracy."""


class MomentOrderError(VidqosError):
    """Requested fractional-moment order is beyond the supported guard range."""


class QosInfeasibleError(VidqosError):
    """The delay target cannot be met on the given channel at any QoS exponent."""


class CurveError(VidqosError):
    """Rate-quality curve construction rejected (not strictly increasing/concave)."""


class CurveDomainError(VidqosError):
    """Rate or quality query outside the curve's domain."""


class AllocationError(VidqosError):
    """Allocation cannot satisfy the exact-budget constraint."""


class InfeasibleAllocationError(AllocationError):
    """Minimum bandwidth requirements of the user set exceed the budget."""

    def __init__(self, message: str, deficit_hz: float = 0.0):
        super().__init__(message)
        self.deficit_hz = deficit_hz


class BoundaryNotInGridError(VidqosError):
    """Service boundary lies outside the searched SNR grid."""


class ScenarioError(VidqosError):
    """Scenario file failed schema validation; `where` names the offending key."""

    def __init__(self, message: str, where: str = ""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where
