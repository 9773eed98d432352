"""Exception types raised across the package."""


class OrbitLabError(Exception):
    """Base class for all package errors."""


class InvalidParameter(OrbitLabError, ValueError):
    pass


class DegenerateInput(OrbitLabError, ValueError):
    """Input sits on a degenerate locus (e.g. a = 0 for the rotation speed)."""


class ChartDomainError(OrbitLabError, ValueError):
    """Hopf chart is singular at theta in {0, pi/2}."""


class GeometryError(OrbitLabError, ValueError):
    pass


class NoIntersection(OrbitLabError, ValueError):
    pass


class NotLibrating(OrbitLabError, ValueError):
    pass


class InfinitePotential(OrbitLabError, ValueError):
    pass


class IntegrationError(OrbitLabError, RuntimeError):
    pass
