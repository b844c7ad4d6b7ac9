"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested operation."""


class BoundarySingularityError(DomainError):
    """A pattern derivative was requested inside a sector-edge guard band."""


class DegeneratePositionError(DomainError):
    """The target coincides with a reference point, so no angle is defined."""


class ArchitectureError(DomainError):
    """The operation needs the symmetric IS/sensor architecture."""


class ContractError(ValueError):
    """Array shapes do not match the configured system."""


class EstimationFailure(RuntimeError):
    """The likelihood metric vanished over the whole search grid."""
