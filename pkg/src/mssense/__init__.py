"""Simulation and estimation toolkit for multi-sector self-sensing intelligent surfaces."""
from .config import Pattern, SystemConfig, dbm_to_watt, watt_to_dbm
from .errors import (
    ArchitectureError,
    BoundarySingularityError,
    ContractError,
    DegeneratePositionError,
    DomainError,
    EstimationFailure,
)

__all__ = [
    "Pattern",
    "SystemConfig",
    "dbm_to_watt",
    "watt_to_dbm",
    "ArchitectureError",
    "BoundarySingularityError",
    "ContractError",
    "DegeneratePositionError",
    "DomainError",
    "EstimationFailure",
]

__version__ = "0.1.0"
