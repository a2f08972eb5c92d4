"""Robust stability bounds and Lyapunov-Krasovskii functionals for linear time-delay systems."""
from .const import SCHEMA_VERSION
from .errors import TdsRobustError
from .sysmodel import PerturbationStructure, SectorKind, SectorRestriction, TdsSystem, sector_preset

__version__ = "0.1.0"

__all__ = [
    "PerturbationStructure",
    "SCHEMA_VERSION",
    "SectorKind",
    "SectorRestriction",
    "TdsRobustError",
    "TdsSystem",
    "sector_preset",
]
