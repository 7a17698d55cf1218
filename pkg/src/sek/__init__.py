"""Smooth conditional entropies, entropic uncertainty relations and BB84 key lengths."""
from sek.errors import ArgumentError, CapacityError, NotPSDError, NumericalFailure, RelationViolation, SekError

__version__ = "0.1.0"

__all__ = [
    "ArgumentError",
    "CapacityError",
    "NotPSDError",
    "NumericalFailure",
    "RelationViolation",
    "SekError",
]
