"""Pose uncertainty sets (PURSE), boundary random walks and minimum enclosing
geodesic balls on SO(3) x R^3."""

from .errors import DomainError
from .geometry import Pose
from .kernels import BACKEND

__all__ = ["BACKEND", "DomainError", "Pose"]
__version__ = "0.1.0"
