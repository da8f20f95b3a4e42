"""Spectral theory of the linearized operator around the harmonic map."""

from .potential import Potential
from .fundamental import FundamentalSystem

__all__ = ["Potential", "FundamentalSystem"]
