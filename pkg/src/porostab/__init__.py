"""Coupled flow and geomechanics on structured hexahedral grids.

Q1 finite elements for the skeleton, cell-centred finite volumes for the
fluid, coupled either monolithically or by a fixed-stress split, with an
optional pressure-jump stabilization for the undrained limit.
"""
from .errors import CertificationError, ConfigError, PorostabError, SolverError

__version__ = "0.1.0"

__all__ = ["PorostabError", "ConfigError", "SolverError", "CertificationError", "__version__"]
