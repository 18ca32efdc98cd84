"""Exact-diagonalization toolkit for excited-state criticality of the LMG model
and its use for quantum-enhanced magnetometry."""

try:
    from importlib.metadata import PackageNotFoundError, version

    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover - running from a source tree
    __version__ = "0.1.0"

from .errors import (ConvergenceError, DegeneracyError, LmgError, NoCrossingError, NumericalError,
                     SelectionError, UndefinedWidthError)
from .spin_sector import Parity, SpinSector, both_sectors, build_sector
from .spectrum import EigenSystem, critical_field, solve_sector

__all__ = ["ConvergenceError", "DegeneracyError", "EigenSystem", "LmgError", "NoCrossingError",
           "NumericalError", "Parity", "SelectionError", "SpinSector", "UndefinedWidthError",
           "__version__", "both_sectors", "build_sector", "critical_field", "solve_sector"]
