"""Exception hierarchy shared by all modules."""


class LmgError(Exception):
    """Base class for errors raised by this package."""


class NumericalError(LmgError):
    """A numerical routine failed (non-convergence, degenerate denominators...)."""


class ConvergenceError(NumericalError):
    pass


class NoCrossingError(NumericalError):
    """The critical-field equation has no sign change on the search bracket."""


class DegeneracyError(NumericalError):
    """A perturbative sum hit a (near) zero energy denominator."""


class UndefinedWidthError(NumericalError):
    """A peak flank never crosses the half-maximum level inside the scan window."""


class SelectionError(LmgError):
    """Critical-phase selection or disambiguation could not be carried out."""
