"""
Exception and warning types for taperlink

Every hard failure raised by the library derives from TaperlinkError. Input
problems additionally derive from ValueError so callers that only know the
built-ins can still catch them.
"""

from typing import Optional


class TaperlinkError(Exception):
    """Base class for all taperlink errors"""


class ConfigError(TaperlinkError, ValueError):
    """Invalid or unknown configuration entry"""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


class InputFormatError(TaperlinkError, ValueError):
    """Malformed data file"""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        self.row = row
        self.column = column
        super().__init__(message)


class GeometryError(TaperlinkError, ValueError):
    """Invalid cross-section geometry or discretization"""


# Mode solver

class SolverError(TaperlinkError):
    """Base class for mode solver failures"""


class NoGuidedModeError(SolverError):
    """All eigenvalues fall below the guidance cutoff"""


class EigenSolverError(SolverError):
    """Eigensolver did not converge to the requested residual"""

    def __init__(self, message: str, residual: float = float("nan")):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")


class GridMismatchError(SolverError, ValueError):
    """Two modes live on different grids or wavelengths"""


# Taper design and propagation

class TaperError(TaperlinkError):
    """Base class for taper design failures"""


class DispersionGapError(TaperError, ValueError):
    """Supermode gap too small: the adiabatic length diverges"""

    def __init__(self, message: str, width_nm: float):
        self.width_nm = width_nm
        super().__init__(f"{message} at w = {width_nm:.2f} nm")


class CoverageError(TaperError, ValueError):
    """Profile or request lies outside the tabulated dispersion"""


class ModeIdentificationError(TaperError):
    """No mode matches the reference field well enough"""


# Fitting

class FitError(TaperlinkError):
    """Base class for least-squares failures"""


class FitDivergenceError(FitError):
    """Cost increased even at maximum damping"""


class SingularJacobianError(FitError):
    """Jacobian is rank deficient at the optimum"""

    def __init__(self, message: str, parameter_index: int):
        self.parameter_index = parameter_index
        super().__init__(f"{message} (parameter {parameter_index})")


class FitIterationError(FitError):
    """Iteration cap exceeded"""


class NoPeakStructureError(FitError, ValueError):
    """Histogram carries no peak structure to fit"""


class NonDecayingError(FitError, ValueError):
    """Time trace does not decay"""


# Budget

class BudgetError(TaperlinkError, ValueError):
    """Invalid efficiency-budget input"""


class NoSinglePhotonContentError(BudgetError):
    """g2(0) >= 1 leaves no single-photon component"""


class NonPhysicalBetaError(BudgetError):
    """Reference rate not below the total rate"""


# Warnings

class UnphysicalEfficiencyWarning(UserWarning):
    """An extracted efficiency exceeds unity"""


class DomainTooSmallWarning(UserWarning):
    """A mode has not decayed at the edge of the computational domain"""


class AmbiguousMatchWarning(UserWarning):
    """Two branch pairings have nearly equal overlap"""


class ExpectationDeviationWarning(UserWarning):
    """A computed value differs from a user-supplied expectation"""
