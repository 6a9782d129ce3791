"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`NSRandError`.
The CLI maps the three families below onto exit codes 2, 3 and 4.
"""


class NSRandError(Exception):
    """Base class for all package errors."""


class ConfigError(NSRandError, ValueError):
    """Bad user input: unknown key, wrong type, violated constraint."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DomainError(NSRandError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class RepresentationError(NSRandError):
    """A field lacks the representation (physical/spectral) an operation needs."""


class ShapeError(NSRandError, ValueError):
    """Component count or array shape does not fit the operation."""


class NumericalGuardError(NSRandError):
    """A numerical guard tripped: resolution, coverage, CFL, conservation."""


class LatticeError(NumericalGuardError):
    """A rescaling does not map the frequency lattice onto itself."""


class CoverageError(NumericalGuardError):
    """A frequency lies outside the region covered by the cube family."""


class ResolutionError(NumericalGuardError):
    """The grid is too coarse to resolve a cube or a dyadic block."""


class TruncationError(NumericalGuardError):
    """Spectral content outside the decomposition exceeds the allowed residual."""


class PreconditionError(NumericalGuardError):
    """Input violates a structural precondition (e.g. not divergence-free)."""


class SingularityError(NumericalGuardError):
    """A homogeneous weight is singular on the supplied data (nonzero mean)."""


class DegenerateInputError(NumericalGuardError):
    """A ratio or report is undefined because the input vanishes."""


class CFLError(NumericalGuardError):
    """Time step too large for the current velocity."""


class ConservationError(NumericalGuardError):
    """Energy balance violated beyond tolerance; indicates a solver defect."""


class GridError(NumericalGuardError):
    """A statistics grid (e.g. the tail lambda grid) has empty bins."""


class StatisticalPowerError(NSRandError):
    """Too few Monte Carlo samples for the requested statistic."""


class ResolutionWarning(UserWarning):
    """Aliasing or resolution concerns that do not abort a computation."""


class HypothesisWarning(UserWarning):
    """A run deliberately violates the admissibility condition on ``a``."""
