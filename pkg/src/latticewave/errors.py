"""Exception hierarchy shared by every module."""


class LatticeWaveError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(LatticeWaveError, ValueError):
    """Invalid model parameter or configuration value."""


class NoEndemicEquilibrium(LatticeWaveError):
    """Raised when R0 <= 1 and no positive equilibrium exists."""


class SubcriticalError(LatticeWaveError):
    """Raised when an operation needs R0 > 1 but the parameters give R0 <= 1."""


class DegenerateDiffusion(LatticeWaveError):
    """Raised when the infectious diffusivity is not positive."""


class AtOrBelowCritical(LatticeWaveError):
    """Raised by root queries with c <= c*.

    ``tangent_root`` carries r* when c equals c* to within tolerance, else None.
    """

    def __init__(self, message, tangent_root=None):
        super().__init__(message)
        self.tangent_root = tangent_root


class ConvergenceError(LatticeWaveError):
    """An iterative method failed to meet its tolerance."""


class EnvelopeViolation(LatticeWaveError):
    """Input to the wave operator lies outside the sub/super-solution envelope."""


class InstabilityError(LatticeWaveError):
    """Time integration produced NaN or a density far outside its envelope."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class FrontError(LatticeWaveError):
    """Front tracking failed (no front, or front reached the boundary)."""
