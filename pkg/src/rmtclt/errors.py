"""Exception hierarchy shared by every module of the package."""


class RMTError(Exception):
    """Base class for all package errors."""


class NumericalError(RMTError):
    """A numerical routine failed (maps to CLI exit code 2)."""


class NonConvergence(NumericalError):
    """Iteration budget exhausted before reaching the requested tolerance."""

    def __init__(self, message, best_residual=float("nan")):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


NoConvergence = NonConvergence


class InvalidPoint(RMTError, ValueError):
    """Evaluation point lies on (or too close to) the spectral support."""


class NearSingular(NumericalError):
    """A denominator fell below the singularity threshold."""


class BranchAmbiguity(NumericalError):
    """The square-root branch cannot be selected (real point on a support edge)."""


class BranchError(NumericalError):
    """An inner transform evaluation landed on the wrong half-plane."""


class InvalidRatio(RMTError, ValueError):
    """Dimension ratio outside the admissible range."""


class SingularInput(RMTError, ValueError):
    """Spectrum contains a non-positive value where positivity is required."""


class OriginInside(RMTError, ValueError):
    """Contour encloses the origin for an integrand with a branch point there."""


class LogOnAtom(RMTError, ValueError):
    """Logarithm requested against a measure with an atom at zero."""


class DimensionMismatch(RMTError, ValueError):
    """Array shapes do not agree."""


DimensionError = DimensionMismatch


class SingularSy(NumericalError):
    """The denominator covariance matrix is not numerically positive definite."""


class NotHermitian(RMTError, ValueError):
    """Input matrix is not Hermitian within tolerance."""


class SingularResolvent(NumericalError):
    """Spectral parameter too close to a realized eigenvalue."""


class CenteringMismatch(NumericalError):
    """Density and contour routes for a centering integral disagree."""


class SchemaVersionMismatch(RMTError):
    """Results file is corrupted, has an unknown schema, or a stale config hash."""
