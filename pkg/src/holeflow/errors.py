"""Exception types shared across the package."""


class HoleflowError(Exception):
    """Base class for all package-specific errors."""


class ThermoDomainError(HoleflowError, ValueError):
    """State outside the admissible thermodynamic domain (rho <= 0, theta < 0, ...)."""


class GeometryError(HoleflowError, ValueError):
    """Perforation cannot be built or is inconsistent with the grid."""


class ResolutionError(HoleflowError, ValueError):
    """Grid too coarse to resolve a requested feature.

    Carries ``required_h``, the largest admissible spacing.
    """

    def __init__(self, msg: str, required_h: float):
        super().__init__(f"{msg} (required h <= {required_h:.6g})")
        self.required_h = required_h


class UnsupportedInputError(HoleflowError, ValueError):
    """Operation defined only for a restricted input class."""


class FitError(HoleflowError, ValueError):
    """Not enough usable samples for a scaling-law fit."""


class ShapeError(HoleflowError, ValueError):
    """Fields live on incompatible grids."""


class AlignmentError(HoleflowError, ValueError):
    """Trajectories sampled at different times."""


class SolverError(HoleflowError, RuntimeError):
    """Numerical failure (positivity loss, non-convergent linear solve, ...)."""

    def __init__(self, msg: str, state=None):
        super().__init__(msg)
        self.state = state
