"""Numerical laboratory for compressible convection on perforated domains and
its incompressible buoyancy-driven limit."""

from .errors import (AlignmentError, FitError, GeometryError, HoleflowError,
                     ResolutionError, ShapeError, SolverError,
                     ThermoDomainError, UnsupportedInputError)
from .geometry import (PerforatedGeometry, ScalingParams, build_perforation,
                       cutoff_g, cutoff_norms, hole_count_bound, hole_measure,
                       theory_cutoff_norms)
from .grids import Grid, GridField, MACField, mac_from_stream
from .thermo import (LinearizationCoeffs, ThermoParams, entropy, eval_P,
                     helmholtz, helmholtz_coercivity, internal_energy,
                     linearization, pressure, transport, viscous_stress)

__all__ = [
    "AlignmentError", "FitError", "GeometryError", "HoleflowError",
    "ResolutionError", "ShapeError", "SolverError", "ThermoDomainError",
    "UnsupportedInputError",
    "PerforatedGeometry", "ScalingParams", "build_perforation", "cutoff_g",
    "cutoff_norms", "hole_count_bound", "hole_measure", "theory_cutoff_norms",
    "Grid", "GridField", "MACField", "mac_from_stream",
    "LinearizationCoeffs", "ThermoParams", "entropy", "eval_P", "helmholtz",
    "helmholtz_coercivity", "internal_energy", "linearization", "pressure",
    "transport", "viscous_stress",
]

__version__ = "0.1.0"
