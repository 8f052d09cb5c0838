"""Guided acoustic modes of piezoelectric layers on a half-space."""
from sawguide.dispersion.boundary import (
    DeterminantResult,
    boundary_determinant,
    boundary_matrix,
    secular_function,
    surface_impedance,
)
from sawguide.dispersion.modes import (
    ConvergenceError,
    DegenerateModeError,
    FieldProfile,
    ModeSolution,
    ModeTrackingError,
    SearchRange,
    SweepRow,
    coupling_coefficient,
    default_search,
    dispersion_sweep,
    find_roots,
    mode_fields,
    mode_fields_at,
    solve_modes,
)
from sawguide.dispersion.stack import Layer, LayerStack, stack_from_dict
from sawguide.dispersion.stroh import DegenerateStrohError, limiting_velocity

__all__ = [
    "ConvergenceError", "DegenerateModeError", "DegenerateStrohError", "DeterminantResult",
    "FieldProfile", "Layer", "LayerStack", "ModeSolution", "ModeTrackingError", "SearchRange",
    "SweepRow", "boundary_determinant", "boundary_matrix", "coupling_coefficient",
    "default_search", "dispersion_sweep", "find_roots", "limiting_velocity", "mode_fields",
    "mode_fields_at", "secular_function", "solve_modes", "stack_from_dict",
    "surface_impedance",
]
