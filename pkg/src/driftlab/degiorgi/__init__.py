"""Diagnostics of the regularity program computed on trajectories and extensions."""

from .audit import AuditRow, audit_trajectory, energy_inequality_audit, height_cutoff, space_cutoff
from .decay import DecayFit, decay_exponent, predicted_decay_exponent, saturation_time
from .holder import HolderResult, ParabolicPoint, holder_quotient, parabolic_distance, point_distance
from .levelsets import (IsoperimetricResult, isoperimetric_check, level_set_measures, ramp_family_sweep,
                        rho_exponent)
from .truncation import (LevelResult, TruncationLadder, forcing_norms, linfty_level, top_energy,
                         truncation_energies, bound_exponents, bound_prediction)
from .zoom import SpaceTimeInterpolant, ZoomResult, ZoomState, predicted_alpha, zoom_sequence

__all__ = [
    "AuditRow", "audit_trajectory", "energy_inequality_audit", "height_cutoff", "space_cutoff",
    "DecayFit", "decay_exponent", "predicted_decay_exponent", "saturation_time",
    "HolderResult", "ParabolicPoint", "holder_quotient", "parabolic_distance", "point_distance",
    "IsoperimetricResult", "isoperimetric_check", "level_set_measures", "ramp_family_sweep", "rho_exponent",
    "LevelResult", "TruncationLadder", "forcing_norms", "linfty_level", "top_energy", "truncation_energies",
    "bound_exponents", "bound_prediction",
    "SpaceTimeInterpolant", "ZoomResult", "ZoomState", "predicted_alpha", "zoom_sequence",
]
