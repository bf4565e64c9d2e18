"""Numerical verification of linearized static vacuum extensions on
Schwarzschild exteriors: conformal background, global transverse gauge,
radial structure equations, and per-mode asymptotic classification."""

from .background import (
    BackgroundAt,
    RoundData,
    RoundDataMatch,
    SchwarzschildParams,
    background_at,
    bartnik_data,
    conformal_forward,
    conformal_inverse,
    deformation_forward,
    deformation_inverse,
    match_round_data,
)
from .harmonics import (
    HarmonicCoefficients,
    ModeIndex,
    SphereGrid,
    analyze,
    make_grid,
    sh_eval,
    synthesize,
)
from .modes import (
    AsymptoticClass,
    AsymptoticKind,
    KernelVerdict,
    ModeIVP,
    ModeSolution,
    classify,
    comparison_positivity,
    integrate_mode,
    make_ivp,
    verify_kernel_trivial,
)

__version__ = "0.1.0"

__all__ = [
    "BackgroundAt",
    "RoundData",
    "RoundDataMatch",
    "SchwarzschildParams",
    "background_at",
    "bartnik_data",
    "conformal_forward",
    "conformal_inverse",
    "deformation_forward",
    "deformation_inverse",
    "match_round_data",
    "HarmonicCoefficients",
    "ModeIndex",
    "SphereGrid",
    "analyze",
    "make_grid",
    "sh_eval",
    "synthesize",
    "AsymptoticClass",
    "AsymptoticKind",
    "KernelVerdict",
    "ModeIVP",
    "ModeSolution",
    "classify",
    "comparison_positivity",
    "integrate_mode",
    "make_ivp",
    "verify_kernel_trivial",
    "__version__",
]
