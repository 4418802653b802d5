# wave/__init__.py
from .fields import DataPair, Field, GridSpec, SourceField, make_profile
from .params import ExponentLadder, Regime, ladder_for
from .scatter import (
    OperatorConfig,
    generalized_wave_operator_plus,
    round_trip,
    scattering_map,
    wave_operator_inverse,
    wave_operator_minus,
    wave_operator_plus,
)
from .solver import contraction_probe, solve_fvp_long, solve_fvp_short, solve_ivp
from .waveops import TruncationPolicy, apply_K, apply_L, apply_R

__all__ = [
    "DataPair",
    "Field",
    "GridSpec",
    "SourceField",
    "make_profile",
    "ExponentLadder",
    "Regime",
    "ladder_for",
    "OperatorConfig",
    "wave_operator_plus",
    "generalized_wave_operator_plus",
    "wave_operator_inverse",
    "wave_operator_minus",
    "scattering_map",
    "round_trip",
    "solve_fvp_short",
    "solve_fvp_long",
    "solve_ivp",
    "contraction_probe",
    "TruncationPolicy",
    "apply_K",
    "apply_L",
    "apply_R",
]
