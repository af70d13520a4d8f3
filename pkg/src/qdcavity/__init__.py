"""Modeling and fitting toolkit for quantum dots coupled to micropillar cavities.

Energies are in micro-electronvolts (ueV), times in picoseconds (ps) and
biases in volts unless a name says otherwise.  Rates and energies share a
unit through hbar = 1; the single conversion to time lives in
:mod:`qdcavity.units`.
"""

__version__ = "0.1.0"

from .cqed import (
    OpticalNuisance,
    RegimeReport,
    SystemParams,
    kappa_from_q,
    lifetime_vs_detuning,
    lifetime_vs_energy,
    observed_reflectivity,
    photon_budget,
    purcell_factor,
    q_factor,
    reflectance,
    regime,
    theoretical_purcell_max,
)

__all__ = [
    "OpticalNuisance",
    "RegimeReport",
    "SystemParams",
    "kappa_from_q",
    "lifetime_vs_detuning",
    "lifetime_vs_energy",
    "observed_reflectivity",
    "photon_budget",
    "purcell_factor",
    "q_factor",
    "reflectance",
    "regime",
    "theoretical_purcell_max",
]
