"""Analytic models of a two-level emitter coupled to a single cavity mode.

The central object is the weak-probe reflection coefficient of a symmetric
(two-sided) cavity containing one emitter,

    r(w) = 1 - kappa (gamma - i dQD) / [(gamma - i dQD)(kappa - i dC) + g^2]

with ``dQD = w - omega_qd`` and ``dC = w - omega_c``.  ``kappa`` and
``gamma`` are *field* (amplitude) decay rates, so the empty-cavity dip has a
full width at half depth of ``2 kappa`` and ``Q = E / (2 kappa)``.

``gamma`` is taken as the total dipole decay rate.  Whether a measured value
contains pure dephasing cannot be told from a reflection spectrum alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "SystemParams",
    "OpticalNuisance",
    "RegimeReport",
    "reflectance",
    "reflection_amplitude",
    "observed_reflectivity",
    "q_factor",
    "kappa_from_q",
    "regime",
    "purcell_factor",
    "lifetime_vs_detuning",
    "lifetime_vs_energy",
    "photon_budget",
    "theoretical_purcell_max",
    "WEAK_PURCELL",
    "NEAR_STRONG",
    "STRONG",
]

WEAK_PURCELL = "weak_purcell"
NEAR_STRONG = "near_strong"
STRONG = "strong"

# lower edge of the "near strong" band; 0.5 is the usual strong-coupling onset
NEAR_STRONG_RATIO = 0.4
STRONG_RATIO = 0.5


@dataclass(frozen=True)
class SystemParams:
    """Coupled emitter-cavity parameters, all in ueV.

    ``omega_c`` and ``omega_qd`` may be absolute photon energies or offsets
    from a reference energy, as long as the probe energy uses the same frame.
    """

    g: float
    kappa: float
    gamma: float
    omega_c: float = 0.0
    omega_qd: float = 0.0

    def __post_init__(self):
        if not self.g >= 0:
            raise ValueError(f"g must be >= 0, got {self.g}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")

    def replace(self, **changes) -> "SystemParams":
        values = dict(g=self.g, kappa=self.kappa, gamma=self.gamma,
                      omega_c=self.omega_c, omega_qd=self.omega_qd)
        values.update(changes)
        return SystemParams(**values)


@dataclass(frozen=True)
class OpticalNuisance:
    """Mode matching and linear baseline of a measured reflection spectrum.

    The observed signal is ``(base_a + base_b (w - w_ref)) * (1 - eta (1 - R))``:
    imperfect mode matching scales the dip depth and the baseline multiplies
    the whole curve.
    """

    eta: float = 1.0
    base_a: float = 1.0
    base_b: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")


@dataclass(frozen=True)
class RegimeReport:
    ratio_g_kappa: float
    cooperativity: float
    regime: str

    @property
    def is_strong(self) -> bool:
        return self.regime == STRONG


def _check_rates(params: SystemParams):
    if not (params.kappa > 0 and params.gamma > 0):
        raise ValueError("kappa and gamma must be positive")


def reflection_amplitude(omega, params: SystemParams):
    """Complex weak-probe reflection amplitude at probe energy ``omega``."""
    _check_rates(params)
    omega = np.asarray(omega, dtype=float)
    emitter = params.gamma - 1j * (omega - params.omega_qd)
    cavity = params.kappa - 1j * (omega - params.omega_c)
    # kappa / (cavity + g^2 / emitter) is the same fraction as in the
    # textbook form; written this way g = 0 drops the emitter exactly
    return 1.0 - params.kappa / (cavity + params.g**2 / emitter)


def reflectance(omega, params: SystemParams):
    """Reflected intensity fraction |r(omega)|^2, in [0, 1].

    Accepts a scalar or an array of probe energies and returns the same shape.
    """
    r = reflection_amplitude(omega, params)
    out = r.real**2 + r.imag**2
    return float(out) if np.ndim(out) == 0 else out


def observed_reflectivity(omega, params: SystemParams,
                          nuisance: OpticalNuisance | None = None,
                          omega_ref: float = 0.0):
    """Reflectance with mode-matching depth scaling and a linear baseline."""
    if nuisance is None:
        nuisance = OpticalNuisance()
    omega = np.asarray(omega, dtype=float)
    baseline = nuisance.base_a + nuisance.base_b * (omega - omega_ref)
    refl = reflectance(omega, params)
    # equals baseline * (1 - eta (1 - R)); this form is exact at eta = 1
    out = baseline * (refl + (1.0 - nuisance.eta) * (1.0 - refl))
    return float(out) if np.ndim(out) == 0 else out


def q_factor(kappa, photon_energy):
    """Quality factor ``E / (2 kappa)`` for a field decay rate ``kappa``."""
    if not (kappa > 0 and photon_energy > 0):
        raise ValueError("kappa and photon_energy must be positive")
    return photon_energy / (2.0 * kappa)


def kappa_from_q(q, photon_energy):
    """Inverse of :func:`q_factor`."""
    if not (q > 0 and photon_energy > 0):
        raise ValueError("q and photon_energy must be positive")
    return photon_energy / (2.0 * q)


def regime(params: SystemParams) -> RegimeReport:
    ratio = params.g / params.kappa
    coop = params.g**2 / (params.kappa * params.gamma)
    if ratio > STRONG_RATIO:
        label = STRONG
    elif ratio >= NEAR_STRONG_RATIO:
        label = NEAR_STRONG
    else:
        label = WEAK_PURCELL
    return RegimeReport(ratio_g_kappa=ratio, cooperativity=coop, regime=label)


def purcell_factor(tau_bulk, tau_cav):
    """Lifetime ratio ``tau_bulk / tau_cav``."""
    if not (tau_bulk > 0 and tau_cav > 0):
        raise ValueError("lifetimes must be positive")
    return tau_bulk / tau_cav


def lifetime_vs_detuning(delta, tau_off, tau_on, kappa):
    """Emitter lifetime (ps) at detuning ``delta`` from one cavity mode.

    The decay rate interpolates between the off-resonant and on-resonant
    values with a Lorentzian of half width ``kappa``::

        1/tau = 1/tau_off + (1/tau_on - 1/tau_off) * kappa^2 / (kappa^2 + delta^2)
    """
    if not tau_off > tau_on > 0:
        raise ValueError("need tau_off > tau_on > 0")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    delta = np.asarray(delta, dtype=float)
    lor = kappa**2 / (kappa**2 + delta**2)
    rate = 1.0 / tau_off + (1.0 / tau_on - 1.0 / tau_off) * lor
    out = 1.0 / rate
    return float(out) if np.ndim(out) == 0 else out


def lifetime_vs_energy(energy, tau_off, modes: Sequence[tuple[float, float, float]]):
    """Lifetime (ps) at emission ``energy`` next to several independent modes.

    ``modes`` holds ``(mode_energy, kappa, tau_on)`` triples; each mode adds
    its own Lorentzian rate enhancement on top of ``1/tau_off``.
    """
    energy = np.asarray(energy, dtype=float)
    rate = np.full(energy.shape, 1.0 / tau_off)
    for e_mode, kappa, tau_on in modes:
        if not tau_off > tau_on > 0:
            raise ValueError("need tau_off > tau_on > 0 for every mode")
        if not kappa > 0:
            raise ValueError("kappa must be positive")
        rate = rate + (1.0 / tau_on - 1.0 / tau_off) * kappa**2 / (kappa**2 + (energy - e_mode) ** 2)
    out = 1.0 / rate
    return float(out) if np.ndim(out) == 0 else out


def photon_budget(pump_rate, extraction_eff, setup_eff):
    """Detected single-photon rate for a given pump repetition rate (Hz)."""
    if not pump_rate > 0:
        raise ValueError("pump_rate must be positive")
    for name, eff in (("extraction_eff", extraction_eff), ("setup_eff", setup_eff)):
        if not 0.0 <= eff <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1]")
    return pump_rate * extraction_eff * setup_eff


def theoretical_purcell_max(q, v_eff_in_cubic_wavelengths):
    """Ideal Purcell factor ``3/(4 pi^2) Q / V`` with V in units of (lambda/n)^3.

    This assumes the dipole sits at the field maximum, is aligned with the
    mode polarization and is spectrally resonant.  Measured enhancements are
    typically an order of magnitude lower because none of these hold exactly.
    """
    if not (q > 0 and v_eff_in_cubic_wavelengths > 0):
        raise ValueError("q and v_eff must be positive")
    return 3.0 / (4.0 * math.pi**2) * q / v_eff_in_cubic_wavelengths
