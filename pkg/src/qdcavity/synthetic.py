"""Seeded synthetic datasets mirroring the measurements this toolkit analyses.

Every generator takes an explicit ``seed`` and draws from
``numpy.random.default_rng(seed)`` only, so a fixed seed reproduces its
output bit for bit.
"""

from __future__ import annotations

import numpy as np

from .cqed import OpticalNuisance, SystemParams, lifetime_vs_energy, observed_reflectivity
from .fitmodels import Spectrum, spatial_dip_model

__all__ = [
    "DEVICE_PARAMS",
    "DEVICE_NUISANCE",
    "simulate_spectrum",
    "purcell_scan_energies",
    "simulate_purcell_dip_data",
    "simulate_spatial_map",
]

#: coupling, cavity and dipole rates reported for the charge-tunable device (ueV)
DEVICE_PARAMS = SystemParams(g=9.7, kappa=24.1, gamma=1.9, omega_c=0.0, omega_qd=0.0)
DEVICE_NUISANCE = OpticalNuisance(eta=0.96, base_a=1.0, base_b=0.0)


def simulate_spectrum(params: SystemParams = DEVICE_PARAMS,
                      nuisance: OpticalNuisance = DEVICE_NUISANCE,
                      energy=None, noise=0.01, seed=0, omega_ref=0.0):
    """Observed reflectivity plus Gaussian noise of standard deviation ``noise * base_a``.

    ``energy`` defaults to 201 points over ``omega_c +- 5 kappa``.
    """
    if energy is None:
        energy = np.linspace(params.omega_c - 5 * params.kappa, params.omega_c + 5 * params.kappa, 201)
    energy = np.asarray(energy, dtype=float)
    clean = observed_reflectivity(energy, params, nuisance, 0.0)
    rng = np.random.default_rng(seed)
    sigma = noise * nuisance.base_a
    value = clean + rng.normal(0.0, sigma, energy.shape) if sigma > 0 else clean.copy()
    return Spectrum(energy, value, None, "reflectivity", omega_ref,
                    metadata={"seed": seed, "noise": noise})


def purcell_scan_energies(mode_energies, kappa, layout="clustered", n_points=15, margin=3.0):
    """Emission energies at which lifetimes are sampled in a Stark-tuning scan.

    ``clustered`` puts five points within one ``kappa`` of every mode
    (offsets -1, -0.5, 0, 0.5, 1 kappa) and five off-resonant points at
    3 and 8 kappa outside the outermost modes and halfway between the first
    two modes.  ``uniform`` spaces ``n_points`` evenly from ``margin * kappa``
    below the lowest mode to the same distance above the highest.
    """
    lo, hi = min(mode_energies), max(mode_energies)
    if layout == "uniform":
        return np.linspace(lo - margin * kappa, hi + margin * kappa, n_points)
    if layout != "clustered":
        raise ValueError(f"unknown layout {layout!r}")
    pts = [e + o * kappa for e in mode_energies for o in (-1.0, -0.5, 0.0, 0.5, 1.0)]
    ordered = sorted(mode_energies)
    mid = 0.5 * (ordered[0] + ordered[1]) if len(ordered) > 1 else hi + 5 * kappa
    pts += [lo - 8 * kappa, lo - 3 * kappa, mid, hi + 3 * kappa, hi + 8 * kappa]
    return np.array(sorted(pts))


def simulate_purcell_dip_data(mode_energies=(0.0, 100.0), kappa=16.3, tau_on=220.0,
                              tau_off=1100.0, rel_noise=0.1, seed=0, energy=None,
                              layout="clustered"):
    """Lifetimes against emission energy across cavity modes.

    ``energy`` defaults to :func:`purcell_scan_energies` (15 points for two
    modes).  Each lifetime gets Gaussian noise with relative standard
    deviation ``rel_noise``.  Returns ``(energy, lifetime, sigma)`` with
    ``sigma = rel_noise * true lifetime``.
    """
    if energy is None:
        energy = purcell_scan_energies(mode_energies, kappa, layout)
    energy = np.asarray(energy, dtype=float)
    truth = lifetime_vs_energy(energy, tau_off, [(e, kappa, tau_on) for e in mode_energies])
    rng = np.random.default_rng(seed)
    lifetime = truth * (1.0 + rel_noise * rng.standard_normal(len(energy)))
    return energy, lifetime, rel_noise * truth


def simulate_spatial_map(x_grid=None, y_grid=None, center=(0.0, 0.0), waist=2.2,
                         depth=0.96, base=1.0, noise=0.01, seed=0):
    """Reflectivity map (``image[iy, ix]``) of a Gaussian cavity mode, lengths in um."""
    if x_grid is None:
        x_grid = np.linspace(-5.0, 5.0, 51)
    if y_grid is None:
        y_grid = np.linspace(-5.0, 5.0, 51)
    x_grid = np.asarray(x_grid, dtype=float)
    y_grid = np.asarray(y_grid, dtype=float)
    xx, yy = np.meshgrid(x_grid, y_grid)
    clean = spatial_dip_model(xx, yy, (center[0], center[1], waist, depth, base))
    rng = np.random.default_rng(seed)
    image = clean + rng.normal(0.0, noise * base, clean.shape) if noise > 0 else clean
    return x_grid, y_grid, image
