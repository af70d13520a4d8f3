"""Unit conventions.

=========  =======  ==========================================
quantity   unit     note
=========  =======  ==========================================
energy     ueV      also used for rates (hbar = 1)
time       ps       TCSPC histograms, lifetimes
g2 delay   ns       correlation histograms
bias       V
length     um       spatial reflectivity maps
=========  =======  ==========================================

A rate ``r`` given in ueV corresponds to ``r / HBAR_UEV_PS`` per picosecond.
"""

from scipy import constants

#: reduced Planck constant in ueV * ps (about 658.21)
HBAR_UEV_PS = constants.hbar / constants.e * 1e6 * 1e12


def rate_to_per_ps(rate_uev):
    """Convert an energy-unit rate (ueV) to an inverse time (1/ps)."""
    return rate_uev / HBAR_UEV_PS


def per_ps_to_rate(rate_per_ps):
    """Convert an inverse time (1/ps) to an energy-unit rate (ueV)."""
    return rate_per_ps * HBAR_UEV_PS
