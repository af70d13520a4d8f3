import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from qdcavity import (
    OpticalNuisance,
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
from qdcavity.units import HBAR_UEV_PS, per_ps_to_rate, rate_to_per_ps

DEVICE = SystemParams(g=9.7, kappa=24.1, gamma=1.9)

rates = st.floats(0.01, 100.0)
detunings = st.floats(-500.0, 500.0)


def joint_resonance(g, kappa, gamma):
    return (g * g / (g * g + gamma * kappa)) ** 2


# -- reflectance --------------------------------------------------------------

def test_empty_cavity_dip_is_perfect_on_resonance():
    assert reflectance(0.0, SystemParams(0.0, 24.1, 1.9)) == pytest.approx(0.0, abs=1e-15)


def test_far_detuned_reflectance_tends_to_one():
    assert reflectance(1e7, DEVICE) == pytest.approx(1.0, abs=1e-9)


def test_joint_resonance_closed_form():
    assert abs(reflectance(0.0, DEVICE) - joint_resonance(9.7, 24.1, 1.9)) < 1e-12
    assert reflectance(0.0, DEVICE) == pytest.approx(0.4525, abs=5e-5)


@pytest.mark.parametrize("delta", [24.1, -24.1])
def test_half_depth_at_one_kappa(delta):
    assert reflectance(delta, SystemParams(0.0, 24.1, 1.9)) == pytest.approx(0.5, abs=1e-12)


def test_empty_cavity_fwhm_is_two_kappa():
    p = SystemParams(0.0, 24.1, 1.9)
    half = lambda w: reflectance(w, p) - 0.5
    left = brentq(half, -200.0, 0.0, xtol=1e-13)
    right = brentq(half, 0.0, 200.0, xtol=1e-13)
    assert abs((right - left) / (2 * 24.1) - 1.0) < 1e-3


def test_reflectance_shape_and_scalar():
    assert isinstance(reflectance(1.0, DEVICE), float)
    assert reflectance(np.zeros((3, 2)), DEVICE).shape == (3, 2)


@pytest.mark.parametrize("bad", [dict(kappa=0.0), dict(gamma=-1.0), dict(g=-0.1)])
def test_invalid_params_rejected(bad):
    with pytest.raises(ValueError):
        SystemParams(**{**dict(g=1.0, kappa=1.0, gamma=1.0), **bad})


@settings(max_examples=200, deadline=None)
@given(g=st.floats(0.0, 100.0), kappa=rates, gamma=rates, wc=detunings, wqd=detunings,
       w=st.floats(-2000.0, 2000.0))
def test_reflectance_bounded(g, kappa, gamma, wc, wqd, w):
    r = reflectance(w, SystemParams(g, kappa, gamma, wc, wqd))
    assert -1e-12 <= r <= 1.0 + 1e-12


@settings(max_examples=100, deadline=None)
@given(g=st.floats(0.0, 100.0), kappa=rates, gamma=rates, wc=detunings, d=st.floats(0.0, 1000.0))
def test_reflectance_symmetric_about_joint_resonance(g, kappa, gamma, wc, d):
    p = SystemParams(g, kappa, gamma, wc, wc)
    assert abs(reflectance(wc + d, p) - reflectance(wc - d, p)) < 1e-12


@settings(max_examples=100, deadline=None)
@given(kappa=rates, g1=rates, g2=rates, q1=detunings, q2=detunings, w=detunings)
def test_uncoupled_reflectance_ignores_emitter(kappa, g1, g2, q1, q2, w):
    a = reflectance(w, SystemParams(0.0, kappa, g1, 0.0, q1))
    b = reflectance(w, SystemParams(0.0, kappa, g2, 0.0, q2))
    assert a == b


@settings(max_examples=50, deadline=None)
@given(g=st.floats(0.0, 50.0), kappa=rates, gamma=rates)
def test_joint_resonance_identity_random(g, kappa, gamma):
    p = SystemParams(g, kappa, gamma)
    assert abs(reflectance(0.0, p) - joint_resonance(g, kappa, gamma)) < 1e-12


@settings(max_examples=50, deadline=None)
@given(kappa=st.floats(0.5, 100.0))
def test_fwhm_property(kappa):
    p = SystemParams(0.0, kappa, 1.0)
    right = brentq(lambda w: reflectance(w, p) - 0.5, 0.0, 100 * kappa, xtol=1e-12 * kappa)
    assert abs(2 * right / (2 * kappa) - 1.0) < 1e-3


# -- observed reflectivity ----------------------------------------------------

def test_identity_nuisance_reduces_to_reflectance():
    w = np.linspace(-100, 100, 41)
    np.testing.assert_array_equal(observed_reflectivity(w, DEVICE, OpticalNuisance()),
                                  reflectance(w, DEVICE))


def test_mode_matching_depth():
    p = SystemParams(0.0, 24.1, 1.9)
    assert observed_reflectivity(0.0, p, OpticalNuisance(eta=0.96)) == pytest.approx(0.04, abs=1e-12)


def test_baseline_passes_off_resonance():
    p = SystemParams(0.0, 24.1, 1.9)
    out = observed_reflectivity(1e8, p, OpticalNuisance(eta=0.5, base_a=2.0))
    assert out == pytest.approx(2.0, abs=1e-9)


def test_linear_baseline_uses_reference():
    p = SystemParams(0.0, 24.1, 1.9)
    nu = OpticalNuisance(eta=0.0, base_a=1.0, base_b=0.01)
    assert observed_reflectivity(1010.0, p, nu, omega_ref=1000.0) == pytest.approx(1.1)


def test_mode_matching_out_of_range():
    with pytest.raises(ValueError):
        OpticalNuisance(eta=1.2)


# -- figures of merit ---------------------------------------------------------

def test_q_factor_device_pair():
    assert q_factor(24.1, 1.3014e6) == pytest.approx(27000, rel=0.01)


def test_q_factor_round_trip_and_scaling():
    assert kappa_from_q(q_factor(24.1, 1.3e6), 1.3e6) == pytest.approx(24.1, rel=1e-15)
    assert q_factor(2.0, 4.0) == 1.0
    assert q_factor(48.2, 1.3e6) == pytest.approx(0.5 * q_factor(24.1, 1.3e6), rel=1e-15)
    with pytest.raises(ValueError):
        q_factor(0.0, 1.0)


def test_regime_examples():
    r = regime(DEVICE)
    assert r.ratio_g_kappa == pytest.approx(0.402, abs=5e-4)
    assert r.regime == "near_strong"
    assert r.cooperativity == pytest.approx(9.7**2 / (24.1 * 1.9))
    r0 = regime(SystemParams(0.0, 24.1, 1.9))
    assert (r0.ratio_g_kappa, r0.cooperativity, r0.regime) == (0.0, 0.0, "weak_purcell")
    r13 = regime(SystemParams(13.0, 24.1, 1.9))
    assert r13.ratio_g_kappa == pytest.approx(0.539, abs=5e-4)
    assert r13.regime == "strong" and r13.is_strong


def test_regime_boundaries():
    assert regime(SystemParams(0.4, 1.0, 1.0)).regime == "near_strong"
    assert regime(SystemParams(0.5, 1.0, 1.0)).regime == "near_strong"
    assert regime(SystemParams(0.399, 1.0, 1.0)).regime == "weak_purcell"


def test_purcell_factor_examples():
    assert purcell_factor(959.0, 137.0) == pytest.approx(7.0, abs=0.01)
    assert purcell_factor(137.0, 137.0) == 1.0
    assert purcell_factor(321 * 2.8, 321.0) == pytest.approx(2.8, rel=1e-15)
    with pytest.raises(ValueError):
        purcell_factor(-1.0, 1.0)


def test_photon_budget_examples():
    assert photon_budget(80e6, 0.25, 0.15) == pytest.approx(3.0e6, rel=1e-15)
    assert photon_budget(12345.0, 1.0, 1.0) == 12345.0
    assert photon_budget(80e6, 0.25, 0.0) == 0.0
    with pytest.raises(ValueError):
        photon_budget(80e6, 1.5, 0.1)


def test_theoretical_purcell_max():
    assert theoretical_purcell_max(27000, 35) == pytest.approx(58.6, abs=0.05)
    assert theoretical_purcell_max(54000, 35) == pytest.approx(2 * theoretical_purcell_max(27000, 35))
    assert theoretical_purcell_max(4 * math.pi**2 / 3, 1) == pytest.approx(1.0, rel=1e-15)


# -- lifetime vs detuning -----------------------------------------------------

def test_lifetime_limits_and_half_point():
    assert lifetime_vs_detuning(0.0, 1100.0, 220.0, 16.3) == pytest.approx(220.0)
    assert lifetime_vs_detuning(1e9, 1100.0, 220.0, 16.3) == pytest.approx(1100.0, rel=1e-9)
    expected = 1.0 / (1 / 1100 + 0.5 * (1 / 220 - 1 / 1100))
    assert lifetime_vs_detuning(16.3, 1100.0, 220.0, 16.3) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(366.7, abs=0.05)


def test_lifetime_ordering_enforced():
    with pytest.raises(ValueError):
        lifetime_vs_detuning(0.0, 200.0, 220.0, 16.3)


@settings(max_examples=100, deadline=None)
@given(tau_on=st.floats(10.0, 500.0), ratio=st.floats(1.01, 20.0), kappa=st.floats(1.0, 100.0),
       d=st.lists(st.floats(0.0, 1000.0), min_size=2, max_size=10))
def test_lifetime_monotone_and_bounded(tau_on, ratio, kappa, d):
    tau_off = tau_on * ratio
    d = np.sort(np.array(d))
    tau = lifetime_vs_detuning(d, tau_off, tau_on, kappa)
    assert np.all(np.diff(tau) >= -1e-9 * tau_off)
    assert np.all(tau >= tau_on * (1 - 1e-12)) and np.all(tau <= tau_off * (1 + 1e-12))
    np.testing.assert_allclose(lifetime_vs_detuning(-d, tau_off, tau_on, kappa), tau)


def test_two_mode_lifetime_reduces_to_single_mode():
    e = np.linspace(-50, 50, 11)
    one = lifetime_vs_energy(e, 1100.0, [(0.0, 16.3, 220.0)])
    np.testing.assert_allclose(one, lifetime_vs_detuning(e, 1100.0, 220.0, 16.3), rtol=1e-14)
    two = lifetime_vs_energy(e, 1100.0, [(0.0, 16.3, 220.0), (1e7, 16.3, 220.0)])
    np.testing.assert_allclose(two, one, rtol=1e-9)


# -- units --------------------------------------------------------------------

def test_hbar_value_and_conversions():
    assert HBAR_UEV_PS == pytest.approx(658.2119569, rel=1e-9)
    assert per_ps_to_rate(rate_to_per_ps(3.8)) == pytest.approx(3.8, rel=1e-15)
    # a 1 ueV energy-rate corresponds to a lifetime of hbar / 1 ueV
    assert 1.0 / rate_to_per_ps(1.0) == pytest.approx(HBAR_UEV_PS)
