import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdcavity.tuning import (
    ChargePlateauModel,
    ModePair,
    StarkModel,
    find_resonance_crossings,
    simulate_bias_map,
    transition_energy,
)

CHARGE = ChargePlateauModel()
# illustrative coefficients: a bent Stark curve in the trion plateau
STARK = StarkModel(e0=0.0, p=-20.0, beta=-10.0, v_ref=18.0)
MODES = ModePair(e_h=-6100.0, e_v=-6150.0, kappa_h=12.0, kappa_v=12.0)


def test_charge_plateaus():
    assert CHARGE.state(17.99) == "X0"
    assert CHARGE.state(18.0) == "X-"
    with pytest.raises(ValueError):
        ChargePlateauModel((18.0, 17.0), ("a", "b", "c"), (0, 1, 2))
    with pytest.raises(ValueError):
        ChargePlateauModel((18.0,), ("X0", "X-"), (0.0, 100.0))
    with pytest.raises(ValueError):
        ChargePlateauModel((18.0,), ("X0",), (0.0,))


def test_trion_line_six_mev_lower_across_threshold():
    stark = StarkModel(e0=1.3e6, p=-20.0, beta=-10.0, v_ref=18.0)
    s_lo, e_lo = transition_energy(18.0 - 1e-9, CHARGE, stark)
    s_hi, e_hi = transition_energy(18.0, CHARGE, stark)
    assert (s_lo, s_hi) == ("X0", "X-")
    assert e_hi - e_lo == pytest.approx(-6000.0, abs=1e-6)


def test_constant_energy_without_stark_terms():
    stark = StarkModel(e0=100.0)
    energies = {transition_energy(v, CHARGE, stark)[1] for v in np.linspace(10, 17.9, 20)}
    assert energies == {100.0}


def test_stark_polynomial():
    stark = StarkModel(e0=0.0, p=-100.0, beta=-10.0, v_ref=1.0)
    assert stark.energy(3.0) == pytest.approx(-240.0)


def test_validity_range_enforced():
    stark = StarkModel(e0=0.0, v_min=10.0, v_max=20.0)
    with pytest.raises(ValueError):
        transition_energy(25.0, CHARGE, stark)


@settings(max_examples=50, deadline=None)
@given(v=st.floats(10.0, 17.9), dv=st.floats(1e-6, 1e-3))
def test_energy_continuous_inside_plateau(v, dv):
    _, e1 = transition_energy(v, CHARGE, STARK)
    _, e2 = transition_energy(v + dv, CHARGE, STARK)
    slope_bound = abs(STARK.p) + 2 * abs(STARK.beta) * 30.0
    assert abs(e2 - e1) <= slope_bound * dv * (1 + 1e-9)


def test_mode_pair():
    assert MODES.splitting == 50.0
    assert MODES.resolvable
    assert not ModePair(0.0, 20.0, 12.0, 12.0).resolvable


def test_crossings_satisfy_resonance():
    crossings = find_resonance_crossings(STARK, CHARGE, MODES, (16.0, 22.0))
    assert [c.mode for c in crossings] == ["H", "V"]
    assert [c.bias for c in crossings] == sorted(c.bias for c in crossings)
    energies = dict(H=MODES.e_h, V=MODES.e_v)
    for c in crossings:
        _, e = transition_energy(c.bias, CHARGE, STARK)
        assert abs(e - energies[c.mode]) < 1e-9
        assert c.state == "X-" and not c.degenerate


@settings(max_examples=200, deadline=None)
@given(p=st.floats(-200.0, 200.0), beta=st.floats(-50.0, 50.0), e_mode=st.floats(-6500.0, 500.0))
def test_crossing_roots_property(p, beta, e_mode):
    stark = StarkModel(e0=0.0, p=p, beta=beta, v_ref=18.0)
    for c in find_resonance_crossings(stark, CHARGE, [("M", e_mode)], (10.0, 26.0)):
        if c.degenerate:
            continue
        assert 10.0 <= c.bias <= 26.0
        _, e = transition_energy(c.bias, CHARGE, stark)
        assert abs(e - e_mode) < 1e-9


def test_both_roots_reported():
    # a parabola with its vertex between the two roots, all in the X0 plateau
    stark = StarkModel(e0=0.0, p=0.0, beta=-10.0, v_ref=14.0)
    crossings = find_resonance_crossings(stark, CHARGE, [("M", -40.0)], (10.0, 17.0))
    assert [round(c.bias, 12) for c in crossings] == [12.0, 16.0]


def test_no_crossing_when_discriminant_negative():
    stark = StarkModel(e0=0.0, p=0.0, beta=-10.0, v_ref=14.0)
    assert find_resonance_crossings(stark, CHARGE, [("M", 100.0)], (10.0, 17.0)) == []


def test_degenerate_plateau_crossing():
    stark = StarkModel(e0=-50.0)
    crossings = find_resonance_crossings(stark, CHARGE, [("M", -50.0)], (10.0, 17.0))
    assert len(crossings) == 1 and crossings[0].degenerate
    assert crossings[0].span == (10.0, 17.0)


def test_roots_outside_plateau_are_dropped():
    # this mode is met by the X0 branch only beyond the threshold, where the trion holds
    stark = StarkModel(e0=0.0, p=-20.0, beta=0.0, v_ref=18.0)
    crossings = find_resonance_crossings(stark, CHARGE, [("M", -40.0)], (10.0, 26.0))
    assert crossings == []


def test_tiny_curvature_root_is_accurate():
    stark = StarkModel(e0=0.0, p=-20.0, beta=1e-12, v_ref=18.0)
    (c,) = find_resonance_crossings(stark, CHARGE, [("M", -6040.0)], (16.0, 22.0))
    _, e = transition_energy(c.bias, CHARGE, stark)
    assert abs(e + 6040.0) < 1e-9
    assert c.bias == pytest.approx(20.0, abs=1e-9)


# -- bias map ------------------------------------------------------------------------

BIAS = np.linspace(16.0, 22.0, 121)
ENERGY = np.linspace(-6500.0, 500.0, 701)


def test_bias_map_discontinuity_at_threshold():
    m = simulate_bias_map(STARK, CHARGE, MODES, BIAS, ENERGY)
    below = BIAS < 18.0
    i_lo, i_hi = np.flatnonzero(below)[-1], np.flatnonzero(~below)[0]
    jump = m.qd_energy[i_hi] - m.qd_energy[i_lo]
    stark_step = STARK.energy(BIAS[i_hi]) - STARK.energy(BIAS[i_lo])
    assert jump - stark_step == pytest.approx(-6000.0, abs=1e-9)
    # the brightest pixel of each row follows the QD line
    peak = ENERGY[np.argmax(m.intensity, axis=1)]
    assert peak[i_hi] - peak[i_lo] == pytest.approx(-6000.0, abs=20.0)


def test_flat_stark_gives_horizontal_stripe():
    m = simulate_bias_map(StarkModel(e0=0.0), ChargePlateauModel((30.0,), ("X0", "X-"), (0.0, -6000.0)),
                          ModePair(-3000.0, -3050.0, 12.0, 12.0), BIAS, ENERGY)
    peaks = ENERGY[np.argmax(m.intensity, axis=1)]
    assert np.all(peaks == peaks[0])


def test_brightening_at_crossings():
    fine_bias = np.linspace(18.5, 22.0, 701)
    m = simulate_bias_map(STARK, CHARGE, MODES, fine_bias, ENERGY)
    step = fine_bias[1] - fine_bias[0]
    crossings = find_resonance_crossings(STARK, CHARGE, MODES, (fine_bias[0], fine_bias[-1]))
    assert len(crossings) == 2
    # peak QD-line intensity along the stripe, one local maximum per mode
    stripe = np.array([np.interp(e, ENERGY, row) for e, row in zip(m.qd_energy, m.intensity)])
    for c in crossings:
        near = np.abs(fine_bias - c.bias) < 0.3
        v_max = fine_bias[near][np.argmax(stripe[near])]
        assert abs(v_max - c.bias) <= step


def test_grids_must_ascend():
    with pytest.raises(ValueError):
        simulate_bias_map(STARK, CHARGE, MODES, BIAS[::-1], ENERGY)
