"""End-to-end acceptance criteria, each run at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line with the measured numbers; the
lines are repeated in the pytest terminal summary.
"""

import io
import json
import time
from contextlib import redirect_stdout
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.stats import chi2

from qdcavity import (
    SystemParams,
    photon_budget,
    purcell_factor,
    q_factor,
    reflectance,
)
from qdcavity.cli import main as cli_main
from qdcavity.fitmodels import fit_purcell_dip, fit_spectrum, initial_guess_spectrum
from qdcavity.fitting import FitError
from qdcavity.oracle import HilbertConfig, equivalence_check, steady_state_reflectivity
from qdcavity.synthetic import (
    DEVICE_NUISANCE,
    simulate_purcell_dip_data,
    simulate_spectrum,
)
from qdcavity.timedomain import (
    DecayModel,
    InstrumentResponse,
    estimate_g2_zero,
    fit_lifetime,
    g2_with_background,
    passes_single_photon_criterion,
    simulate_decay,
    simulate_g2,
    simulate_hbt_events,
)
from qdcavity.tuning import (
    ChargePlateauModel,
    ModePair,
    StarkModel,
    find_resonance_crossings,
    simulate_bias_map,
    transition_energy,
)

ROOT = Path(__file__).resolve().parents[1]
G, KAPPA, GAMMA = 9.7, 24.1, 1.9
DEVICE = SystemParams(G, KAPPA, GAMMA)
N_MC = 100


def device_grid(n=201, span=5.0):
    return np.linspace(-span * KAPPA, span * KAPPA, n)


# 1 ---------------------------------------------------------------------------------

def test_criterion_1_oracle_equivalence(verdict):
    t0 = time.perf_counter()
    res = equivalence_check(DEVICE, HilbertConfig(3, detuning_grid=device_grid()))
    elapsed = time.perf_counter() - t0
    ok = res["max_rel_deviation"] < 1e-3 and elapsed < 10.0
    assert verdict("criterion 1 (oracle equivalence)", ok,
                   f"max rel deviation {res['max_rel_deviation']:.2e} (< 1e-3) over 201 points, "
                   f"runtime {elapsed:.2f} s (< 10 s)")


# 2 ---------------------------------------------------------------------------------

def _fwhm(params):
    half = lambda w: reflectance(w, params) - 0.5
    c = params.omega_c
    return (brentq(half, c, c + 100 * params.kappa, xtol=1e-13)
            - brentq(half, c - 100 * params.kappa, c, xtol=1e-13))


def test_criterion_2_empty_cavity(verdict):
    empty = SystemParams(0.0, KAPPA, GAMMA)
    clean = fit_spectrum(simulate_spectrum(empty, DEVICE_NUISANCE, noise=0.0), coupled=False)
    noisy = fit_spectrum(simulate_spectrum(empty, DEVICE_NUISANCE, seed=0), coupled=False)
    width_clean = _fwhm(SystemParams(0.0, clean["kappa"], GAMMA, clean["omega_c"]))
    width_noisy = _fwhm(SystemParams(0.0, noisy["kappa"], GAMMA, noisy["omega_c"]))
    err_truth = abs(width_clean / (2 * KAPPA) - 1.0)
    err_self = abs(width_noisy / (2 * noisy["kappa"]) - 1.0)
    q = q_factor(KAPPA, 1.3014e6)
    ok = err_truth < 1e-3 and err_self < 1e-3 and abs(q / 27000 - 1.0) < 0.01
    assert verdict("criterion 2 (empty cavity)", ok,
                   f"fitted FWHM / 2 kappa_true - 1 = {err_truth:.1e} (noiseless), "
                   f"FWHM / 2 kappa_fit - 1 = {err_self:.1e} (1% noise); "
                   f"Q(24.1 ueV, 1.3014 eV) = {q:.0f} ({100 * (q / 27000 - 1):+.2f}% vs 27000)")


# 3 ---------------------------------------------------------------------------------

def test_criterion_3_closed_loop_spectrum(verdict, tmp_path):
    truth = dict(g=G, kappa=KAPPA, gamma=GAMMA, eta=DEVICE_NUISANCE.eta)

    def recovered(rep):
        return (abs(rep["g"] / G - 1) < 0.02 and abs(rep["kappa"] / KAPPA - 1) < 0.02
                and abs(rep["gamma"] / GAMMA - 1) < 0.10 and abs(rep["eta"] - truth["eta"]) < 0.01)

    # canonical realization (seed 0) through the command line, blind from the data file
    assert cli_main(["simulate", "spectrum", "--seed", "0", "--out", str(tmp_path)]) == 0
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = cli_main(["fit", "spectrum", str(tmp_path / "spectrum.csv"), "--out", str(tmp_path)])
    printed = buf.getvalue()
    report = json.loads((tmp_path / "spectrum_report.json").read_text())
    canon = report["values"]
    ratio = report["derived"]["g_over_kappa"]
    canon_ok = (code == 0 and recovered(canon) and abs(ratio - 0.402) < 0.01
                and "near_strong" in printed and f"g/kappa = {ratio:.4f}" in printed)

    # Monte Carlo over seeds
    t0 = time.perf_counter()
    inside = dict.fromkeys(truth, 0)
    n_recovered = n_near = 0
    ratios = []
    for seed in range(N_MC):
        sp = simulate_spectrum(seed=seed)
        rep = fit_spectrum(sp, guess=initial_guess_spectrum(sp))
        for name, t in truth.items():
            inside[name] += abs(rep[name] - t) <= 2 * rep.one_sigma[name]
        n_recovered += recovered(rep)
        ratios.append(rep["g"] / rep["kappa"])
        n_near += rep["g"] / rep["kappa"] >= 0.4
    elapsed = time.perf_counter() - t0
    ratios = np.array(ratios)
    mc_ok = min(inside.values()) >= 90 and elapsed < 60.0
    ok = canon_ok and mc_ok
    coverage = ", ".join(f"{k} {v}" for k, v in inside.items())
    assert verdict("criterion 3 (closed-loop spectrum fit)", ok,
                   f"seed 0: g {canon['g']:.3f}, kappa {canon['kappa']:.3f}, "
                   f"gamma {canon['gamma']:.3f}, eta {canon['eta']:.4f}, g/kappa {ratio:.4f} "
                   f"({report['derived']['regime']}); {N_MC} seeds: truth within 2 sigma "
                   f"[{coverage}] (>= 90), recovery tolerances met {n_recovered}/{N_MC}, "
                   f"g/kappa {ratios.mean():.4f} +- {ratios.std(ddof=1):.4f}, "
                   f"within 0.402 +- 0.01 {np.sum(np.abs(ratios - 0.402) < 0.01)}/{N_MC}, "
                   f"classified near_strong {n_near}/{N_MC}; runtime {elapsed:.1f} s (< 60 s)")


# 4 ---------------------------------------------------------------------------------

def test_criterion_4_joint_resonance(verdict):
    closed = (G * G / (G * G + GAMMA * KAPPA)) ** 2
    analytic = reflectance(0.0, DEVICE)
    oracle = steady_state_reflectivity(DEVICE, HilbertConfig(3), 0.0)
    d_closed = abs(analytic - closed)
    d_oracle = abs(oracle - analytic) / analytic
    ok = d_closed < 1e-12 and d_oracle < 1e-3 and abs(closed - 0.4525) < 5e-5
    assert verdict("criterion 4 (joint resonance)", ok,
                   f"R = {analytic:.6f}, |R - closed form| = {d_closed:.1e} (< 1e-12), "
                   f"oracle rel deviation {d_oracle:.1e} (< 1e-3)")


# 5 ---------------------------------------------------------------------------------

def _lifetime_study(tau, weights):
    irf = InstrumentResponse.gaussian(150.0)
    taus, sigmas = [], []
    for seed in range(N_MC):
        h = simulate_decay(DecayModel.mono(tau), irf, 1000, 4.0, 1e6, seed, -500.0)
        rep = fit_lifetime(h, irf, weights=weights)
        assert rep.converged
        taus.append(rep["tau"])
        sigmas.append(rep.one_sigma["tau"])
    taus = np.array(taus)
    scatter = taus.std(ddof=1)
    # 99% confidence interval of the true spread given the sample scatter
    lo = scatter * np.sqrt((N_MC - 1) / chi2.ppf(0.995, N_MC - 1))
    hi = scatter * np.sqrt((N_MC - 1) / chi2.ppf(0.005, N_MC - 1))
    return taus.mean() - tau, scatter, float(np.mean(sigmas)), (lo, hi)


@pytest.mark.parametrize("tau, max_bias", [(137.0, 10.0), (321.0, 5.0)])
def test_criterion_5_lifetime_recovery(verdict, tau, max_bias):
    parts, ok = [], True
    for weights in ("poisson_neyman", "poisson_mle"):
        bias, scatter, sigma_hat, (lo, hi) = _lifetime_study(tau, weights)
        consistent = lo <= sigma_hat <= hi
        ok &= abs(bias) < max_bias and consistent
        parts.append(f"{weights}: bias {bias:+.3f} ps (< {max_bias:g}), scatter {scatter:.3f} ps, "
                     f"sigma-hat {sigma_hat:.3f} ps in 99% interval [{lo:.3f}, {hi:.3f}]")
    assert verdict(f"criterion 5 (lifetime recovery, tau = {tau:g} ps)", ok, "; ".join(parts))


# 6 ---------------------------------------------------------------------------------

def test_criterion_6_purcell_arithmetic(verdict):
    budget = photon_budget(80e6, 0.25, 0.15)
    fp_a = purcell_factor(321.0 * 2.8, 321.0)
    fp_b = purcell_factor(137.0 * 5.9, 137.0)
    ok = budget == 3.0e6 and fp_a == 2.8 and fp_b == 5.9
    assert verdict("criterion 6 (Purcell arithmetic)", ok,
                   f"80 MHz x 0.25 x 0.15 = {budget!r} /s; F_p(898.8, 321) = {fp_a!r}; "
                   f"F_p(808.3, 137) = {fp_b!r}")


# 7 ---------------------------------------------------------------------------------

def test_criterion_7_purcell_dip_fit(verdict):
    kappa, tau_on = 16.3, 220.0

    def within(rep):
        return (abs(rep["e_1"] - 0.0) < 0.2 * kappa and abs(rep["e_2"] - 100.0) < 0.2 * kappa
                and abs(rep["tau_on"] / tau_on - 1.0) < 0.10)

    energy, lifetime, sigma = simulate_purcell_dip_data(seed=0)
    rep = fit_purcell_dip(energy, lifetime, sigma)
    passed = 0
    for seed in range(1, 201):
        e, t, s = simulate_purcell_dip_data(seed=seed)
        try:
            passed += within(fit_purcell_dip(e, t, s))
        except FitError:
            pass
    ok = len(energy) == 15 and rep.converged and within(rep)
    assert verdict("criterion 7 (Purcell-dip fit)", ok,
                   f"seed 0: e_1 {rep['e_1']:+.2f} ueV, e_2 {rep['e_2']:.2f} ueV "
                   f"(tolerance {0.2 * kappa:.2f}), tau_on {rep['tau_on']:.1f} ps "
                   f"({100 * (rep['tau_on'] / tau_on - 1):+.1f}%); "
                   f"other seeds meeting all tolerances: {passed}/200")


# 8 ---------------------------------------------------------------------------------

def test_criterion_8_g2(verdict):
    parts, ok = [], True
    for target in (0.0, 0.2, 0.5):
        est = estimate_g2_zero(simulate_g2(137.0, target, 0.0, 80e6, 100000, seed=0))
        ok &= abs(est.g2_0 - target) <= 0.03
        parts.append(f"target {target:g} -> {est.g2_0:.4f}")
    p = 0.1
    for b in (0.1, 0.3):
        g2, err, _ = simulate_hbt_events(p, p * b / (1 - b), 2_000_000, seed=1)
        expected = g2_with_background(0.0, b)
        ok &= abs(g2 - expected) < 3 * err
        parts.append(f"b {b:g}: event-level {g2:.4f} +- {err:.4f} vs 2b - b^2 = {expected:.4f}")
    ok &= passes_single_photon_criterion(0.2) and not passes_single_photon_criterion(0.25)
    parts.append("0.2 classified single-photon")
    assert verdict("criterion 8 (g2 estimator)", ok, "; ".join(parts))


# 9 ---------------------------------------------------------------------------------

def test_criterion_9_tuning(verdict):
    charge = ChargePlateauModel()
    rng = np.random.default_rng(0)
    worst, n_roots = 0.0, 0
    for _ in range(500):
        stark = StarkModel(e0=rng.uniform(-100, 100), p=rng.uniform(-200, 200),
                           beta=rng.uniform(-50, 50), v_ref=18.0)
        modes = [("M", rng.uniform(-6500, 500))]
        for c in find_resonance_crossings(stark, charge, modes, (10.0, 26.0)):
            if c.degenerate:
                continue
            n_roots += 1
            worst = max(worst, abs(transition_energy(c.bias, charge, stark)[1] - modes[0][1]))
    stark = StarkModel(0.0, -20.0, -10.0, 18.0)
    bias = np.linspace(16.0, 22.0, 121)
    m = simulate_bias_map(stark, charge, ModePair(-6100.0, -6150.0, 12.0, 12.0), bias,
                          np.linspace(-6500.0, 500.0, 701))
    i = int(np.flatnonzero(bias < 18.0)[-1])
    jump = (m.qd_energy[i + 1] - m.qd_energy[i]) - (stark.energy(bias[i + 1]) - stark.energy(bias[i]))
    ok = n_roots > 100 and worst < 1e-9 and abs(jump + 6000.0) < 1e-9
    assert verdict("criterion 9 (tuning)", ok,
                   f"{n_roots} roots, max |E_QD(V) - E_mode| = {worst:.1e} ueV (< 1e-9); "
                   f"map discontinuity at {charge.thresholds[0]:g} V = {jump:.6f} ueV")


# 10 --------------------------------------------------------------------------------

def test_criterion_10_scope_statement(verdict):
    readme = (ROOT / "README.md").read_text()
    section = readme.split("## What is not reproduced", 1)
    ok = len(section) == 2 and all(w in section[1] for w in ("quality factor", "count rates", "Stark curve"))
    assert verdict("criterion 10 (non-reproducibility statement)", ok,
                   "README states that device-level results (pillar Q, measured count rates, "
                   "measured Stark curve) are not reproduced and are covered by synthetic "
                   "round trips and identities" if ok else "statement missing from README")
