"""Curve fits built on :mod:`qdcavity.fitting`: reflection spectra, Purcell dips, mode maps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cqed import OpticalNuisance, SystemParams, q_factor, regime
from .fitting import FitError, FitProblem, FitReport, Parameter, least_squares

__all__ = [
    "Spectrum",
    "SpectrumGuess",
    "FeaturelessSpectrumError",
    "DEFAULT_PHOTON_ENERGY",
    "initial_guess_spectrum",
    "fit_spectrum",
    "spectrum_derived",
    "spectrum_problem",
    "fit_purcell_dip",
    "purcell_dip_model",
    "spatial_dip_model",
    "fit_spatial_map",
]

# photon energy (ueV) assumed for Q when a spectrum carries only offsets
DEFAULT_PHOTON_ENERGY = 1.3014e6

SPECTRUM_PARAMS = ("g", "kappa", "gamma", "omega_c", "omega_qd", "eta", "base_a", "base_b")


class FeaturelessSpectrumError(ValueError):
    """No dip stands out of the noise."""


@dataclass
class Spectrum:
    """Sampled curve on an energy axis (ueV, offsets from ``omega_ref``)."""

    energy: np.ndarray
    value: np.ndarray
    sigma: np.ndarray | None = None
    kind: str = "reflectivity"
    omega_ref: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.energy = np.asarray(self.energy, dtype=float)
        self.value = np.asarray(self.value, dtype=float)
        if self.sigma is not None:
            self.sigma = np.asarray(self.sigma, dtype=float)
        if self.energy.shape != self.value.shape or self.energy.ndim != 1:
            raise ValueError("energy and value must be 1-D arrays of equal length")
        if self.kind not in ("reflectivity", "counts"):
            raise ValueError(f"unknown spectrum kind {self.kind!r}")
        if not np.all(np.isfinite(self.value)):
            raise ValueError("spectrum values must be finite")

    def sorted(self):
        order = np.argsort(self.energy, kind="stable")
        return Spectrum(self.energy[order], self.value[order],
                        None if self.sigma is None else self.sigma[order],
                        self.kind, self.omega_ref, dict(self.metadata))


@dataclass
class SpectrumGuess:
    params: SystemParams
    nuisance: OpticalNuisance
    coupled: bool
    noise: float
    minima: tuple[float, ...] = ()


def _reflectivity(x, g, kappa, gamma, wc, wqd):
    em = gamma - 1j * (x - wqd)
    cav = kappa - 1j * (x - wc)
    r = 1.0 - kappa / (cav + g * g / em)
    return r.real**2 + r.imag**2


def _spectrum_model(x, v):
    g, kappa, gamma, wc, wqd, eta, a, b = v
    refl = _reflectivity(x, g, kappa, gamma, wc, wqd)
    return (a + b * x) * (refl + (1.0 - eta) * (1.0 - refl))


def _smooth(y, width=3):
    if width <= 1 or len(y) < width:
        return y.copy()
    kernel = np.ones(width) / width
    padded = np.pad(y, width // 2, mode="edge")
    return np.convolve(padded, kernel, mode="valid")


def _crossing(x, d, i_from, i_to, level):
    """Interpolated position where ``d`` falls below ``level`` walking from i_from towards i_to."""
    step = 1 if i_to > i_from else -1
    for i in range(i_from, i_to + step, step):
        if d[i] < level:
            j = i - step
            frac = (d[j] - level) / (d[j] - d[i])
            return x[j] + frac * (x[i] - x[j])
    return x[i_to]


def initial_guess_spectrum(spectrum: Spectrum) -> SpectrumGuess:
    """Starting values for a reflection-spectrum fit.

    The baseline comes from a straight line through the outer quartiles,
    the cavity from the half-depth crossings of the normalized dip and the
    mode matching from the dip depth.  If two minima flank a significant
    local maximum (an emitter inside the dip), ``g`` is seeded from half the
    minima splitting and ``omega_qd`` from the maximum.
    """
    sp = spectrum.sorted()
    x, y = sp.energy, sp.value
    n = len(x)
    if n < 20:
        raise ValueError("need at least 20 points to seed a spectrum fit")
    q = max(n // 4, 2)
    ex = np.concatenate([x[:q], x[-q:]])
    ey = np.concatenate([y[:q], y[-q:]])
    b, a = np.polyfit(ex, ey, 1)
    resid = ey - (a + b * ex)
    if a <= 0:
        raise FeaturelessSpectrumError("baseline is not positive")
    noise = float(np.std(resid, ddof=2)) / a
    norm = y / (a + b * x)
    d_raw = 1.0 - norm
    d = _smooth(d_raw, 3)
    depth = float(d.max())
    if depth < 3.0 * max(noise, 1e-12):
        raise FeaturelessSpectrumError(
            f"dip depth {depth:.3g} is below three times the noise ({noise:.3g})")
    i_min = int(np.argmax(d))
    left = _crossing(x, d, i_min, 0, 0.5 * depth)
    right = _crossing(x, d, i_min, n - 1, 0.5 * depth)
    # outer half-depth crossings, robust to a peak inside the dip
    above = np.nonzero(d >= 0.5 * depth)[0]
    i_lo, i_hi = above[0], above[-1]
    outer_left = _crossing(x, d, i_lo, 0, 0.5 * depth)
    outer_right = _crossing(x, d, i_hi, n - 1, 0.5 * depth)

    coupled = False
    minima = (float(x[i_min]),)
    w_qd = float(x[i_min])
    g0 = 0.0
    # local minima of the normalized curve that reach at least half the depth
    s = 1.0 - d
    cand = [i for i in range(1, n - 1)
            if s[i] <= s[i - 1] and s[i] <= s[i + 1] and d[i] >= 0.5 * depth]
    best = None
    for ii, i in enumerate(cand):
        for j in cand[ii + 1:]:
            k = i + int(np.argmax(s[i:j + 1]))
            prominence = s[k] - max(s[i], s[j])
            if prominence > 3.0 * max(noise, 1e-12) and (best is None or prominence > best[0]):
                best = (prominence, i, j, k)
    if best is not None:
        _, i, j, k = best
        coupled = True
        minima = (float(x[i]), float(x[j]))
        g0 = 0.5 * abs(x[j] - x[i])
        w_qd = float(x[k])
        w_c = 0.5 * (outer_left + outer_right)
        kappa0 = 0.5 * (outer_right - outer_left)
    else:
        w_c = float(x[i_min])
        kappa0 = 0.5 * (right - left)
    spacing = float(np.median(np.diff(x)))
    kappa0 = max(kappa0, spacing)
    gamma0 = max(0.1 * kappa0, 0.5 * spacing)
    eta0 = float(np.clip(depth, 0.05, 1.0))
    params = SystemParams(g=g0, kappa=kappa0, gamma=gamma0, omega_c=w_c, omega_qd=w_qd)
    return SpectrumGuess(params, OpticalNuisance(eta=eta0, base_a=a, base_b=b),
                         coupled, noise, minima)


def spectrum_derived(report: FitReport, omega_ref=0.0, photon_energy=None):
    """Figures of merit from a spectrum fit: g/kappa, cooperativity, regime, Q, eta."""
    v = report.values
    notes = []
    if photon_energy is None:
        if omega_ref > 0:
            photon_energy = omega_ref + v["omega_c"]
        else:
            photon_energy = DEFAULT_PHOTON_ENERGY
            notes.append(f"Q assumes a photon energy of {DEFAULT_PHOTON_ENERGY:g} ueV "
                         "(energies are offsets without a reference)")
    kappa = v["kappa"]
    out = {"photon_energy_uev": photon_energy, "Q": q_factor(kappa, photon_energy),
           "eta": v["eta"]}
    if v["g"] > 0:
        reg = regime(SystemParams(v["g"], kappa, max(v["gamma"], 1e-300)))
        out.update(g_over_kappa=reg.ratio_g_kappa, cooperativity=reg.cooperativity,
                   regime=reg.regime)
    else:
        out.update(g_over_kappa=0.0, cooperativity=0.0, regime="weak_purcell")
    out["notes"] = notes
    return out


def fit_spectrum(spectrum: Spectrum, coupled=None, guess: SpectrumGuess | None = None,
                 restarts=0, seed=0, max_iter=200) -> FitReport:
    """Fit the reflection model with mode matching and linear baseline.

    ``coupled=None`` follows the seeding heuristic; ``False`` fits an empty
    cavity (``g`` fixed at 0, emitter parameters frozen).  ``restarts``
    extra fits from jittered emitter seeds guard against landing in the
    ``g = 0`` basin; the lowest chi-squared wins.
    """
    sp = spectrum.sorted()
    x, y = sp.energy, sp.value
    if guess is None:
        guess = initial_guess_spectrum(sp)
    if coupled is None:
        coupled = guess.coupled
    gp, nu = guess.params, guess.nuisance
    span = float(x[-1] - x[0])
    spacing = float(np.min(np.diff(x)))
    kappa0 = min(max(gp.kappa, 2 * spacing), 0.9 * span)
    g0 = gp.g if coupled else 0.0
    if coupled:
        g0 = min(max(g0, spacing), 0.9 * span)
    gamma0 = min(max(gp.gamma, 0.1 * spacing), 0.9 * span)

    def build(g_init, gamma_init, wqd_init):
        return [
            Parameter("g", g_init, 0.0, span, fixed=not coupled),
            Parameter("kappa", kappa0, 1e-3 * spacing, span),
            Parameter("gamma", gamma_init, 1e-4 * spacing, span, fixed=not coupled),
            Parameter("omega_c", float(np.clip(gp.omega_c, x[0], x[-1])), x[0], x[-1]),
            Parameter("omega_qd", float(np.clip(wqd_init, x[0], x[-1])), x[0], x[-1],
                      fixed=not coupled),
            Parameter("eta", float(np.clip(nu.eta, 0.0, 1.0)), 0.0, 1.0),
            Parameter("base_a", nu.base_a, 0.0),
            Parameter("base_b", nu.base_b),
        ]

    def run(params):
        problem = FitProblem(params, model=lambda v: _spectrum_model(x, v), data=y,
                             sigma=sp.sigma, weights="uniform")
        return least_squares(problem, max_iter=max_iter)

    report = run(build(g0, gamma0, gp.omega_qd))
    if coupled and restarts:
        rng = np.random.default_rng(seed)
        for _ in range(restarts):
            trial = run(build(g0 * rng.uniform(0.5, 1.5),
                              gamma0 * rng.uniform(0.3, 3.0),
                              gp.omega_qd + rng.normal(0.0, 0.2 * kappa0)))
            if trial.chi2 < report.chi2:
                report = trial
    report.notes.append("coupled emitter-cavity model" if coupled else "empty-cavity model (g=0)")
    return report


def spectrum_problem(spectrum: Spectrum, report: FitReport) -> FitProblem:
    """The fit problem behind a spectrum report, for profiling its parameters.

    Parameters start at the reported values; parameters the fit held fixed
    stay fixed.  Rates, mode matching and baseline keep their physical
    bounds.
    """
    sp = spectrum.sorted()
    x = sp.energy
    lower = dict(g=0.0, kappa=0.0, gamma=0.0, eta=0.0, base_a=0.0)
    upper = dict(eta=1.0)
    params = [Parameter(n, report.values[n], lower.get(n, -np.inf), upper.get(n, np.inf),
                        fixed=n not in report.free)
              for n in SPECTRUM_PARAMS]
    return FitProblem(params, model=lambda v: _spectrum_model(x, v), data=sp.value,
                      sigma=sp.sigma, weights="uniform")


def purcell_dip_model(energy, v, n_modes=2):
    """Lifetime vs energy for ``v = (e_1..e_n, kappa, tau_on, tau_off)``."""
    energy = np.asarray(energy, dtype=float)
    centers = v[:n_modes]
    kappa, tau_on, tau_off = v[n_modes:n_modes + 3]
    lor = sum(kappa**2 / (kappa**2 + (energy - c) ** 2) for c in centers)
    rate = 1.0 / tau_off + (1.0 / tau_on - 1.0 / tau_off) * lor
    return 1.0 / rate


def fit_purcell_dip(energy, lifetime, sigma=None, n_modes=2, max_iter=200) -> FitReport:
    """Fit lifetimes against emission energy with Lorentzian Purcell dips.

    All modes share one ``kappa`` and one on-resonance lifetime ``tau_on``.
    Mode energies are reported as ``e_1 < e_2 < ...``.
    """
    energy = np.asarray(energy, dtype=float)
    lifetime = np.asarray(lifetime, dtype=float)
    order = np.argsort(energy)
    energy, lifetime = energy[order], lifetime[order]
    if sigma is not None:
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float), lifetime.shape)[order]
    if len(energy) < n_modes + 4:
        raise FitError("too few points for a Purcell-dip fit")
    span = energy[-1] - energy[0]
    spacing = float(np.median(np.diff(energy)))
    # seeds: the deepest points, at least two grid steps apart
    seeds = []
    for i in np.argsort(lifetime):
        if all(abs(energy[i] - s) > 2.5 * spacing for s in seeds):
            seeds.append(float(energy[i]))
        if len(seeds) == n_modes:
            break
    if len(seeds) < n_modes:
        raise FitError("could not seed all mode energies")
    seeds.sort()
    tau_off0 = float(np.median(np.sort(lifetime)[-max(len(lifetime) // 3, 1):]))
    tau_on0 = float(min(lifetime.min(), 0.9 * tau_off0))
    params = [Parameter(f"e_{k + 1}", s, energy[0], energy[-1]) for k, s in enumerate(seeds)]
    params += [Parameter("kappa", 1.5 * spacing, 1e-3 * spacing, span),
               Parameter("tau_on", tau_on0, 0.0),
               Parameter("tau_off", tau_off0, 0.0)]
    problem = FitProblem(params, model=lambda v: purcell_dip_model(energy, v, n_modes),
                         data=lifetime, sigma=sigma, weights="uniform")
    report = least_squares(problem, max_iter=max_iter)
    centers = [report.values[f"e_{k + 1}"] for k in range(n_modes)]
    if np.any(np.diff(centers) < 0):
        perm = list(np.argsort(centers)) + list(range(n_modes, len(report.names)))
        names = report.names
        vals = [report.values[names[i]] for i in perm]
        sig = [report.one_sigma[names[i]] for i in perm]
        report.values = dict(zip(names, vals))
        report.one_sigma = dict(zip(names, sig))
        report.covariance = report.covariance[np.ix_(perm, perm)]
    if report.values["tau_on"] > 0:
        report.notes.append(
            f"Purcell factor on resonance {report.values['tau_off'] / report.values['tau_on']:.3g}")
    return report


def spatial_dip_model(x, y, v):
    """Gaussian mode dip: ``base (1 - depth exp(-2 r^2 / waist^2))``, ``v = (x0, y0, waist, depth, base)``."""
    x0, y0, waist, depth, base = v
    r2 = (x - x0) ** 2 + (y - y0) ** 2
    return base * (1.0 - depth * np.exp(-2.0 * r2 / waist**2))


def fit_spatial_map(x_grid, y_grid, image, max_iter=200) -> FitReport:
    """Fit a Gaussian reflectivity dip to a 2-D map ``image[iy, ix]`` (um)."""
    x_grid = np.asarray(x_grid, dtype=float)
    y_grid = np.asarray(y_grid, dtype=float)
    image = np.asarray(image, dtype=float)
    xx, yy = np.meshgrid(x_grid, y_grid)
    base0 = float(np.median(np.concatenate([image[0], image[-1], image[:, 0], image[:, -1]])))
    iy, ix = np.unravel_index(np.argmin(image), image.shape)
    depth0 = float(np.clip(1.0 - image[iy, ix] / base0, 0.01, 1.0))
    # the dip exceeds depth * e^-2 inside r < waist
    below = (1.0 - image / base0) > depth0 * math.exp(-2.0)
    area = np.count_nonzero(below) * abs(x_grid[1] - x_grid[0]) * abs(y_grid[1] - y_grid[0])
    waist0 = max(math.sqrt(area / math.pi), abs(x_grid[1] - x_grid[0]))
    span = max(x_grid[-1] - x_grid[0], y_grid[-1] - y_grid[0])
    params = [Parameter("x0", float(x_grid[ix]), x_grid[0], x_grid[-1]),
              Parameter("y0", float(y_grid[iy]), y_grid[0], y_grid[-1]),
              Parameter("waist", min(waist0, 0.9 * span), 0.0, span),
              Parameter("depth", depth0, 0.0, 1.0),
              Parameter("base", base0, 0.0)]
    xf, yf, data = xx.ravel(), yy.ravel(), image.ravel()
    problem = FitProblem(params, model=lambda v: spatial_dip_model(xf, yf, v), data=data)
    return least_squares(problem, max_iter=max_iter)
