"""Command-line entry point: ``qdcavity simulate|fit|verify``.

Settings are resolved in increasing priority: built-in defaults, the
``--config`` file, the ``--params`` file, then explicit flags (``--seed``,
``--tolerance``, ``--set key=value``).  Both files are flat ``key = value``
text.  The resolved settings are echoed into every output file, so feeding
an output's ``# config=`` line back through ``--config`` reproduces it.

Exit codes: 0 ok, 2 usage, 3 data error, 4 fit did not converge,
5 verification failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import io as qio
from .cqed import OpticalNuisance, SystemParams, purcell_factor
from .fitmodels import Spectrum, fit_purcell_dip, fit_spatial_map, fit_spectrum, spectrum_derived
from .fitting import FitError
from .oracle import HilbertConfig, OracleError, equivalence_check
from .synthetic import simulate_purcell_dip_data, simulate_spatial_map, simulate_spectrum
from .timedomain import (
    DecayModel,
    InstrumentResponse,
    estimate_g2_zero,
    fit_lifetime,
    simulate_decay,
    simulate_g2,
)
from .tuning import ChargePlateauModel, ModePair, StarkModel, simulate_bias_map

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NONCONVERGED, EXIT_VERIFY = 0, 2, 3, 4, 5

_SYSTEM = {"g": 9.7, "kappa": 24.1, "gamma": 1.9, "omega_c": 0.0, "omega_qd": 0.0}

SIMULATE_DEFAULTS = {
    "spectrum": dict(_SYSTEM, eta=0.96, base_a=1.0, base_b=0.0, noise=0.01, n_points=201,
                     span_kappa=5.0, omega_ref=0.0),
    "decay": {"tau": 137.0, "irf_fwhm": 150.0, "counts": 1000000, "bin_width": 4.0,
              "n_bins": 1000, "t_start": -500.0, "offset": 0.0},
    "g2": {"lifetime": 137.0, "g2_0": 0.2, "background_fraction": 0.0, "rep_rate": 80e6,
           "n_events": 100000, "bin_width": 0.05, "n_side": 5},
    "biasmap": {"e0": 0.0, "p": -20.0, "beta": -10.0, "v_ref": 18.0, "threshold": 18.0,
                "binding_shift": -6000.0, "e_h": -6100.0, "e_v": -6150.0,
                "kappa_h": 12.0, "kappa_v": 12.0, "bias_min": 16.0, "bias_max": 22.0,
                "n_bias": 121, "energy_min": -6500.0, "energy_max": 500.0,
                "n_energy": 701, "qd_linewidth": 30.0},
    "spatialmap": {"x0": 0.0, "y0": 0.0, "waist": 2.2, "depth": 0.96, "base": 1.0,
                   "noise": 0.01, "half_width": 5.0, "n_pixels": 51},
    "lifetimescan": {"e_1": 0.0, "e_2": 100.0, "kappa": 16.3, "tau_on": 220.0,
                     "tau_off": 1100.0, "rel_noise": 0.1},
}

FIT_DEFAULTS = {
    "spectrum": {"restarts": 0, "photon_energy": 0.0, "max_iter": 200},
    "lifetime": {"kind": "mono", "irf_fwhm": 150.0, "weights": "poisson_neyman",
                 "tau_bulk": 0.0, "max_iter": 200},
    "g2": {"window": 0.0},
    "purcell-dip": {"n_modes": 2, "max_iter": 200},
    "spatialmap": {"max_iter": 200},
}

VERIFY_DEFAULTS = dict(_SYSTEM, fock_cutoff=3, n_points=201, span_kappa=5.0, tolerance=1e-3)

_FIT_INPUT_KIND = {"spectrum": ("reflectivity", "counts"), "lifetime": ("decay",),
                   "g2": ("g2",), "purcell-dip": ("lifetime",), "spatialmap": ("spatialmap",)}


class UsageError(Exception):
    pass


# -- configuration ------------------------------------------------------------

def _load_kv(path, defaults, source):
    raw = qio.parse_kv_file(path)
    lines = raw.pop("__lines__", {})
    out = {}
    for key, value in raw.items():
        if key == "seed":
            if not isinstance(value, int):
                raise qio.DataError(f"{path}: line {lines[key]}: seed must be an integer")
            out[key] = value
            continue
        if key not in defaults:
            raise qio.DataError(f"{path}: line {lines[key]}: unknown {source} key {key!r}")
        try:
            out[key] = _as_type(value, defaults[key])
        except ValueError as exc:
            raise qio.DataError(f"{path}: line {lines[key]}: {key}: {exc}") from None
    return out


def _as_type(value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ValueError("expected true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ValueError(f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ValueError("value must be finite")
        return float(value)
    return str(value)


def resolve_config(args, defaults):
    """Merge defaults, ``--config``, ``--params`` and explicit flags."""
    cfg = dict(defaults)
    if args.config:
        cfg.update(_load_kv(args.config, defaults, "config"))
    if args.params:
        cfg.update(_load_kv(args.params, defaults, "parameter"))
    for item in args.set or ():
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in defaults:
            raise UsageError(f"unknown key {key!r} for --set")
        try:
            cfg[key] = _as_type(qio._coerce(value), defaults[key])
        except ValueError as exc:
            raise UsageError(f"--set {key}: {exc}") from None
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "tolerance", None) is not None and "tolerance" in defaults:
        cfg["tolerance"] = args.tolerance
    return cfg


def _meta(cfg):
    return {"tool_version": __version__, "seed": cfg.get("seed"), "config": cfg}


def _out_dir(args):
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- simulate -----------------------------------------------------------------

def _simulate(target, cfg, path):
    seed = cfg["seed"]
    meta = _meta(cfg)
    if target == "spectrum":
        params = SystemParams(cfg["g"], cfg["kappa"], cfg["gamma"], cfg["omega_c"], cfg["omega_qd"])
        nuisance = OpticalNuisance(cfg["eta"], cfg["base_a"], cfg["base_b"])
        half = cfg["span_kappa"] * cfg["kappa"]
        energy = np.linspace(cfg["omega_c"] - half, cfg["omega_c"] + half, cfg["n_points"])
        sp = simulate_spectrum(params, nuisance, energy, cfg["noise"], seed, cfg["omega_ref"])
        qio.write_spectrum(path, sp, meta)
    elif target == "decay":
        irf = InstrumentResponse.gaussian(cfg["irf_fwhm"])
        hist = simulate_decay(DecayModel.mono(cfg["tau"], offset=cfg["offset"]), irf,
                              cfg["n_bins"], cfg["bin_width"], cfg["counts"], seed,
                              cfg["t_start"])
        qio.write_histogram(path, hist, meta)
    elif target == "g2":
        hist = simulate_g2(cfg["lifetime"], cfg["g2_0"], cfg["background_fraction"],
                           cfg["rep_rate"], cfg["n_events"], seed, cfg["n_side"],
                           cfg["bin_width"])
        qio.write_g2(path, hist, meta)
    elif target == "biasmap":
        stark = StarkModel(cfg["e0"], cfg["p"], cfg["beta"], cfg["v_ref"])
        charge = ChargePlateauModel((cfg["threshold"],), ("X0", "X-"), (0.0, cfg["binding_shift"]))
        modes = ModePair(cfg["e_h"], cfg["e_v"], cfg["kappa_h"], cfg["kappa_v"])
        bmap = simulate_bias_map(stark, charge, modes,
                                 np.linspace(cfg["bias_min"], cfg["bias_max"], cfg["n_bias"]),
                                 np.linspace(cfg["energy_min"], cfg["energy_max"], cfg["n_energy"]),
                                 qd_linewidth=cfg["qd_linewidth"])
        qio.write_bias_map(path, bmap, meta)
    elif target == "spatialmap":
        grid = np.linspace(-cfg["half_width"], cfg["half_width"], cfg["n_pixels"])
        x, y, image = simulate_spatial_map(grid, grid, (cfg["x0"], cfg["y0"]), cfg["waist"],
                                           cfg["depth"], cfg["base"], cfg["noise"], seed)
        qio.write_spatial_map(path, x, y, image, meta)
    elif target == "lifetimescan":
        e, tau, sig = simulate_purcell_dip_data((cfg["e_1"], cfg["e_2"]), cfg["kappa"],
                                                cfg["tau_on"], cfg["tau_off"],
                                                cfg["rel_noise"], seed)
        qio.write_lifetime_scan(path, e, tau, sig, meta)


def cmd_simulate(args):
    defaults = dict(SIMULATE_DEFAULTS[args.target], seed=0)
    cfg = resolve_config(args, defaults)
    path = _out_dir(args) / f"{args.target}.csv"
    _simulate(args.target, cfg, path)
    print(f"wrote {path}")
    return EXIT_OK


# -- fit ----------------------------------------------------------------------

def _fmt_pm(report, name):
    return f"{report.values[name]:.6g} +- {report.one_sigma.get(name, float('nan')):.2g}"


def _fit(kind, path, cfg, irf_path):
    """Run a fit; returns ``(payload, summary_lines, residual_x, residuals, x_name, converged)``."""
    if kind == "spectrum":
        sp = qio.read_spectrum(path)
        report = fit_spectrum(sp, restarts=cfg["restarts"], max_iter=cfg["max_iter"])
        derived = spectrum_derived(report, sp.omega_ref, cfg["photon_energy"] or None)
        lines = [f"{n} = {_fmt_pm(report, n)}" for n in ("g", "kappa", "gamma", "eta")]
        lines += [f"Q = {derived['Q']:.5g}", f"g/kappa = {derived['g_over_kappa']:.4f}",
                  f"cooperativity = {derived['cooperativity']:.4g}",
                  f"regime = {derived['regime']}", f"eta = {derived['eta']:.4f}"]
        lines += [f"note: {n}" for n in derived["notes"]]
        return report, derived, lines, sp.sorted().energy, "energy_uev"
    if kind == "lifetime":
        hist = qio.read_histogram(path)
        irf = qio.read_irf(irf_path) if irf_path else InstrumentResponse.gaussian(cfg["irf_fwhm"])
        report = fit_lifetime(hist, irf, kind=cfg["kind"], weights=cfg["weights"],
                              max_iter=cfg["max_iter"])
        derived = {}
        tau_name = "tau" if "tau" in report.values else "tau_fast"
        lines = [f"{n} = {_fmt_pm(report, n)}" for n in report.free]
        if cfg["tau_bulk"] > 0:
            derived["F_p"] = purcell_factor(cfg["tau_bulk"], report.values[tau_name])
            lines.append(f"F_p = {derived['F_p']:.4g} (tau_bulk {cfg['tau_bulk']:g} ps)")
        return report, derived, lines, hist.centers, "time_ps"
    if kind == "purcell-dip":
        e, tau, sig = qio.read_lifetime_scan(path)
        report = fit_purcell_dip(e, tau, sig, n_modes=cfg["n_modes"], max_iter=cfg["max_iter"])
        derived = {"F_p": purcell_factor(report.values["tau_off"], report.values["tau_on"])}
        lines = [f"{n} = {_fmt_pm(report, n)}" for n in report.names]
        lines.append(f"F_p = {derived['F_p']:.4g} (tau_off / tau_on)")
        order = np.argsort(e, kind="stable")
        return report, derived, lines, e[order], "energy_uev"
    if kind == "spatialmap":
        x, y, image = qio.read_spatial_map(path)
        report = fit_spatial_map(x, y, image, max_iter=cfg["max_iter"])
        derived = {"waist_um": report.values["waist"], "eta": report.values["depth"]}
        lines = [f"{n} = {_fmt_pm(report, n)}" for n in report.names]
        return report, derived, lines, np.arange(image.size, dtype=float), "pixel"
    raise UsageError(f"unknown fit kind {kind!r}")


def _fit_g2(path, cfg, out):
    hist = qio.read_g2(path)
    est = estimate_g2_zero(hist, window=cfg["window"] or None)
    payload = {"schema_version": 1, "kind": "g2", "g2_0": est.g2_0,
               "one_sigma": est.uncertainty, "central_area": est.central_area,
               "side_areas": est.side_areas.tolist(), "overlap_warning": est.overlap_warning,
               "single_photon": bool(est.is_single_photon), "tool_version": __version__,
               "config": cfg, "input": str(path)}
    (out / "g2_report.json").write_text(json.dumps(payload, indent=2, sort_keys=True))
    print(f"g2(0) = {est.g2_0:.4f} +- {est.uncertainty:.2g}")
    print(f"single photon (g2(0) < 0.25): {'yes' if est.is_single_photon else 'no'}")
    if est.overlap_warning:
        print("warning: neighbouring peaks overlap; the central area includes leakage")
    return EXIT_OK


def cmd_fit(args):
    defaults = dict(FIT_DEFAULTS[args.kind])
    cfg = resolve_config(args, defaults)
    found = qio.file_kind(args.input)
    if found not in _FIT_INPUT_KIND[args.kind]:
        raise qio.DataError(f"{args.input}: a {found or 'unknown'} file cannot be fitted "
                            f"with the {args.kind} model")
    out = _out_dir(args)
    if args.kind == "g2":
        return _fit_g2(args.input, cfg, out)
    report, derived, lines, x, x_name = _fit(args.kind, args.input, cfg, args.irf)
    stem = args.kind.replace("-", "_")
    (out / f"{stem}_report.json").write_text(report.to_json(
        kind=args.kind, derived=derived, tool_version=__version__, config=cfg,
        input=str(args.input)))
    res = report.residuals if report.residuals is not None else np.array([])
    if len(x) != len(res):
        x = np.arange(len(res), dtype=float)
        x_name = "index"
    qio.write_residuals(out / f"{stem}_residuals.csv", x, res, x_name, _meta(cfg))
    print(f"{args.kind} fit: chi2 = {report.chi2:.6g}, reduced chi2 = {report.reduced_chi2:.4g}, "
          f"iterations = {report.n_iter}")
    for line in lines:
        print("  " + line)
    if not report.converged:
        print("fit did not converge", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


# -- verify -------------------------------------------------------------------

def cmd_verify(args):
    cfg = resolve_config(args, VERIFY_DEFAULTS)
    params = SystemParams(cfg["g"], cfg["kappa"], cfg["gamma"], cfg["omega_c"], cfg["omega_qd"])
    half = cfg["span_kappa"] * cfg["kappa"]
    grid = np.linspace(cfg["omega_c"] - half, cfg["omega_c"] + half, cfg["n_points"])
    convention = "energy" if args.corrupt_kappa_convention else "field"
    t0 = time.perf_counter()
    try:
        res = equivalence_check(params, HilbertConfig(cfg["fock_cutoff"], detuning_grid=grid),
                                kappa_convention=convention)
    except OracleError as exc:
        print(f"verification could not run: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    elapsed = time.perf_counter() - t0
    tol = cfg["tolerance"]
    ok = res["max_rel_deviation"] < tol
    print(f"reflectance: analytic vs master equation, {len(grid)} points, "
          f"kappa convention {convention}")
    print(f"  max abs deviation = {res['max_abs_deviation']:.3e}")
    print(f"  max rel deviation = {res['max_rel_deviation']:.3e} (tolerance {tol:g})")
    print(f"  max intracavity photons = {res['max_photons']:.2e}, runtime {elapsed:.2f} s")
    print("PASS" if ok else "FAIL")
    if args.out:
        payload = {"schema_version": 1, "kind": "verify", "passed": bool(ok),
                   "max_abs_deviation": res["max_abs_deviation"],
                   "max_rel_deviation": res["max_rel_deviation"], "tolerance": tol,
                   "kappa_convention": convention, "tool_version": __version__, "config": cfg}
        (_out_dir(args) / "verify_report.json").write_text(json.dumps(payload, indent=2,
                                                                      sort_keys=True))
    return EXIT_OK if ok else EXIT_VERIFY


# -- parser -------------------------------------------------------------------

def _common(p, seed=True):
    p.add_argument("--config", metavar="PATH", help="flat key = value settings file")
    p.add_argument("--params", metavar="PATH", help="key = value parameter file (overrides --config)")
    p.add_argument("--out", metavar="DIR", help="output directory (default: current)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one setting; may be repeated")
    if seed:
        p.add_argument("--seed", type=int, metavar="N", help="random seed")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qdcavity",
        description="Simulate, fit and cross-check quantum-dot cavity QED measurements.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a seeded synthetic dataset")
    p.add_argument("target", choices=sorted(SIMULATE_DEFAULTS))
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a data file and write a JSON report")
    p.add_argument("kind", choices=sorted(FIT_DEFAULTS))
    p.add_argument("input", help="data file")
    p.add_argument("--irf", metavar="PATH", help="measured IRF histogram (lifetime fits)")
    _common(p, seed=False)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("verify", help="check the analytic reflectance against the master equation")
    _common(p, seed=False)
    p.add_argument("--tolerance", type=float, metavar="X", help="relative tolerance (default 1e-3)")
    p.add_argument("--corrupt-kappa-convention", action="store_true",
                   help="use an energy-rate collapse operator (negative control; must fail)")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"qdcavity: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (qio.DataError, FitError, ValueError) as exc:
        print(f"qdcavity: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
