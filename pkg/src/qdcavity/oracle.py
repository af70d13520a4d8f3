"""Truncated-Fock-space master-equation solver used to check the analytic models.

The emitter-cavity system is described in the frame rotating at the probe
energy ``w`` by

    H = (w_c - w) a^+ a + (w_qd - w) s^+ s + g (a^+ s + a s^+) + eps (a + a^+)

with collapse operators ``sqrt(2 kappa) a`` and ``sqrt(2 gamma) s``, so that
``kappa`` and ``gamma`` are field decay rates as in :mod:`qdcavity.cqed`.
The cavity is two-sided and symmetric: each mirror carries half of the field
decay rate, the probe enters through one of them and the transmitted field is
traced out.  Matching the input-output relation to the empty-cavity limit
fixes the reflected amplitude to

    r = 1 - i kappa <a> / eps

(the factor ``i`` is the phase of the ``eps (a + a^+)`` drive term).  For a
weak drive this reproduces the analytic reflection coefficient exactly.

Density matrices are vectorized row-major, ``vec(A rho B) = (A kron B^T) vec(rho)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .cqed import SystemParams, reflectance
from .units import HBAR_UEV_PS

__all__ = [
    "HilbertConfig",
    "DensityOperator",
    "OracleError",
    "WeakProbeError",
    "operators",
    "build_liouvillian",
    "steady_state",
    "steady_state_reflectivity",
    "reflectivity_spectrum",
    "decay_trace",
    "equivalence_check",
]

MAX_FOCK_CUTOFF = 30
WEAK_PROBE_PHOTONS = 0.01
# analytic values below this are treated as this when forming relative errors
REL_FLOOR = 1e-6


class OracleError(RuntimeError):
    """Raised when a solve fails (singular system, integrator failure)."""


class WeakProbeError(OracleError):
    """Raised when the steady-state photon number breaks the weak-probe limit."""


@dataclass
class HilbertConfig:
    """Truncation and drive settings.

    ``drive_amplitude`` defaults to ``1e-3 * kappa`` when left as ``None``,
    which keeps the intracavity photon number near 1e-6.
    """

    fock_cutoff: int = 3
    drive_amplitude: float | None = None
    detuning_grid: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if int(self.fock_cutoff) != self.fock_cutoff or self.fock_cutoff < 1:
            raise ValueError("fock_cutoff must be an integer >= 1")
        if self.fock_cutoff > MAX_FOCK_CUTOFF:
            raise ValueError(
                f"fock_cutoff={self.fock_cutoff} exceeds {MAX_FOCK_CUTOFF}; "
                "the dense Liouvillian would be too large")
        self.fock_cutoff = int(self.fock_cutoff)
        self.detuning_grid = np.asarray(self.detuning_grid, dtype=float)

    @property
    def dim(self):
        return 2 * (self.fock_cutoff + 1)

    def drive_for(self, params: SystemParams):
        if self.drive_amplitude is None:
            return 1e-3 * params.kappa
        return self.drive_amplitude


@dataclass
class DensityOperator:
    matrix: np.ndarray

    def trace(self):
        return np.trace(self.matrix)

    def expect(self, op):
        return np.trace(op @ self.matrix)

    def check(self, tol=1e-10, psd_tol=1e-8):
        """Raise :class:`OracleError` unless the state is a valid density matrix."""
        rho = self.matrix
        herm = np.max(np.abs(rho - rho.conj().T))
        if herm > tol:
            raise OracleError(f"density matrix not Hermitian (max deviation {herm:.2e})")
        tr = self.trace()
        if abs(tr - 1.0) > tol:
            raise OracleError(f"density matrix trace {tr.real:.12f} != 1")
        min_eig = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
        if min_eig < -psd_tol:
            raise OracleError(f"density matrix not positive (min eigenvalue {min_eig:.2e})")
        return True


def operators(fock_cutoff):
    """Return ``(a, sm)`` on the emitter (x) field space, emitter index first."""
    n = fock_cutoff + 1
    a_field = np.diag(np.sqrt(np.arange(1, n)), k=1).astype(complex)
    sm_emitter = np.array([[0, 1], [0, 0]], dtype=complex)
    a = np.kron(np.eye(2), a_field)
    sm = np.kron(sm_emitter, np.eye(n))
    return a, sm


def _dissipator(c):
    d = c.shape[0]
    eye = np.eye(d)
    cdc = c.conj().T @ c
    return np.kron(c, c.conj()) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T)


def build_liouvillian(params: SystemParams, cfg: HilbertConfig, probe_omega=None,
                      drive=None, kappa_convention="field"):
    """Dense Liouvillian acting on row-major vectorized density matrices.

    ``probe_omega`` sets the rotating frame; ``None`` uses the emitter energy
    (natural frame for undriven evolution).  ``drive`` overrides the
    configured amplitude; pass 0 for free decay.  ``kappa_convention="energy"``
    treats ``kappa`` as an energy decay rate in the cavity collapse operator.
    It only exists as a negative control and breaks agreement with the
    analytic model on purpose.
    """
    if probe_omega is None:
        probe_omega = params.omega_qd
    eps = cfg.drive_for(params) if drive is None else drive
    a, sm = operators(cfg.fock_cutoff)
    ad, sp = a.conj().T, sm.conj().T
    ham = ((params.omega_c - probe_omega) * ad @ a
           + (params.omega_qd - probe_omega) * sp @ sm
           + params.g * (ad @ sm + a @ sp)
           + eps * (a + ad))
    d = cfg.dim
    eye = np.eye(d)
    liou = -1j * (np.kron(ham, eye) - np.kron(eye, ham.T))
    if kappa_convention == "field":
        cavity_rate = 2.0 * params.kappa
    elif kappa_convention == "energy":
        cavity_rate = params.kappa
    else:
        raise ValueError(f"unknown kappa_convention {kappa_convention!r}")
    liou += _dissipator(np.sqrt(cavity_rate) * a)
    liou += _dissipator(np.sqrt(2.0 * params.gamma) * sm)
    return liou


def steady_state(liou, dim):
    """Solve ``L rho = 0`` with ``tr rho = 1`` replacing the first equation."""
    m = liou.copy()
    m[0, :] = np.eye(dim).reshape(-1)
    rhs = np.zeros(dim * dim, dtype=complex)
    rhs[0] = 1.0
    try:
        vec = np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError as exc:
        raise OracleError(f"singular steady-state system (cond={np.linalg.cond(m):.3e})") from exc
    if not np.all(np.isfinite(vec)):
        raise OracleError(f"non-finite steady state (cond={np.linalg.cond(m):.3e})")
    rho = vec.reshape(dim, dim)
    return DensityOperator(0.5 * (rho + rho.conj().T))


def _solve_point(params, cfg, omega, kappa_convention="field", check=True):
    liou = build_liouvillian(params, cfg, probe_omega=omega, kappa_convention=kappa_convention)
    state = steady_state(liou, cfg.dim)
    if check:
        state.check()
    a, _ = operators(cfg.fock_cutoff)
    photons = state.expect(a.conj().T @ a).real
    if photons >= WEAK_PROBE_PHOTONS:
        raise WeakProbeError(
            f"steady-state photon number {photons:.3e} >= {WEAK_PROBE_PHOTONS}; reduce the drive")
    eps = cfg.drive_for(params)
    r = 1.0 - 1j * params.kappa * state.expect(a) / eps
    return abs(r) ** 2, photons


def steady_state_reflectivity(params: SystemParams, cfg: HilbertConfig, omega,
                              kappa_convention="field"):
    """Reflectivity |r|^2 at one probe energy from the driven steady state."""
    return _solve_point(params, cfg, omega, kappa_convention)[0]


def reflectivity_spectrum(params: SystemParams, cfg: HilbertConfig, omegas=None,
                          kappa_convention="field"):
    """Oracle reflectivity on a grid.  Returns ``(reflectivity, photon_numbers)``."""
    omegas = cfg.detuning_grid if omegas is None else np.asarray(omegas, dtype=float)
    out = np.empty(len(omegas))
    photons = np.empty(len(omegas))
    for i, w in enumerate(omegas):
        out[i], photons[i] = _solve_point(params, cfg, w, kappa_convention)
    return out, photons


def decay_trace(params: SystemParams, t_grid, fock_cutoff=1, rtol=1e-9, atol=1e-12):
    """Excited-state population after preparing ``|e, 0>`` with no drive.

    ``t_grid`` is in ps and must be ascending; evolution starts at
    ``t_grid[0]``.  Integration uses an adaptive Dormand-Prince 8(5,3) scheme.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 1 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be a strictly ascending 1-D array")
    cfg = HilbertConfig(fock_cutoff=fock_cutoff)
    gen = build_liouvillian(params, cfg, probe_omega=params.omega_qd, drive=0.0) / HBAR_UEV_PS
    d = cfg.dim
    psi = np.zeros(d, dtype=complex)
    psi[cfg.fock_cutoff + 1] = 1.0  # emitter excited, field vacuum
    rho0 = np.outer(psi, psi.conj()).reshape(-1)
    if len(t_grid) == 1:
        return np.ones(1)

    sol = solve_ivp(lambda t, y: gen @ y, (t_grid[0], t_grid[-1]), rho0,
                    method="DOP853", t_eval=t_grid, rtol=rtol, atol=atol)
    if sol.status != 0:
        raise OracleError(f"time integration failed: {sol.message}")
    _, sm = operators(cfg.fock_cutoff)
    pop_op = (sm.conj().T @ sm).T.reshape(-1)
    # tr(P rho) = sum_ij P_ji rho_ij
    return np.real(pop_op @ sol.y)


def equivalence_check(params: SystemParams, cfg: HilbertConfig, kappa_convention="field"):
    """Compare the oracle with the analytic reflectance on ``cfg.detuning_grid``.

    Returns a dict with the per-point values and the maximum absolute and
    relative deviations.  Relative errors divide by ``max(R_analytic, REL_FLOOR)``
    so the exact zero of an empty-cavity dip does not blow them up.
    """
    omegas = cfg.detuning_grid
    oracle, photons = reflectivity_spectrum(params, cfg, omegas, kappa_convention)
    analytic = np.asarray(reflectance(omegas, params), dtype=float)
    abs_dev = np.abs(oracle - analytic)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel_dev = abs_dev / np.maximum(analytic, REL_FLOOR)
    return {
        "omega": omegas,
        "oracle": oracle,
        "analytic": analytic,
        "photons": photons,
        "max_abs_deviation": float(abs_dev.max()) if len(abs_dev) else 0.0,
        "max_rel_deviation": float(rel_dev.max()) if len(rel_dev) else 0.0,
        "max_photons": float(photons.max()) if len(photons) else 0.0,
    }
