"""Bias tuning of a quantum-dot transition: charge plateaus and Stark shifts.

The transition energy at bias ``V`` is a quadratic Stark curve plus a
constant binding shift that depends on which charge plateau ``V`` falls in.
Charge transitions are sharp steps.  Stark coefficients are per volt of
applied bias; converting to electric field needs a lever arm and is not done
here.

Default numbers in this module (thresholds near 18 V, a 6 meV trion
shift) only set the scale of synthetic data.  Real Stark coefficients must
come from a fit to measured maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "ChargePlateauModel",
    "StarkModel",
    "ModePair",
    "Crossing",
    "BiasMap",
    "transition_energy",
    "find_resonance_crossings",
    "simulate_bias_map",
]


@dataclass(frozen=True)
class ChargePlateauModel:
    """Charge state per bias interval.

    ``states[i]`` holds on ``[thresholds[i-1], thresholds[i])`` with open
    ends at both sides, so there is one more state than thresholds.
    ``binding_shifts`` are energy offsets (ueV) relative to the neutral
    exciton.
    """

    thresholds: tuple[float, ...] = (18.0,)
    states: tuple[str, ...] = ("X0", "X-")
    binding_shifts: tuple[float, ...] = (0.0, -6000.0)

    def __post_init__(self):
        th = tuple(float(t) for t in self.thresholds)
        object.__setattr__(self, "thresholds", th)
        if any(b <= a for a, b in zip(th, th[1:])):
            raise ValueError("thresholds must be strictly ascending")
        if len(self.states) != len(th) + 1 or len(self.binding_shifts) != len(self.states):
            raise ValueError("need one state and one binding shift per interval")
        for s, shift in zip(self.states, self.binding_shifts):
            if s == "X-" and not shift < 0:
                raise ValueError("the X- binding shift must be negative (lower energy)")

    def interval_index(self, bias):
        return int(np.searchsorted(self.thresholds, bias, side="right"))

    def interval(self, i):
        lo = self.thresholds[i - 1] if i > 0 else -math.inf
        hi = self.thresholds[i] if i < len(self.thresholds) else math.inf
        return lo, hi

    def state(self, bias):
        return self.states[self.interval_index(bias)]

    def shift(self, bias):
        return self.binding_shifts[self.interval_index(bias)]


@dataclass(frozen=True)
class StarkModel:
    """``E(V) = e0 + p (V - v_ref) + beta (V - v_ref)^2`` on ``[v_min, v_max]``."""

    e0: float
    p: float = 0.0
    beta: float = 0.0
    v_ref: float = 0.0
    v_min: float = -math.inf
    v_max: float = math.inf

    def energy(self, bias):
        x = np.asarray(bias, dtype=float) - self.v_ref
        return self.e0 + self.p * x + self.beta * x * x

    def check(self, bias):
        b = np.asarray(bias, dtype=float)
        if np.any(b < self.v_min) or np.any(b > self.v_max):
            raise ValueError(f"bias outside the Stark model validity range "
                             f"[{self.v_min}, {self.v_max}] V")


@dataclass(frozen=True)
class ModePair:
    """Two orthogonally polarized cavity modes (energies and field decay rates in ueV)."""

    e_h: float
    e_v: float
    kappa_h: float
    kappa_v: float

    @property
    def splitting(self):
        return abs(self.e_h - self.e_v)

    @property
    def resolvable(self):
        return self.splitting >= 2.0 * max(self.kappa_h, self.kappa_v)

    def modes(self):
        return (("H", self.e_h, self.kappa_h), ("V", self.e_v, self.kappa_v))


@dataclass(frozen=True)
class Crossing:
    """Bias at which the transition meets a mode.

    ``span`` is set, and ``bias`` is its midpoint, when the transition
    energy equals the mode energy over a whole interval (flat plateau).
    """

    bias: float
    mode: str
    state: str
    span: tuple[float, float] | None = None

    @property
    def degenerate(self):
        return self.span is not None


def transition_energy(bias, charge: ChargePlateauModel, stark: StarkModel):
    """Charge state label and transition energy (ueV) at ``bias``."""
    stark.check(bias)
    return charge.state(bias), float(stark.energy(bias)) + charge.shift(bias)


def _quadratic_roots(a, b, c):
    """Real roots of ``a x^2 + b x + c`` in a cancellation-free form."""
    if a == 0.0:
        if b == 0.0:
            return None if c == 0.0 else []
        return [-c / b]
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return []
    sq = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sq, b))
    roots = {q / a}
    if q != 0.0:
        roots.add(c / q)
    return sorted(roots)


def _polish(x, a, b, c):
    for _ in range(3):
        d = 2.0 * a * x + b
        if d == 0.0:
            break
        x = x - (a * x * x + b * x + c) / d
    return x


def find_resonance_crossings(stark: StarkModel, charge: ChargePlateauModel,
                             modes: ModePair | Sequence[tuple[str, float]], interval):
    """Biases in ``interval`` where the transition is resonant with a mode.

    ``modes`` is a :class:`ModePair` or a sequence of ``(label, energy)``.
    Roots of the quadratic Stark curve are kept only if they lie in the
    plateau whose binding shift was used.  The result is sorted by bias;
    an empty list means no crossing.
    """
    v_lo, v_hi = max(interval[0], stark.v_min), min(interval[1], stark.v_max)
    if isinstance(modes, ModePair):
        mode_list = [(label, e) for label, e, _ in modes.modes()]
    else:
        mode_list = list(modes)
    out = []
    for label, e_mode in mode_list:
        for i, (state, shift) in enumerate(zip(charge.states, charge.binding_shifts)):
            p_lo, p_hi = charge.interval(i)
            lo, hi = max(v_lo, p_lo), min(v_hi, p_hi)
            if lo > hi:
                continue
            a, b, c = stark.beta, stark.p, stark.e0 + shift - e_mode
            roots = _quadratic_roots(a, b, c)
            if roots is None:
                out.append(Crossing(0.5 * (lo + hi), label, state, span=(lo, hi)))
                continue
            for x in roots:
                v = stark.v_ref + _polish(x, a, b, c)
                # plateau intervals are closed on the left, open on the right
                if lo <= v <= hi and (v < p_hi or p_hi == math.inf):
                    out.append(Crossing(v, label, state))
    out.sort(key=lambda c: (c.bias, c.mode))
    return out


@dataclass
class BiasMap:
    bias_grid: np.ndarray
    energy_grid: np.ndarray
    intensity: np.ndarray  # shape (n_bias, n_energy)
    qd_energy: np.ndarray
    states: list[str]
    enhancement: np.ndarray


def simulate_bias_map(stark: StarkModel, charge: ChargePlateauModel, modes: ModePair,
                      bias_grid, energy_grid, qd_linewidth=30.0, mode_intensity=0.2,
                      purcell_boost=2.0):
    """Synthetic photoluminescence map against bias (rows) and energy (columns).

    The QD line is a Lorentzian of half width ``qd_linewidth`` (ueV), constant
    across the tuning range, centred on :func:`transition_energy`.  Its peak
    height is ``1 + purcell_boost * L`` where ``L`` is a Lorentzian in the
    QD-mode detuning with the mode's ``kappa`` as half width, so the line
    brightens at each crossing.  Mode lines are fixed-energy Lorentzians of
    height ``mode_intensity``.
    """
    bias_grid = np.asarray(bias_grid, dtype=float)
    energy_grid = np.asarray(energy_grid, dtype=float)
    if np.any(np.diff(bias_grid) <= 0) or np.any(np.diff(energy_grid) <= 0):
        raise ValueError("grids must be strictly ascending")
    states, e_qd = [], np.empty(len(bias_grid))
    for i, v in enumerate(bias_grid):
        s, e = transition_energy(v, charge, stark)
        states.append(s)
        e_qd[i] = e
    enh = np.ones(len(bias_grid))
    mode_lines = np.zeros(len(energy_grid))
    for _, e_mode, kappa in modes.modes():
        enh += purcell_boost * kappa**2 / (kappa**2 + (e_qd - e_mode) ** 2)
        mode_lines += mode_intensity * kappa**2 / (kappa**2 + (energy_grid - e_mode) ** 2)
    de = energy_grid[None, :] - e_qd[:, None]
    qd = enh[:, None] * qd_linewidth**2 / (qd_linewidth**2 + de**2)
    return BiasMap(bias_grid, energy_grid, qd + mode_lines[None, :], e_qd, states, enh)
