"""Damped Gauss-Newton (Levenberg-Marquardt) least squares with bounds.

Bounds are handled by mapping every bounded parameter onto an unconstrained
internal variable (MINUIT-style transforms):

* two-sided  ``p = lo + (hi - lo) (sin t + 1) / 2``
* lower only ``p = lo - 1 + sqrt(t^2 + 1)``
* upper only ``p = hi + 1 - sqrt(t^2 + 1)``

The optimizer works in the internal variables.  The covariance is computed
from a Jacobian taken directly in the external parameters at the optimum,
so parameters sitting on a bound still get a finite uncertainty.

Weighting
---------
``uniform``         residual ``(y - m) / sigma`` (sigma = 1 if not given)
``poisson_neyman``  residual ``(y - m) / sqrt(max(y, 1))``
``poisson_mle``     signed Poisson deviance residuals; the sum of squares is
                    the deviance, so least squares gives the Poisson MLE
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "Parameter",
    "FitProblem",
    "FitReport",
    "FitError",
    "ProfileInterval",
    "least_squares",
    "numeric_jacobian",
    "profile_uncertainty",
    "REPORT_SCHEMA_VERSION",
]

REPORT_SCHEMA_VERSION = 1
WEIGHTS = ("uniform", "poisson_neyman", "poisson_mle")


class FitError(RuntimeError):
    """Unrecoverable fitting failure (bad problem definition, singular system)."""


@dataclass
class Parameter:
    name: str
    value: float
    lower: float = -math.inf
    upper: float = math.inf
    fixed: bool = False

    def __post_init__(self):
        self.value = float(self.value)
        if not self.lower <= self.value <= self.upper:
            raise FitError(
                f"initial value of {self.name!r} ({self.value}) outside bounds "
                f"[{self.lower}, {self.upper}]")
        if self.lower >= self.upper and not self.fixed:
            raise FitError(f"empty bound interval for {self.name!r}")


@dataclass
class FitProblem:
    """A least-squares problem.

    Either give ``model`` (parameter vector -> prediction, compared to
    ``data`` under the chosen ``weights``) or ``residual`` (parameter vector
    -> residual vector) for problems that are not curve fits.  Both callables
    receive the full parameter vector, fixed entries included, in the order
    of ``params``.
    """

    params: list[Parameter]
    model: Callable[[np.ndarray], np.ndarray] | None = None
    data: np.ndarray | None = None
    sigma: np.ndarray | None = None
    weights: str = "uniform"
    residual: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.weights not in WEIGHTS:
            raise FitError(f"unknown weights {self.weights!r}; expected one of {WEIGHTS}")
        if (self.model is None) == (self.residual is None):
            raise FitError("give exactly one of model or residual")
        if self.model is not None and self.data is None:
            raise FitError("a model fit needs data")
        if self.data is not None:
            self.data = np.asarray(self.data, dtype=float)
        if self.sigma is not None:
            self.sigma = np.broadcast_to(np.asarray(self.sigma, dtype=float), self.data.shape)
            if np.any(self.sigma <= 0):
                raise FitError("sigma must be positive")
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise FitError("parameter names must be unique")
        if not any(not p.fixed for p in self.params):
            raise FitError("at least one parameter must be free")

    @property
    def names(self):
        return [p.name for p in self.params]

    @property
    def free_names(self):
        return [p.name for p in self.params if not p.fixed]

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no parameter named {name!r}") from None

    def values(self):
        return np.array([p.value for p in self.params])

    def with_values(self, values) -> "FitProblem":
        params = [replace(p, value=float(np.clip(v, p.lower, p.upper)))
                  for p, v in zip(self.params, values)]
        return replace(self, params=params)

    def with_fixed(self, name, value) -> "FitProblem":
        params = [replace(p, value=float(value), fixed=True) if p.name == name else p
                  for p in self.params]
        return replace(self, params=params)

    def residuals(self, values):
        values = np.asarray(values, dtype=float)
        if self.residual is not None:
            return np.asarray(self.residual(values), dtype=float)
        pred = np.asarray(self.model(values), dtype=float)
        y = self.data
        if self.weights == "uniform":
            res = y - pred
            return res if self.sigma is None else res / self.sigma
        if self.weights == "poisson_neyman":
            return (y - pred) / np.sqrt(np.maximum(y, 1.0))
        mu = np.maximum(pred, 1e-12)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_term = np.where(y > 0, y * np.log(y / mu), 0.0)
        dev = np.maximum(2.0 * (mu - y + log_term), 0.0)
        return np.sign(y - mu) * np.sqrt(dev)

    def chi2(self, values):
        r = self.residuals(values)
        return float(r @ r)


@dataclass
class FitReport:
    names: list[str]
    values: dict[str, float]
    one_sigma: dict[str, float]
    covariance: np.ndarray
    chi2: float
    reduced_chi2: float
    n_iter: int
    converged: bool
    condition_number: float
    notes: list[str] = field(default_factory=list)
    residuals: np.ndarray | None = None
    free: list[str] = field(default_factory=list)
    n_data: int = 0
    covariance_scaled: bool = False

    @property
    def dof(self):
        return max(self.n_data - len(self.free), 0)

    def __getitem__(self, name):
        return self.values[name]

    def to_dict(self):
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "parameters": self.names,
            "free_parameters": self.free,
            "values": {k: float(v) for k, v in self.values.items()},
            "one_sigma": {k: float(v) for k, v in self.one_sigma.items()},
            "covariance": np.asarray(self.covariance, dtype=float).tolist(),
            "chi2": float(self.chi2),
            "reduced_chi2": float(self.reduced_chi2),
            "n_data": int(self.n_data),
            "n_iter": int(self.n_iter),
            "converged": bool(self.converged),
            "covariance_scaled": bool(self.covariance_scaled),
            "condition_number": float(self.condition_number),
            "notes": list(self.notes),
        }

    def to_json(self, **extra):
        payload = self.to_dict()
        payload.update(extra)
        return json.dumps(payload, indent=2, sort_keys=True, default=_json_default)

    @classmethod
    def from_dict(cls, d):
        return cls(
            names=list(d["parameters"]),
            values=dict(d["values"]),
            one_sigma=dict(d["one_sigma"]),
            covariance=np.asarray(d["covariance"], dtype=float),
            chi2=d["chi2"],
            reduced_chi2=d["reduced_chi2"],
            n_iter=d["n_iter"],
            converged=d["converged"],
            condition_number=d["condition_number"],
            notes=list(d.get("notes", [])),
            free=list(d.get("free_parameters", [])),
            n_data=d.get("n_data", 0),
            covariance_scaled=d.get("covariance_scaled", False),
        )


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# -- bound transforms ---------------------------------------------------------

def _to_internal(p: Parameter, value):
    lo, hi = p.lower, p.upper
    if math.isfinite(lo) and math.isfinite(hi):
        span = hi - lo
        # keep off the exact bound, where the transform has zero slope
        x = np.clip(2.0 * (value - lo) / span - 1.0, -1 + 1e-9, 1 - 1e-9)
        return math.asin(x)
    if math.isfinite(lo):
        return math.sqrt(max((value - lo + 1.0) ** 2 - 1.0, 1e-18))
    if math.isfinite(hi):
        return math.sqrt(max((hi - value + 1.0) ** 2 - 1.0, 1e-18))
    return value


def _to_external(p: Parameter, t):
    lo, hi = p.lower, p.upper
    if math.isfinite(lo) and math.isfinite(hi):
        return lo + (hi - lo) * (math.sin(t) + 1.0) / 2.0
    if math.isfinite(lo):
        return lo - 1.0 + math.sqrt(t * t + 1.0)
    if math.isfinite(hi):
        return hi + 1.0 - math.sqrt(t * t + 1.0)
    return t


def numeric_jacobian(fun, x, rel_step=1e-6):
    """Central-difference Jacobian of ``fun`` at ``x``.

    The step for component ``j`` is ``rel_step * max(|x_j|, 1)``.
    """
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fun(x), dtype=float)
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        h = rel_step * max(abs(x[j]), 1.0)
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (np.asarray(fun(xp)) - np.asarray(fun(xm))) / (xp[j] - xm[j])
    return jac


# -- driver -------------------------------------------------------------------

def least_squares(problem: FitProblem, max_iter=200, ftol=1e-10, gtol=1e-8, xtol=1e-14,
                  rel_step=1e-6, damping=1e-6, jacobian=None, absolute_sigma=None,
                  ) -> FitReport:
    """Minimize the sum of squared residuals of ``problem``.

    Parameters
    ----------
    problem : FitProblem
    max_iter : int
        Maximum number of damped Gauss-Newton iterations (accepted or
        rejected steps both count).  Reaching it returns a report with
        ``converged=False``.
    ftol, gtol, xtol : float
        Stop when the relative cost decrease of an accepted step is below
        ``ftol``, the infinity norm of the gradient is below ``gtol``, or the
        internal step is below ``xtol`` relative to the parameter norm.
    jacobian : callable, optional
        Analytic Jacobian of the residuals with respect to the *free*
        external parameters, called with the full parameter vector.
    absolute_sigma : bool, optional
        If False the covariance is scaled by the reduced chi-squared.  The
        default scales only uniform fits without ``sigma``.

    Returns
    -------
    FitReport
    """
    params = problem.params
    free_idx = [i for i, p in enumerate(params) if not p.fixed]
    free = [params[i] for i in free_idx]
    base = problem.values()
    if absolute_sigma is None:
        absolute_sigma = not (problem.weights == "uniform" and problem.sigma is None
                              and problem.residual is None)

    def external(theta):
        v = base.copy()
        for k, (i, p) in enumerate(zip(free_idx, free)):
            v[i] = _to_external(p, theta[k])
        return v

    def fun(theta):
        return problem.residuals(external(theta))

    theta = np.array([_to_internal(p, p.value) for p in free])
    r = fun(theta)
    if not np.all(np.isfinite(r)):
        raise FitError("residuals are not finite at the initial point")
    cost = 0.5 * float(r @ r)
    notes = []

    def jac_internal(theta):
        if jacobian is None:
            return numeric_jacobian(fun, theta, rel_step)
        v = external(theta)
        dpdt = np.array([(_to_external(p, t + 1e-7) - _to_external(p, t - 1e-7)) / 2e-7
                         for p, t in zip(free, theta)])
        return np.asarray(jacobian(v), dtype=float) * dpdt

    J = jac_internal(theta)
    mu = damping
    nu = 2.0
    converged = False
    n_iter = 0
    while n_iter < max_iter:
        A = J.T @ J
        grad = J.T @ r
        if np.max(np.abs(grad)) < gtol or cost == 0.0:
            converged = True
            notes.append("gradient below tolerance")
            break
        n_iter += 1
        diag = np.diag(A).copy()
        diag = np.maximum(diag, 1e-12 * max(diag.max(), 1e-300))
        for _ in range(30):
            try:
                step = np.linalg.solve(A + mu * np.diag(diag), -grad)
                if np.all(np.isfinite(step)):
                    break
            except np.linalg.LinAlgError:
                pass
            mu *= 10.0
        else:
            raise FitError(f"singular normal equations (condition number {np.linalg.cond(A):.3e})")
        if np.linalg.norm(step) <= xtol * (np.linalg.norm(theta) + xtol):
            converged = True
            notes.append("step below tolerance")
            break
        theta_new = theta + step
        r_new = fun(theta_new)
        cost_new = 0.5 * float(r_new @ r_new) if np.all(np.isfinite(r_new)) else math.inf
        predicted = -(step @ grad) - 0.5 * step @ A @ step
        rho = (cost - cost_new) / predicted if predicted > 0 else -1.0
        if rho > 0:
            decrease = cost - cost_new
            theta, r = theta_new, r_new
            cost = cost_new
            mu *= max(0.1, 1.0 - (2.0 * rho - 1.0) ** 3)
            nu = 2.0
            if decrease <= ftol * max(cost, 1e-300) or cost == 0.0:
                converged = True
                notes.append("relative cost change below tolerance")
                break
            J = jac_internal(theta)
        else:
            mu *= nu
            nu *= 2.0
            if mu > 1e20:
                converged = True
                notes.append("damping saturated; no further descent possible")
                break
    if not converged:
        notes.append(f"no convergence after {max_iter} iterations")

    values = external(theta)
    return _make_report(problem, values, free_idx, n_iter, converged, notes,
                        rel_step, absolute_sigma, jacobian)


def _make_report(problem, values, free_idx, n_iter, converged, notes, rel_step,
                 absolute_sigma, jacobian=None):
    names = problem.names
    r = problem.residuals(values)
    chi2 = float(r @ r)
    n_free = len(free_idx)
    dof = r.size - n_free
    red = chi2 / dof if dof > 0 else math.nan

    def fun_free(x):
        v = values.copy()
        v[free_idx] = x
        return problem.residuals(v)

    if jacobian is not None:
        J = np.asarray(jacobian(values), dtype=float)
    else:
        J = numeric_jacobian(fun_free, values[free_idx], rel_step)
    A = J.T @ J
    cond = float(np.linalg.cond(A)) if n_free else 0.0
    try:
        cov_free = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        cov_free = np.linalg.pinv(A)
        notes.append("normal matrix singular; covariance from pseudo-inverse")
    if not np.isfinite(cond) or cond > 1e14:
        notes.append(f"ill-conditioned normal matrix (cond={cond:.3e})")
    cov_free = 0.5 * (cov_free + cov_free.T)
    scaled = False
    if not absolute_sigma and dof > 0:
        cov_free = cov_free * red
        scaled = True
    cov = np.zeros((len(names), len(names)))
    cov[np.ix_(free_idx, free_idx)] = cov_free
    sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    for i, p in enumerate(problem.params):
        if not p.fixed and (np.isclose(values[i], p.lower) or np.isclose(values[i], p.upper)):
            notes.append(f"parameter {p.name!r} at bound")
    return FitReport(
        names=names,
        values={n: float(v) for n, v in zip(names, values)},
        one_sigma={n: float(s) for n, s in zip(names, sig)},
        covariance=cov,
        chi2=chi2,
        reduced_chi2=red,
        n_iter=n_iter,
        converged=converged,
        condition_number=cond,
        notes=notes,
        residuals=r,
        free=[names[i] for i in free_idx],
        n_data=int(r.size),
        covariance_scaled=scaled,
    )


@dataclass
class ProfileInterval:
    name: str
    best: float
    lower: float
    upper: float
    lower_limited: bool = False
    upper_limited: bool = False

    @property
    def sigma_minus(self):
        return self.best - self.lower

    @property
    def sigma_plus(self):
        return self.upper - self.best


def profile_uncertainty(problem: FitProblem, report: FitReport, param_name: str,
                        delta_chi2=1.0, max_doublings=30, **fit_options) -> ProfileInterval:
    """One-sigma interval of ``param_name`` from the profile chi-squared.

    The parameter is stepped away from its best value while all other free
    parameters are re-optimized, until the chi-squared has risen by
    ``delta_chi2`` (times the reduced chi-squared when the report covariance
    was scaled).  Intervals cut off by a parameter bound are flagged.
    """
    if not report.converged:
        raise FitError("profile needs a converged fit")
    idx = problem.index(param_name)
    par = problem.params[idx]
    if par.fixed:
        raise FitError(f"parameter {param_name!r} is fixed and cannot be profiled")
    if len(report.free) < 1:
        raise FitError("nothing to profile")
    best_values = np.array([report.values[n] for n in problem.names])
    best = best_values[idx]
    threshold = delta_chi2 * (report.reduced_chi2 if report.covariance_scaled else 1.0)
    chi2_min = report.chi2
    start = problem.with_values(best_values)
    only_one_free = len(report.free) == 1

    def excess(v):
        fixed = start.with_fixed(param_name, v)
        if only_one_free:
            c2 = fixed.chi2(fixed.values())
        else:
            c2 = least_squares(fixed, **fit_options).chi2
        return c2 - chi2_min - threshold

    step = report.one_sigma.get(param_name, 0.0)
    if not np.isfinite(step) or step <= 0:
        step = 1e-3 * max(abs(best), 1e-6)

    def search(direction):
        bound = par.upper if direction > 0 else par.lower
        lo_v, h = best, step
        for _ in range(max_doublings):
            v = best + direction * h
            if (direction > 0 and v >= bound) or (direction < 0 and v <= bound):
                if excess(bound) < 0:
                    return bound, True
                v = bound
            if excess(v) >= 0:
                return brentq(excess, min(lo_v, v), max(lo_v, v), xtol=1e-10 * max(abs(v), 1e-12)), False
            lo_v = v
            h *= 2.0
        raise FitError(f"profile of {param_name!r} did not reach the threshold")

    upper, up_lim = search(+1)
    lower, lo_lim = search(-1)
    return ProfileInterval(param_name, best, lower, upper, lo_lim, up_lim)
