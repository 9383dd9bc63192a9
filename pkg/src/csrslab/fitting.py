"""
Weighted least-squares fits used in the analysis chain.

``least_squares`` wraps a bounded trust-region solver and reports parameter
covariance from the Jacobian at the optimum. Models that are linear in their
parameters (center-vs-pressure line, Dicke width curve, fixed-period sine)
are solved exactly by weighted linear least squares instead of iterating.
"""

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import optimize

from .errors import FitInitError

STATUSES = ("converged", "max-iterations", "singular")


class WeightedPoint(NamedTuple):
    x: float
    y: float
    sigma: float


@dataclass
class FitResult:
    names: tuple
    values: np.ndarray
    covariance: np.ndarray
    chi2_red: float
    status: str = "converged"
    iterations: int = 0
    gradient_norm: float = 0.0
    flags: list = field(default_factory=list)

    @property
    def errors(self):
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    @property
    def converged(self):
        return self.status == "converged"

    def __getitem__(self, name):
        return self.values[self.names.index(name)]

    def error(self, name):
        return self.errors[self.names.index(name)]

    def as_dict(self):
        return {
            "parameters": {n: float(v) for n, v in zip(self.names, self.values)},
            "uncertainties": {n: float(e) for n, e in zip(self.names, self.errors)},
            "covariance": self.covariance.tolist(),
            "chi2_red": float(self.chi2_red),
            "status": self.status,
            "iterations": int(self.iterations),
            "flags": list(self.flags),
        }


def _arrays(x, y=None, sigma=None):
    if y is None:
        # sequence of WeightedPoint
        pts = list(x)
        x = [p.x for p in pts]
        y = [p.y for p in pts]
        sigma = [p.sigma for p in pts]
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D arrays of equal length")
    if sigma is None:
        sigma = np.ones_like(y)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), y.shape).copy()
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.all(np.isfinite(sigma))):
        raise ValueError("non-finite input data")
    if np.any(sigma <= 0):
        raise ValueError("uncertainties must be positive")
    return x, y, sigma


def count_sigma(counts):
    """sqrt(counts) with a one-count floor for empty bins."""
    return np.sqrt(np.maximum(np.asarray(counts, dtype=float), 1.0))


def _covariance(jac):
    """(J^T J)^-1 via SVD; returns (cov, singular)."""
    _, s, vt = np.linalg.svd(jac, full_matrices=False)
    tol = np.finfo(float).eps * max(jac.shape) * (s[0] if s.size else 0.0)
    singular = s.size == 0 or s[-1] <= tol
    inv = np.where(s > tol, 1.0 / np.where(s > tol, s, 1.0) ** 2, 0.0)
    cov = (vt.T * inv) @ vt
    return 0.5 * (cov + cov.T), bool(singular)


def least_squares(model, x, y, sigma, p0, jac=None, bounds=(-np.inf, np.inf), names=None,
                  max_iter=200, absolute_sigma=True):
    """Minimize sum(((model(x, p) - y) / sigma)^2) from ``p0``.

    ``jac(x, p)`` returns d model / d p with shape (n, m); without it a
    finite-difference Jacobian is used.
    """
    x, y, sigma = _arrays(x, y, sigma)
    p0 = np.asarray(p0, dtype=float)
    m = p0.size
    names = tuple(names) if names else tuple(f"p{i}" for i in range(m))
    if x.size < m:
        raise ValueError(f"{x.size} points cannot determine {m} parameters")
    if not np.all(np.isfinite(model(x, p0))):
        raise ValueError("model returned non-finite values at the initial guess")

    def fun(p):
        return (model(x, p) - y) / sigma

    jac_fun = (lambda p: jac(x, p) / sigma[:, None]) if jac is not None else "2-point"
    res = optimize.least_squares(fun, p0, jac=jac_fun, bounds=bounds, method="trf", x_scale="jac",
                                 ftol=1e-12, xtol=1e-12, gtol=1e-8, max_nfev=max_iter)
    if not np.all(np.isfinite(res.fun)):
        raise ValueError("model produced non-finite residuals during the fit")
    cov, singular = _covariance(res.jac)
    dof = x.size - m
    chi2 = float(2.0 * res.cost)
    chi2_red = chi2 / dof if dof > 0 else float("nan")
    if not absolute_sigma and dof > 0:
        cov = cov * chi2_red
    if singular:
        status = "singular"
    elif res.status == 0:
        status = "max-iterations"
    else:
        status = "converged"
    return FitResult(names, res.x, cov, chi2_red, status, int(res.nfev), float(res.optimality))


def linear_least_squares(design, y, sigma, names, absolute_sigma=True):
    """Exact weighted fit of y = design @ p."""
    design = np.asarray(design, dtype=float)
    w = 1.0 / np.asarray(sigma, dtype=float)
    a = design * w[:, None]
    b = y * w
    cov, singular = _covariance(a)
    m = design.shape[1]
    if singular:
        nan = np.full(m, np.nan)
        return FitResult(tuple(names), nan, np.full((m, m), np.nan), float("nan"), "singular", 1)
    p = cov @ (a.T @ b)
    r = a @ p - b
    dof = y.size - m
    chi2_red = float(r @ r) / dof if dof > 0 else float("nan")
    if not absolute_sigma and dof > 0:
        cov = cov * chi2_red
    grad = float(np.max(np.abs(a.T @ r))) if r.size else 0.0
    return FitResult(tuple(names), p, cov, chi2_red, "converged", 1, grad)


# --- Lorentzian ---------------------------------------------------------------

LORENTZ_NAMES = ("center", "fwhm", "amplitude", "offset")


def lorentzian(x, center, fwhm, amplitude, offset=0.0):
    u = 2.0 * (np.asarray(x, dtype=float) - center) / fwhm
    return offset + amplitude / (1.0 + u * u)


def _lorentz_model(x, p):
    return lorentzian(x, *p)


def _lorentz_jac(x, p):
    c, w, a, _ = p
    u = 2.0 * (x - c) / w
    lz = 1.0 / (1.0 + u * u)
    return np.column_stack([a * 4.0 * u * lz * lz / w, a * 2.0 * u * u * lz * lz / w, lz, np.ones_like(x)])


def _half_width_guess(x, y, i, half):
    def crossing(step):
        j = i
        while 0 <= j + step < len(y):
            k = j + step
            if y[k] <= half:
                # linear interpolation between j (above) and k (below)
                t = (y[j] - half) / (y[j] - y[k]) if y[j] != y[k] else 0.0
                return abs(x[j] + t * (x[k] - x[j]) - x[i])
            j = k
        return None

    left, right = crossing(-1), crossing(+1)
    if left is None and right is None:
        return float(np.ptp(x))
    if left is None or right is None:
        return 2.0 * (left if left is not None else right)
    return left + right


def fit_lorentzian(x, y=None, sigma=None):
    """Fit offset + amplitude / (1 + (2(x - center)/fwhm)^2).

    Starts from center = x at the first maximum, offset = min(y),
    amplitude = max - min, FWHM from the half-maximum crossings.
    ``sigma`` defaults to count statistics.
    """
    if y is None:
        x, y, sigma = _arrays(x)
    else:
        if sigma is None:
            sigma = count_sigma(y)
        x, y, sigma = _arrays(x, y, sigma)
    if x.size < 5:
        raise FitInitError("a Lorentzian fit needs at least 5 points")
    order = np.argsort(x, kind="stable")
    x, y, sigma = x[order], y[order], sigma[order]
    i = int(np.argmax(y))  # first index on plateaus
    lo, hi = float(np.min(y)), float(np.max(y))
    if hi == lo:
        raise FitInitError("flat data: no peak to fit")
    if i == 0 or i == len(y) - 1:
        raise FitInitError("maximum at the edge of the scan: data look monotone, no peak")
    x0 = x[i]
    xs = x - x0  # work relative to the peak so results are translation invariant
    fwhm0 = _half_width_guess(xs, y, i, lo + 0.5 * (hi - lo))
    p0 = [0.0, max(fwhm0, 1e-9 * max(np.ptp(xs), 1.0)), hi - lo, lo]
    bounds = ([-np.inf, 0.0, 0.0, -np.inf], [np.inf, np.inf, np.inf, np.inf])
    fit = least_squares(_lorentz_model, xs, y, sigma, p0, jac=_lorentz_jac, bounds=bounds,
                        names=LORENTZ_NAMES)
    fit.values = fit.values.copy()
    fit.values[0] += x0
    return fit


# --- pressure dependence --------------------------------------------------------

def fit_center_vs_pressure(pressures, centers_thz=None, sigma_mhz=None):
    """Weighted straight line through resonance centers.

    Returns ``slope`` in MHz/bar (the collisional shift) and ``intercept``
    in THz (the zero-pressure frequency). Covariance is in those units.
    """
    if centers_thz is None:
        p, c, s = _arrays(pressures)
    else:
        p, c, s = _arrays(pressures, centers_thz, 1.0 if sigma_mhz is None else sigma_mhz)
    names = ("slope", "intercept")
    if p.size < 2 or np.unique(p).size < 2:
        return FitResult(names, np.full(2, np.nan), np.full((2, 2), np.nan), float("nan"), "singular", 0)
    ref = float(np.mean(c))
    y = (c - ref) * 1e6  # MHz
    fit = linear_least_squares(np.column_stack([p, np.ones_like(p)]), y, s, names)
    if fit.status != "converged":
        return fit
    scale = np.diag([1.0, 1e-6])
    fit.values = np.array([fit.values[0], ref + fit.values[1] * 1e-6])
    fit.covariance = scale @ fit.covariance @ scale
    return fit


def fit_dicke_width(pressures, widths=None, sigma=None, rel_flag=0.5):
    """Fit Gamma(p) = A/p + B*p to linewidths (MHz) vs pressure (bar)."""
    if widths is None:
        p, w, s = _arrays(pressures)
    else:
        p, w, s = _arrays(pressures, widths, 1.0 if sigma is None else sigma)
    if np.any(w <= 0) or np.any(p <= 0):
        raise ValueError("widths and pressures must be positive")
    names = ("A", "B")
    if np.unique(p).size < 3:
        raise ValueError("Dicke width fit needs at least three distinct pressures")
    fit = linear_least_squares(np.column_stack([1.0 / p, p]), w, s, names)
    if fit.status != "converged":
        return fit
    a, b = fit.values
    if a > 0 and b > 0 and not np.any(p < np.sqrt(a / b)):
        fit.flags.append("no-point-below-width-minimum")
    if not abs(fit.error("A")) < rel_flag * abs(a):
        fit.flags.append("A-poorly-constrained")
    return fit


# --- sine ------------------------------------------------------------------------

SINE_NAMES = ("amplitude", "phase", "offset")


def sine(theta, amplitude, phase, offset, period):
    return offset + amplitude * np.sin(2.0 * np.pi * (np.asarray(theta, dtype=float) - phase) / period)


def fit_sine(angles, counts, period, sigma=None):
    """Fit offset + amplitude*sin(2*pi*(theta - phase)/period) with a fixed period.

    Amplitude is nonnegative; phase is returned in [0, period).
    """
    theta, y, s = _arrays(angles, counts, count_sigma(counts) if sigma is None else sigma)
    if theta.size < 5:
        raise ValueError("a sine fit needs at least 5 angles")
    w = 2.0 * np.pi / period
    design = np.column_stack([np.sin(w * theta), np.cos(w * theta), np.ones_like(theta)])
    lin = linear_least_squares(design, y, s, ("a", "b", "offset"))
    if lin.status != "converged":
        return FitResult(SINE_NAMES, lin.values, lin.covariance, lin.chi2_red, lin.status, 1)
    a, b, c = lin.values
    amp = float(np.hypot(a, b))
    # a sin(wt) + b cos(wt) = amp sin(wt + psi) = amp sin(w(t - phase))
    psi = np.arctan2(b, a)
    phase = float((-psi / w) % period)
    if np.isclose(phase, period):
        phase = 0.0
    if amp > 0:
        t = np.array([
            [a / amp, b / amp, 0.0],
            [b / (w * amp**2), -a / (w * amp**2), 0.0],
            [0.0, 0.0, 1.0],
        ])
    else:
        t = np.diag([1.0, 0.0, 1.0])
    cov = t @ lin.covariance @ t.T
    fit = FitResult(SINE_NAMES, np.array([amp, phase, c]), 0.5 * (cov + cov.T), lin.chi2_red,
                    "converged", 1, lin.gradient_norm)
    # a grid 0, 5, ..., 85 samples a full 90 deg period
    steps = np.diff(np.unique(theta))
    span = np.ptp(theta) + (steps.min() if steps.size else 0.0)
    if span < period * (1.0 - 1e-9):
        fit.flags.append("span-below-period")
        warnings.warn(f"angle span {span:g} deg is shorter than the {period:g} deg period", stacklevel=2)
    return fit


def phase_difference(phase1, phase2, period):
    """Signed phase difference wrapped to (-period/2, period/2]."""
    d = (phase2 - phase1) % period
    return d - period if d > period / 2 else d
