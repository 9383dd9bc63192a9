"""
Phase mismatch and conversion efficiency of the resonant four-wave-mixing
process in the undepleted-pump regime.

Two beam-overlap kernels are available for the focused-Gaussian geometry
with a common confocal parameter ``b`` and focus at the cell center:

``"projected"`` (default)
    Projection of the driven polarization onto the lowest-order output mode.
    With one conjugated pump field the product of mode envelopes collapses to
    ``1 / (1 + (2z/b)^2)``, symmetric in the sign of the mismatch.
``"single-pole"``
    ``1 / (1 + 2iz/b)``, the kernel of an unprojected driving term. Kept for
    comparison; it favors one sign of ``delta_k`` only.

Both reduce to ``L * sinc(delta_k L / 2)`` for ``b >> L``.
"""

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, optimize
from scipy.constants import c as C_LIGHT

from .errors import CalibrationError, DomainError, NumericalError
from .gas import GasState, index_excess
from .lineshape import ProcessKind, raman_response

KERNELS = ("projected", "single-pole")


@dataclass(frozen=True)
class ProcessConfig:
    kind: ProcessKind = ProcessKind.CSRS
    signal_nm: float = 863.0
    pump_hi_nm: float = 938.0
    pump_lo_nm: float = 1538.0
    pump_hi_w: float = 0.65
    pump_lo_w: float = 15.0
    signal_w: float = 1.0e-6
    waist_um: float = 80.0
    length_mm: float = 140.0
    scale: float = 1.0
    kernel: str = "projected"

    def __post_init__(self):
        object.__setattr__(self, "kind", ProcessKind(self.kind))
        for name in ("pump_hi_w", "pump_lo_w", "signal_w"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be nonnegative")
        for name in ("signal_nm", "pump_hi_nm", "pump_lo_nm", "waist_um", "length_mm"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.kernel not in KERNELS:
            raise DomainError(f"unknown overlap kernel {self.kernel!r}; expected one of {KERNELS}")
        lam = converted_wavelength(self)
        if not 500.0 <= lam <= 1700.0:
            raise DomainError(f"converted wavelength {lam:.1f} nm outside [500, 1700] nm")

    def replace(self, **changes):
        return replace(self, **changes)

    @property
    def length_m(self):
        return self.length_mm * 1e-3


@dataclass(frozen=True)
class EfficiencyPoint:
    pressure: float
    internal: float
    external: float = float("nan")


@dataclass
class EfficiencyScan:
    points: list
    delta_k: np.ndarray
    normalized: np.ndarray = field(default=None)

    @property
    def pressures(self):
        return np.array([pt.pressure for pt in self.points])

    @property
    def internal(self):
        return np.array([pt.internal for pt in self.points])

    @property
    def external(self):
        return np.array([pt.external for pt in self.points])


def _nu(wavelength_nm):
    return C_LIGHT / (wavelength_nm * 1e-9) * 1e-12


def pump_difference(config):
    """Pump difference frequency in THz."""
    return _nu(config.pump_hi_nm) - _nu(config.pump_lo_nm)


def converted_frequency(config):
    """Frequency of the generated field in THz (energy conservation)."""
    nu_s = _nu(config.signal_nm)
    if ProcessKind(config.kind) is ProcessKind.CARS:
        return nu_s + pump_difference(config)
    return nu_s - pump_difference(config)


def converted_wavelength(config):
    return C_LIGHT / (converted_frequency(config) * 1e12) * 1e9


def wavelengths(config):
    """(signal, pump_hi, pump_lo, converted) in nm."""
    return (config.signal_nm, config.pump_hi_nm, config.pump_lo_nm, converted_wavelength(config))


def confocal_parameter(config):
    """Common confocal parameter 2*pi*w0^2/lambda at the mean of the four wavelengths, in m."""
    lam = np.mean(wavelengths(config)) * 1e-9
    return 2.0 * np.pi * (config.waist_um * 1e-6) ** 2 / lam


def phase_mismatch(config, state, model=None):
    """Collinear wavevector mismatch in rad/m.

    CARS: k_s + k_hi - k_lo - k_c, CSRS: k_s + k_lo - k_hi - k_c.
    """
    # vacuum parts 2*pi/lambda cancel by energy conservation; summing only the
    # excess-index parts avoids cancelling four ~1e7 rad/m terms
    signs = (1, 1, -1, -1) if ProcessKind(config.kind) is ProcessKind.CARS else (1, -1, 1, -1)
    total = 0.0
    for sign, lam in zip(signs, wavelengths(config)):
        total += sign * 2.0 * np.pi * index_excess(lam, state, model) / (lam * 1e-9)
    return float(total)


def _quad_weighted(f, a, b, weight, dk, epsabs):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            if dk == 0.0:
                if weight == "sin":
                    return 0.0, 0.0
                val, err = integrate.quad(f, a, b, epsabs=epsabs, epsrel=1e-11, limit=200)
            else:
                val, err = integrate.quad(
                    f, a, b, weight=weight, wvar=dk, epsabs=epsabs, epsrel=1e-11, limit=400
                )
        except integrate.IntegrationWarning as exc:
            raise NumericalError(
                f"overlap quadrature failed ({weight}, delta_k={dk!r} rad/m, interval [{a}, {b}]): {exc}"
            ) from exc
    return val, err


def gaussian_overlap(delta_k, b, length, kernel="projected"):
    """Longitudinal overlap integral J over a cell of ``length`` m centered on the focus.

    J = integral over z in [-L/2, L/2] of exp(i*delta_k*z) * kernel(z), in m.
    """
    if not b > 0 or not length > 0:
        raise DomainError("confocal parameter and length must be positive")
    if kernel not in KERNELS:
        raise DomainError(f"unknown overlap kernel {kernel!r}")
    dk = float(delta_k)
    lo, hi = -0.5 * length, 0.5 * length
    floor = 1e-13 * length

    def even(z):
        return 1.0 / (1.0 + (2.0 * z / b) ** 2)

    def odd(z):
        return -(2.0 * z / b) / (1.0 + (2.0 * z / b) ** 2)

    # kernel = even + i*odd, exp(i dk z) = cos + i sin
    gc, e1 = _quad_weighted(even, lo, hi, "cos", dk, floor)
    gs, e2 = _quad_weighted(even, lo, hi, "sin", dk, floor)
    re, im, err = gc, gs, e1 + e2
    if kernel == "single-pole":
        hc, e3 = _quad_weighted(odd, lo, hi, "cos", dk, floor)
        hs, e4 = _quad_weighted(odd, lo, hi, "sin", dk, floor)
        re -= hs
        im += hc
        err += e3 + e4
    value = complex(re, im)
    if err > max(1e-6 * abs(value), 10 * floor):
        raise NumericalError(
            f"overlap quadrature error {err:.3g} exceeds 1e-6*|J| (|J|={abs(value):.3g}, "
            f"delta_k={dk!r} rad/m, b={b!r} m, L={length!r} m)"
        )
    return value


def plane_wave_overlap(delta_k, length):
    """L * sinc(delta_k L / 2), the b -> infinity limit of ``gaussian_overlap``."""
    return length * np.sinc(delta_k * length / (2.0 * np.pi))


def _response(config, state, line, detuning, model):
    chi = raman_response(line, state.pressure, detuning, state.temperature)
    dk = phase_mismatch(config, state, model)
    j = gaussian_overlap(dk, confocal_parameter(config), config.length_m, config.kernel)
    return config.pump_hi_w * config.pump_lo_w * abs(chi) ** 2 * abs(j) ** 2


def internal_efficiency(config, state, line, detuning=0.0, model=None):
    """Converted-to-input photon ratio inside the cell, clamped to [0, 1].

    ``config.scale`` carries the calibration constant; see ``calibrate_scale``.
    """
    if not state.pressure > 0:
        raise DomainError("internal efficiency needs a positive pressure")
    eta = config.scale * _response(config, state, line, detuning, model)
    return float(min(max(eta, 0.0), 1.0))


def external_efficiency(internal, chain=()):
    """Apply transmission and detection factors. ``chain`` is a mapping or a sequence."""
    factors = list(chain.values()) if hasattr(chain, "values") else list(chain)
    for f in factors:
        if not 0.0 <= f <= 1.0:
            raise DomainError(f"chain factor {f} outside [0, 1]")
    return float(internal * np.prod(factors)) if factors else float(internal)


def calibrate_scale(config, line, target, model=None, temperature=None):
    """Scale constant K making the on-resonance efficiency hit ``target`` exactly."""
    if not target.internal > 0:
        raise CalibrationError("calibration target efficiency must be positive")
    state = GasState(target.pressure, temperature) if temperature else GasState(target.pressure)
    response = _response(config, state, line, 0.0, model)
    if not response > 0 or not np.isfinite(response):
        raise CalibrationError(
            f"model response is {response!r} at {target.pressure} bar; cannot anchor efficiency"
        )
    return target.internal / response


def efficiency_scan(config, line, pressures, chain=(), detuning=0.0, model=None, temperature=None):
    """On-resonance efficiency curve over a pressure grid plus a copy normalized to its maximum."""
    pressures = [float(p) for p in pressures]
    if not pressures:
        raise DomainError("pressure grid is empty")
    points, dks = [], []
    for p in pressures:
        if not p > 0:
            raise DomainError(f"pressure grid must be positive, got {p}")
        state = GasState(p, temperature) if temperature else GasState(p)
        eta = internal_efficiency(config, state, line, detuning, model)
        points.append(EfficiencyPoint(p, eta, external_efficiency(eta, chain)))
        dks.append(phase_mismatch(config, state, model))
    internal = np.array([pt.internal for pt in points])
    peak = internal.max()
    normalized = internal / peak if peak > 0 else np.zeros_like(internal)
    return EfficiencyScan(points, np.array(dks), normalized)


def peak_pressure(config, line, model=None, bounds=(0.1, 30.0), temperature=None):
    """Pressure of the on-resonance efficiency maximum, refined from a 0.25 bar grid."""

    def eta(p):
        state = GasState(p, temperature) if temperature else GasState(p)
        return _response(config, state, line, 0.0, model)

    grid = np.arange(bounds[0], bounds[1] + 1e-9, 0.25)
    values = np.array([eta(p) for p in grid])
    i = int(np.argmax(values))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(lambda p: -eta(p), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-4})
    return float(res.x)
