"""
Pressure-dependent Q1(1) Raman resonance of H2.

The line is Lorentzian at every pressure. Velocity-changing collisions
(Dicke narrowing) and density broadening enter only through the width

    Gamma(p) = A / p + B * p        (FWHM, MHz)

and the collisional shift moves the center linearly, nu(p) = nu0 + shift * p.
"""

import enum
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DomainError
from .gas import DEFAULT_TEMPERATURE, MAX_PRESSURE_BAR, number_density

# Dicke coefficient from the diffusion-limited width of the Q1(1) line,
# ~309 MHz amagat at room temperature, converted to bar at 296 K.
DEFAULT_DICKE_A = 340.0


class ProcessKind(str, enum.Enum):
    CARS = "CARS"
    CSRS = "CSRS"


@dataclass(frozen=True)
class RamanLine:
    nu0: float  # THz
    shift: float  # MHz/bar
    a: float = DEFAULT_DICKE_A  # MHz bar
    b: float = 42.7  # MHz/bar

    def __post_init__(self):
        if not self.nu0 > 0:
            raise DomainError("nu0 must be positive")
        if not self.b > 0:
            raise DomainError("broadening coefficient B must be positive")
        if self.a < 0:
            raise DomainError("Dicke coefficient A must be nonnegative")

    @classmethod
    def from_dict(cls, doc):
        return cls(
            nu0=float(doc["nu0_THz"]),
            shift=float(doc["shift_MHz_per_bar"]),
            a=float(doc.get("A_MHz_bar", DEFAULT_DICKE_A)),
            b=float(doc["B_MHz_per_bar"]),
        )

    def to_dict(self):
        return {
            "nu0_THz": self.nu0,
            "shift_MHz_per_bar": self.shift,
            "A_MHz_bar": self.a,
            "B_MHz_per_bar": self.b,
        }

    def replace(self, **changes):
        fields = asdict(self)
        fields.update(changes)
        return RamanLine(**fields)


CARS_LINE = RamanLine(nu0=124.571257, shift=-94.0, b=42.7)
CSRS_LINE = RamanLine(nu0=124.571304, shift=-93.0, b=46.9)


def default_line(kind):
    return {ProcessKind.CARS: CARS_LINE, ProcessKind.CSRS: CSRS_LINE}[ProcessKind(kind)]


def _check_pressure(p, allow_zero=True):
    if allow_zero and p == 0:
        return
    if not 0.0 < p <= MAX_PRESSURE_BAR:
        raise DomainError(f"pressure {p} bar outside {'[' if allow_zero else '('}0, {MAX_PRESSURE_BAR}]")


def resonance_center(line, pressure):
    """Pressure-shifted resonance frequency in THz."""
    _check_pressure(pressure)
    return line.nu0 + line.shift * pressure * 1e-6


def linewidth(line, pressure):
    """Lorentzian FWHM in MHz. Diverges at zero pressure, so p = 0 is rejected."""
    _check_pressure(pressure, allow_zero=False)
    return line.a / pressure + line.b * pressure


def raman_response(line, pressure, detuning, temperature=DEFAULT_TEMPERATURE, scale=1.0):
    """Complex resonant susceptibility, relative units.

    ``detuning`` is the pump difference frequency minus the shifted center,
    in MHz (positive above resonance). Returns ``scale * N / (detuning + i*Gamma/2)``
    with N the number density in m^-3, so ``|chi|^2`` on resonance is
    ``(2 N / Gamma)^2`` at unit scale.
    """
    gamma = linewidth(line, pressure)
    n = number_density(pressure, temperature)
    return scale * n / (np.asarray(detuning, dtype=float) + 0.5j * gamma)
