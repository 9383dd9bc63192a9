"""
Number density and refractive index of hydrogen gas.

The equation of state is the ideal gas law. Up to 60 bar at room temperature
the compressibility factor of H2 stays within about 4% of unity, which is well
below the uncertainty of the absolute conversion-efficiency scale.

Dispersion uses a Sellmeier form for the excess index at a reference density,

.. math::

    n_{ref} - 1 = \\sum_i \\frac{B_i \\lambda^2}{\\lambda^2 - C_i}

with the wavelength in microns, scaled linearly with number density. The
coefficients live in a JSON file so that other literature values can be
swapped in without touching code.
"""

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.constants import k as K_B

from .errors import DomainError

BAR = 1.0e5  # Pa
MAX_PRESSURE_BAR = 60.0
DEFAULT_TEMPERATURE = 296.0


def number_density(pressure, temperature=DEFAULT_TEMPERATURE):
    """Ideal-gas number density in m^-3 for a pressure in bar."""
    if not 0.0 <= pressure <= MAX_PRESSURE_BAR:
        raise DomainError(f"pressure {pressure} bar outside [0, {MAX_PRESSURE_BAR}]")
    if not temperature > 0.0:
        raise DomainError(f"temperature must be positive, got {temperature} K")
    return pressure * BAR / (K_B * temperature)


@dataclass(frozen=True)
class GasState:
    pressure: float
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self):
        # validates both fields
        number_density(self.pressure, self.temperature)

    @property
    def density(self):
        return number_density(self.pressure, self.temperature)


@dataclass(frozen=True)
class DispersionModel:
    """Two-or-more-term Sellmeier excess index at ``reference_density``."""

    reference_density: float
    terms: tuple  # ((B, C_um2), ...)
    wavelength_range_nm: tuple = (500.0, 1700.0)
    name: str = ""

    @classmethod
    def from_dict(cls, doc):
        try:
            terms = tuple((float(t["B"]), float(t["C_um2"])) for t in doc["terms"])
            ref = float(doc["reference_density_m3"])
        except (KeyError, TypeError) as exc:
            raise DomainError(f"malformed dispersion document: {exc!r}") from exc
        if not terms or ref <= 0:
            raise DomainError("dispersion document needs terms and a positive reference density")
        lo, hi = doc.get("wavelength_range_nm", (500.0, 1700.0))
        return cls(ref, terms, (float(lo), float(hi)), doc.get("name", ""))

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    @classmethod
    def default(cls):
        """The shipped H2 coefficients."""
        text = resources.files("csrslab.data").joinpath("h2_dispersion.json").read_text("utf-8")
        return cls.from_dict(json.loads(text))

    def to_dict(self):
        return {
            "name": self.name,
            "reference_density_m3": self.reference_density,
            "wavelength_range_nm": list(self.wavelength_range_nm),
            "terms": [{"B": b, "C_um2": c} for b, c in self.terms],
        }

    def check_wavelength(self, wavelength_nm):
        lo, hi = self.wavelength_range_nm
        w = np.asarray(wavelength_nm, dtype=float)
        if np.any(w < lo) or np.any(w > hi):
            raise DomainError(f"wavelength {wavelength_nm} nm outside validated range [{lo}, {hi}] nm")

    def excess_index(self, wavelength_nm):
        """n - 1 at the reference density."""
        self.check_wavelength(wavelength_nm)
        l2 = (np.asarray(wavelength_nm, dtype=float) * 1e-3) ** 2
        return sum(b * l2 / (l2 - c) for b, c in self.terms)


def index_excess(wavelength_nm, state, model=None):
    """n - 1, computed without forming n."""
    model = model or _default_model()
    return model.excess_index(wavelength_nm) * (state.density / model.reference_density)


def refractive_index(wavelength_nm, state, model=None):
    return 1.0 + index_excess(wavelength_nm, state, model)


def wavevector(wavelength_nm, state, model=None):
    """Wavevector 2*pi*n/lambda in rad/m."""
    n = refractive_index(wavelength_nm, state, model)
    return 2.0 * np.pi * n / (np.asarray(wavelength_nm, dtype=float) * 1e-9)


_DEFAULT = None


def _default_model():
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = DispersionModel.default()
    return _DEFAULT
