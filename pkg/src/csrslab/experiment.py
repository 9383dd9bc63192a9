"""
The simulated experiment: calibrated processes, detection chains, synthetic
spectra and polarization scans, and the analysis that inverts them.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.constants import h as PLANCK

from . import fitting, fwm, polarization
from .detection import DetectorSpec, observed_rate
from .errors import DomainError, FitInitError
from .gas import DispersionModel, GasState
from .lineshape import ProcessKind, RamanLine, linewidth, raman_response, resonance_center

KINDS = (ProcessKind.CARS, ProcessKind.CSRS)
STREAM = {ProcessKind.CARS: 0, ProcessKind.CSRS: 1, "linear": 2, "circular": 3}

# detuning_MHz columns are measured from this pump-difference frequency
REFERENCE_THZ = 124.57


def child_rng(seed, *keys):
    """Independent generator for one (seed, stream, index) cell."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(k) for k in keys]]))


@dataclass
class Setup:
    temperature: float
    model: DispersionModel
    lines: dict
    processes: dict  # calibrated ProcessConfig per kind
    chains: dict  # transmission factors before the detector
    detectors: dict
    anchors: dict  # kind -> EfficiencyPoint actually used
    settings: dict = field(default_factory=dict)

    @classmethod
    def from_config(cls, cfg):
        T = float(cfg["temperature_K"])
        if cfg.get("dispersion_file"):
            model = DispersionModel.from_json(cfg["dispersion_file"])
        else:
            model = DispersionModel.default()
        lines, processes, chains, detectors, anchors = {}, {}, {}, {}, {}
        for kind in KINDS:
            k = kind.value
            line = RamanLine.from_dict(cfg["lines"][k])
            base = fwm.ProcessConfig(kind=kind, **cfg["process"])
            anchor_doc = cfg["anchors"][k]
            p_anchor = anchor_doc["pressure_bar"]
            if p_anchor == "peak":
                p_anchor = fwm.peak_pressure(base, line, model, temperature=T)
            elif isinstance(p_anchor, str):
                raise DomainError(f"anchors.{k}.pressure_bar: expected a number or 'peak'")
            target = fwm.EfficiencyPoint(float(p_anchor), anchor_doc["internal"], anchor_doc["external"])
            scale = fwm.calibrate_scale(base, line, target, model, temperature=T)
            det = DetectorSpec.from_dict(cfg["detectors"][k])
            optics = cfg["optics_transmission"][k]
            if optics is None:
                optics = target.external / (target.internal * cfg["filter_transmission"] * det.quantum_efficiency)
            lines[kind] = line
            processes[kind] = base.replace(scale=scale)
            chains[kind] = {"bandpass_filter": float(cfg["filter_transmission"]), "optics": float(optics)}
            detectors[kind] = det
            anchors[kind] = target
        return cls(T, model, lines, processes, chains, detectors, anchors, cfg)

    # --- physics helpers -------------------------------------------------------

    def state(self, pressure):
        return GasState(pressure, self.temperature)

    def full_chain(self, kind):
        chain = dict(self.chains[kind])
        chain["detector_qe"] = self.detectors[kind].quantum_efficiency
        return chain

    def internal_efficiency(self, kind, pressure, detuning=0.0):
        return fwm.internal_efficiency(self.processes[kind], self.state(pressure), self.lines[kind], detuning,
                                       self.model)

    def external_efficiency(self, kind, pressure, detuning=0.0):
        return fwm.external_efficiency(self.internal_efficiency(kind, pressure, detuning), self.full_chain(kind))

    def signal_photon_flux(self, kind=ProcessKind.CSRS):
        cfg = self.processes[kind]
        nu = fwm._nu(cfg.signal_nm) * 1e12
        return cfg.signal_w / (PLANCK * nu)

    def efficiency_scan(self, kind, pressures):
        return fwm.efficiency_scan(self.processes[kind], self.lines[kind], pressures, self.full_chain(kind),
                                   model=self.model, temperature=self.temperature)

    def efficiency_grid(self):
        e = self.settings["efficiency"]
        n = int(round((e["pressure_max"] - e["pressure_min"]) / e["pressure_step"]))
        return e["pressure_min"] + e["pressure_step"] * np.arange(n + 1)


# --- spectra ---------------------------------------------------------------------

@dataclass
class Spectrum:
    kind: ProcessKind
    pressure: float
    frequency_thz: np.ndarray
    expected: np.ndarray
    counts: np.ndarray
    duration: float
    detector: str = ""

    @property
    def detuning_mhz(self):
        return (self.frequency_thz - REFERENCE_THZ) * 1e6


def spectrum_grid(setup, pressure, points=100, span_linewidths=4.0, detunings_mhz=None):
    """Pump-difference frequencies (THz) scanned at one pressure.

    Centered between the two channels' predicted resonances; ``detunings_mhz``
    overrides the default symmetric span of +-span_linewidths widths.
    """
    centers = [resonance_center(setup.lines[k], pressure) for k in KINDS]
    mid = 0.5 * (centers[0] + centers[1])
    if detunings_mhz is not None:
        d = np.asarray(detunings_mhz, dtype=float)
        if d.size == 0:
            raise DomainError("detuning grid is empty")
        return mid + d * 1e-6
    if points < 1:
        raise DomainError("spectrum needs at least one point")
    half = span_linewidths * max(linewidth(setup.lines[k], pressure) for k in KINDS)
    return mid + np.linspace(-half, half, int(points)) * 1e-6


def simulate_spectrum(setup, kind, pressure, frequency_thz, dwell_s, rng=None, noise=True):
    """Counts registered in one channel while scanning the pump difference."""
    kind = ProcessKind(kind)
    line = setup.lines[kind]
    freqs = np.asarray(frequency_thz, dtype=float)
    detuning = (freqs - resonance_center(line, pressure)) * 1e6
    eta_peak = setup.internal_efficiency(kind, pressure)
    chi = raman_response(line, pressure, detuning, setup.temperature)
    chi0 = raman_response(line, pressure, 0.0, setup.temperature)
    eta = eta_peak * np.abs(chi) ** 2 / abs(chi0) ** 2
    transmission = np.prod(list(setup.chains[kind].values()))
    photon_rate = setup.signal_photon_flux(kind) * eta * transmission
    det = setup.detectors[kind]
    expected = observed_rate(photon_rate, det) * dwell_s
    if noise:
        if rng is None:
            raise DomainError("noisy simulation needs a random generator")
        counts = rng.poisson(expected).astype(float)
    else:
        counts = np.asarray(expected, dtype=float).copy()
    return Spectrum(kind, float(pressure), freqs, np.asarray(expected), counts, float(dwell_s), det.name)


def simulate_pressure_series(setup, pressures, seed=0, noise=True, points=None, span_linewidths=None,
                             dwell_s=None, detunings_mhz=None):
    """Spectra for both channels at every pressure, in (pressure, channel) order."""
    s = setup.settings["spectrum"]
    points = s["points"] if points is None else points
    span = s["span_linewidths"] if span_linewidths is None else span_linewidths
    dwell = s["dwell_s"] if dwell_s is None else dwell_s
    out = []
    for i, p in enumerate(pressures):
        freqs = spectrum_grid(setup, p, points, span, detunings_mhz)
        for kind in KINDS:
            rng = child_rng(seed, STREAM[kind], i) if noise else None
            out.append(simulate_spectrum(setup, kind, p, freqs, dwell, rng, noise))
    return out


# peaks below this amplitude significance are treated as not detected
MIN_PEAK_SIGNIFICANCE = 5.0


@dataclass
class ChannelAnalysis:
    kind: str
    pressures: np.ndarray  # pressures that entered the shift and width fits
    lorentz: list  # one entry per input spectrum; None where no fit could start
    centers: fitting.FitResult
    widths: fitting.FitResult
    rejected: list = field(default_factory=list)  # (pressure, reason)

    @property
    def converged(self):
        used = [f for f in self.lorentz if f is not None and "rejected" not in f.flags]
        return all(f.converged for f in used + [self.centers, self.widths])


def fit_spectrum(frequency_thz, counts):
    x = (np.asarray(frequency_thz, dtype=float) - REFERENCE_THZ) * 1e6
    return fitting.fit_lorentzian(x, np.asarray(counts, dtype=float))


def analyze_channel(kind, pressures, frequencies, counts):
    """Lorentzian per spectrum, then shift line and Dicke width curve."""
    fits, ps, centers, c_err, widths, w_err, rejected = [], [], [], [], [], [], []
    for p, f, c in zip(pressures, frequencies, counts):
        try:
            fit = fit_spectrum(f, c)
        except FitInitError as exc:
            fits.append(None)
            rejected.append((p, str(exc)))
            continue
        fits.append(fit)
        reason = None
        if not fit.converged:
            reason = f"fit {fit.status}"
        elif not np.all(np.isfinite(fit.errors)) or fit.error("center") <= 0:
            reason = "undetermined uncertainties"
        elif not fit["amplitude"] >= MIN_PEAK_SIGNIFICANCE * fit.error("amplitude"):
            reason = f"peak below {MIN_PEAK_SIGNIFICANCE:g} sigma"
        if reason:
            fit.flags.append("rejected")
            rejected.append((p, reason))
            continue
        ps.append(p)
        centers.append(REFERENCE_THZ + fit["center"] * 1e-6)
        c_err.append(fit.error("center"))
        widths.append(fit["fwhm"])
        w_err.append(fit.error("fwhm"))
    centers_fit = fitting.fit_center_vs_pressure(ps, centers, c_err)
    try:
        widths_fit = fitting.fit_dicke_width(ps, widths, w_err)
    except ValueError:
        widths_fit = fitting.FitResult(("A", "B"), np.full(2, np.nan), np.full((2, 2), np.nan), float("nan"),
                                       "singular")
    return ChannelAnalysis(str(kind), np.asarray(ps), fits, centers_fit, widths_fit, rejected)


def analyze_pressure_series(spectra):
    """Group spectra by channel and analyze each channel."""
    out = {}
    for kind in sorted({str(ProcessKind(s.kind).value) for s in spectra}):
        chan = sorted((s for s in spectra if ProcessKind(s.kind).value == kind), key=lambda s: s.pressure)
        out[kind] = analyze_channel(kind, [s.pressure for s in chan], [s.frequency_thz for s in chan],
                                    [s.counts for s in chan])
    return out


# --- polarization ------------------------------------------------------------------

def scan_angles(setup, basis):
    pol = setup.settings["polarization"]
    period = polarization.SCAN_PERIOD[basis]
    step = pol["linear_step_deg"] if basis == "linear" else pol["circular_step_deg"]
    return np.arange(0.0, pol["periods"] * period, step)


def polarization_amplitude(setup, dwell_s=None):
    """Converted-photon counts per scan point (both PBS ports together)."""
    pol = setup.settings["polarization"]
    dwell = pol["dwell_s"] if dwell_s is None else dwell_s
    rate = setup.signal_photon_flux() * setup.external_efficiency(ProcessKind.CSRS, pol["pressure_bar"])
    return rate * dwell


def simulate_polarization(setup, basis, seed=0, preset=None, noise=True, angles=None, state="H"):
    if preset is None:
        preset = setup.settings["polarization"]["preset"]
    if isinstance(preset, str):
        try:
            preset = polarization.PRESETS[preset]
        except KeyError:
            raise DomainError(f"unknown imperfection preset {preset!r}") from None
    angles = scan_angles(setup, basis) if angles is None else np.asarray(angles, dtype=float)
    scan = polarization.simulate_basis_scan(basis, angles, polarization_amplitude(setup), preset, state)
    if noise:
        rng = child_rng(seed, STREAM[basis])
        scan.counts_d1 = rng.poisson(scan.counts_d1).astype(float)
        scan.counts_d2 = rng.poisson(scan.counts_d2).astype(float)
    return scan


@dataclass
class ScanAnalysis:
    label: str
    period: float
    fits: tuple  # (d1, d2)
    contrasts: tuple
    contrast_errors: tuple


def contrast_with_error(fit):
    a, c = fit["amplitude"], fit["offset"]
    cov = fit.covariance
    ia, ic = fit.names.index("amplitude"), fit.names.index("offset")
    grad = np.zeros(len(fit.names))
    grad[ia], grad[ic] = 1.0 / c, -a / c**2
    err = float(np.sqrt(max(grad @ cov @ grad, 0.0)))
    value = polarization.contrast(a, c, tolerance=3.0 * np.hypot(fit.error("amplitude"), fit.error("offset")))
    return value, err


def analyze_scan(angles, counts_d1, counts_d2, period, label=""):
    fits = tuple(fitting.fit_sine(angles, c, period) for c in (counts_d1, counts_d2))
    values = [contrast_with_error(f) for f in fits]
    return ScanAnalysis(label, period, fits, tuple(v for v, _ in values), tuple(e for _, e in values))
