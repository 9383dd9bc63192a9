"""
Structured analysis report: per-process line parameters, per-scan contrasts
and the polarization fidelity, validated against a versioned JSON schema.

The pressure-gauge uncertainty is a relative scale error on the pressure
axis. It leaves the zero-pressure intercept alone and moves every quantity
that is a slope in pressure (shift, broadening B) and the Dicke coefficient
A by the same relative amount; it is reported separately as ``sys``.
"""

import json
from functools import lru_cache
from importlib import resources

import jsonschema
import numpy as np

from . import polarization

SCHEMA_VERSION = "1.0"


@lru_cache(maxsize=1)
def schema():
    text = resources.files("csrslab.data").joinpath("report_schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _num(x):
    x = float(x)
    return x if np.isfinite(x) else None


def _quantity(value, stat, sys=0.0):
    return {"value": _num(value), "stat": _num(stat), "sys": _num(sys)}


def spectrum_entry(channel, pressure, fit, used=True, reason=None):
    if fit is None:
        return {"channel": str(channel), "pressure_bar": _num(pressure), "status": "no-peak",
                "used": False, "reason": reason, "parameters": None, "uncertainties": None}
    return {
        "channel": str(channel),
        "pressure_bar": _num(pressure),
        "status": fit.status,
        "used": bool(used),
        "reason": reason,
        "parameters": {n: _num(v) for n, v in zip(fit.names, fit.values)},
        "uncertainties": {n: _num(e) for n, e in zip(fit.names, fit.errors)},
    }


def process_entry(analysis, gauge_rel):
    c, w = analysis.centers, analysis.widths
    shift, b, a = c["slope"], w["B"], w["A"]
    return {
        "shift_MHz_per_bar": _quantity(shift, c.error("slope"), abs(shift) * gauge_rel),
        "nu0_THz": _quantity(c["intercept"], c.error("intercept"), 0.0),
        "broadening_B_MHz_per_bar": _quantity(b, w.error("B"), abs(b) * gauge_rel),
        "dicke_A_MHz_bar": _quantity(a, w.error("A"), abs(a) * gauge_rel),
        "pressures_used_bar": [float(p) for p in analysis.pressures],
        "rejected": [{"pressure_bar": float(p), "reason": r} for p, r in analysis.rejected],
        "status": {"centers": c.status, "widths": w.status},
        "flags": sorted(set(c.flags) | set(w.flags)),
    }


def scan_entry(scan):
    detectors = []
    for name, fit, con, err in zip(("d1", "d2"), scan.fits, scan.contrasts, scan.contrast_errors):
        detectors.append({
            "detector": name,
            "contrast": _quantity(con, err),
            "phase_deg": _quantity(fit["phase"], fit.error("phase")),
            "amplitude": _num(fit["amplitude"]),
            "offset": _num(fit["offset"]),
            "status": fit.status,
            "flags": list(fit.flags),
        })
    return {"basis": scan.label, "period_deg": float(scan.period), "detectors": detectors}


def fidelity_entry(scans):
    values = [c for s in scans for c in s.contrasts]
    errors = [e for s in scans for e in s.contrast_errors]
    if len(values) != 4:
        return None
    # fitted contrasts may exceed 1 by noise; the per-detector entries keep the raw values
    return _quantity(polarization.fidelity(np.clip(values, 0.0, 1.0)), np.sqrt(np.sum(np.square(errors))) / 4.0)


def analysis_report(channels=None, spectra=None, scans=None, gauge_rel=0.01, meta=None):
    """Assemble and validate the report.

    ``channels`` maps process name to ChannelAnalysis, ``spectra`` is a list of
    entries from :func:`spectrum_entry` and ``scans`` a list of ScanAnalysis.
    The fidelity is null unless exactly four detector contrasts are present.
    """
    channels, spectra, scans = channels or {}, spectra or [], scans or []
    if not (channels or spectra or scans):
        raise ValueError("report needs at least one fit")
    doc = {
        "schema_version": SCHEMA_VERSION,
        "pressure_gauge_rel_uncertainty": float(gauge_rel),
        "processes": {k: process_entry(v, gauge_rel) for k, v in sorted(channels.items())},
        "spectra": list(spectra),
        "polarization": {"scans": [scan_entry(s) for s in scans], "fidelity": fidelity_entry(scans)},
        "converged": all_converged(channels, spectra, scans),
        "meta": dict(meta or {}),
    }
    jsonschema.validate(doc, schema())
    return doc


def all_converged(channels=None, spectra=None, scans=None):
    ok = all(s["status"] == "converged" for s in spectra or [])
    ok &= all(c.centers.converged and c.widths.converged for c in (channels or {}).values())
    ok &= all(f.converged for s in scans or [] for f in s.fits)
    return bool(ok)


def dumps(doc):
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
