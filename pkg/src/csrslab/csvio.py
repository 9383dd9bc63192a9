"""
CSV tables: spectra, efficiency curves, polarization scans, count records and
fit summaries. Files are UTF-8, comma separated, with a header row.

Readers reject malformed input with a :class:`CSVFormatError` naming the file,
the row (1-based, header is row 1) and the offending column.
"""

import csv
import math
import os

import numpy as np

from .detection import CountRecord
from .experiment import REFERENCE_THZ

SPECTRUM_COLUMNS = ("pressure_bar", "detuning_MHz", "pump_difference_THz", "counts", "duration_s", "channel")
EFFICIENCY_COLUMNS = ("pressure_bar", "eta_internal", "eta_external", "delta_k_rad_per_m", "normalized")
POLARIZATION_COLUMNS = ("angle_deg", "counts_d1", "counts_d2", "basis")
COUNT_COLUMNS = ("duration_s", "counts", "detector_name")


class CSVFormatError(ValueError):
    pass


def fmt(x):
    """Stable text form of a number: integers stay integral, floats get 10 significant digits."""
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isfinite(x) and x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return f"{x:.10g}"


def write_rows(path, columns, rows):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_rows(path, required, optional=(), one_of=()):
    """Rows as dicts of strings, after header checks.

    ``one_of`` lists column groups of which at least one must be present.
    """
    try:
        with open(path, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
    except (OSError, UnicodeDecodeError) as exc:
        raise CSVFormatError(f"{path}: cannot read: {exc}") from exc
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise CSVFormatError(f"{path}: empty file (a header row is required)")
    header = [c.strip() for c in rows[0]]
    missing = [c for c in required if c not in header]
    if missing:
        raise CSVFormatError(f"{path}: row 1: missing column(s) {', '.join(missing)}")
    for group in one_of:
        if not any(c in header for c in group):
            raise CSVFormatError(f"{path}: row 1: need one of the columns {', '.join(group)}")
    unknown = [c for c in header if c not in set(required) | set(optional)]
    if unknown:
        raise CSVFormatError(f"{path}: row 1: unknown column(s) {', '.join(unknown)}")
    if len(rows) < 2:
        raise CSVFormatError(f"{path}: no data rows")
    out = []
    for i, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise CSVFormatError(f"{path}: row {i}: expected {len(header)} fields, found {len(r)}")
        out.append((i, dict(zip(header, (c.strip() for c in r)))))
    return out


def _number(path, i, row, col, minimum=None, positive=False):
    text = row[col]
    try:
        x = float(text)
    except ValueError:
        raise CSVFormatError(f"{path}: row {i}: column {col}: not a number: {text!r}") from None
    if not math.isfinite(x):
        raise CSVFormatError(f"{path}: row {i}: column {col}: not finite: {text!r}")
    if positive and not x > 0:
        raise CSVFormatError(f"{path}: row {i}: column {col}: must be positive, got {text}")
    if minimum is not None and x < minimum:
        raise CSVFormatError(f"{path}: row {i}: column {col}: must be >= {minimum:g}, got {text}")
    return x


# --- spectra ---------------------------------------------------------------------

def spectrum_rows(spectra):
    for s in spectra:
        for f, c in zip(s.frequency_thz, s.counts):
            yield (s.pressure, (f - REFERENCE_THZ) * 1e6, f"{f:.9f}", c, s.duration, str(s.kind.value))


def write_spectra(path, spectra):
    write_rows(path, SPECTRUM_COLUMNS, spectrum_rows(spectra))


def read_spectra(path):
    """Spectrum groups keyed by (channel, pressure) in file order.

    Each value is a dict of arrays: frequency_thz, counts, duration_s.
    Absolute ``pump_difference_THz`` wins over ``detuning_MHz`` when both are present.
    """
    rows = read_rows(path, ("pressure_bar", "counts", "duration_s"), SPECTRUM_COLUMNS,
                     one_of=(("detuning_MHz", "pump_difference_THz"),))
    groups = {}
    for i, row in rows:
        p = _number(path, i, row, "pressure_bar", positive=True)
        n = _number(path, i, row, "counts", minimum=0.0)
        t = _number(path, i, row, "duration_s", positive=True)
        if row.get("pump_difference_THz", "") != "":
            f = _number(path, i, row, "pump_difference_THz", positive=True)
        elif row.get("detuning_MHz", "") != "":
            f = REFERENCE_THZ + _number(path, i, row, "detuning_MHz") * 1e-6
        else:
            raise CSVFormatError(f"{path}: row {i}: no detuning_MHz or pump_difference_THz value")
        channel = row.get("channel") or "signal"
        g = groups.setdefault((channel, p), {"frequency_thz": [], "counts": [], "duration_s": []})
        g["frequency_thz"].append(f)
        g["counts"].append(n)
        g["duration_s"].append(t)
    return {k: {c: np.asarray(v, dtype=float) for c, v in g.items()} for k, g in groups.items()}


# --- efficiency ----------------------------------------------------------------------

def write_efficiency(path, scan):
    rows = ((pt.pressure, pt.internal, pt.external, dk, norm)
            for pt, dk, norm in zip(scan.points, scan.delta_k, scan.normalized))
    write_rows(path, EFFICIENCY_COLUMNS, rows)


# --- polarization ------------------------------------------------------------------

def write_polarization(path, scan, basis):
    rows = ((a, c1, c2, basis) for a, c1, c2 in zip(scan.angles, scan.counts_d1, scan.counts_d2))
    write_rows(path, POLARIZATION_COLUMNS, rows)


def read_polarization(path, basis=None):
    """(basis, angles, counts_d1, counts_d2); ``basis`` overrides the file's column."""
    rows = read_rows(path, ("angle_deg", "counts_d1", "counts_d2"), POLARIZATION_COLUMNS)
    angles, d1, d2, names = [], [], [], set()
    for i, row in rows:
        angles.append(_number(path, i, row, "angle_deg"))
        d1.append(_number(path, i, row, "counts_d1", minimum=0.0))
        d2.append(_number(path, i, row, "counts_d2", minimum=0.0))
        if row.get("basis"):
            names.add(row["basis"])
    if basis is None:
        if len(names) != 1:
            raise CSVFormatError(f"{path}: cannot tell the scan basis; give a single basis column value or --basis")
        basis = names.pop()
    return basis, np.asarray(angles), np.asarray(d1), np.asarray(d2)


# --- count records -------------------------------------------------------------------

def write_count_records(path, records):
    write_rows(path, COUNT_COLUMNS, ((r.duration, r.counts, r.detector_name) for r in records))


def read_count_records(path):
    out = []
    for i, row in read_rows(path, ("duration_s", "counts"), COUNT_COLUMNS):
        n = _number(path, i, row, "counts", minimum=0.0)
        if n != int(n):
            raise CSVFormatError(f"{path}: row {i}: column counts: not an integer: {row['counts']!r}")
        out.append(CountRecord(_number(path, i, row, "duration_s", positive=True), int(n),
                               row.get("detector_name", "")))
    return out
