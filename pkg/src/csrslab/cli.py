"""
Command-line entry point.

Every command writes ``config.json`` (the fully resolved configuration) and
``manifest.json`` (command, arguments, config hash, seed, tool version,
timestamp and SHA-256 digests of inputs and outputs) into the output
directory. Paths in the manifest are relative to the output directory so that
two runs into different directories can be compared byte for byte. The
timestamp is taken from SOURCE_DATE_EPOCH when that is set.

Exit codes: 0 success, 1 invalid input (config, CSV, arguments), 2 when an
analysis finished but at least one fit did not converge.
"""

import argparse
import datetime
import glob
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__, config, csvio, experiment, fitting, fwm, plotting, polarization, report
from .csvio import CSVFormatError
from .errors import ConfigError, DomainError, FitInitError
from .lineshape import ProcessKind

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2

# published values the reproduction is compared against: (value, uncertainty)
REFERENCE = {
    ("shift_MHz_per_bar", "CARS"): (-94.0, 1.0),
    ("shift_MHz_per_bar", "CSRS"): (-93.0, 1.0),
    ("nu0_THz", "CARS"): (124.571257, 2e-6),
    ("nu0_THz", "CSRS"): (124.571304, 2e-6),
    ("broadening_B_MHz_per_bar", "CARS"): (42.7, 0.5),
    ("broadening_B_MHz_per_bar", "CSRS"): (46.9, 0.5),
    ("peak_pressure_bar", "CARS"): (8.0, 0.2),
    ("fidelity", "CSRS"): (0.904, None),
}


# --- run bookkeeping -------------------------------------------------------------------

def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def timestamp():
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        t = datetime.datetime.fromtimestamp(int(epoch), tz=datetime.timezone.utc)
    else:
        t = datetime.datetime.now(tz=datetime.timezone.utc).replace(microsecond=0)
    return t.isoformat().replace("+00:00", "Z")


class Run:
    """Output directory of one command and the files written into it."""

    def __init__(self, command, arguments, cfg, seed, out):
        self.command, self.arguments, self.cfg, self.seed = command, arguments, cfg, seed
        self.out = out
        self.outputs = []
        self.inputs = {}
        os.makedirs(out, exist_ok=True)

    def path(self, *parts):
        rel = "/".join(parts)
        if rel not in self.outputs:
            self.outputs.append(rel)
        full = os.path.join(self.out, *parts)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        return full

    def add_input(self, path):
        self.inputs[os.path.basename(path)] = sha256(path)

    def write_text(self, text, *parts):
        with open(self.path(*parts), "w", encoding="utf-8", newline="\n") as f:
            f.write(text)

    def finish(self):
        self.write_text(json.dumps(self.cfg, indent=2, sort_keys=True) + "\n", "config.json")
        manifest = {
            "command": self.command,
            "arguments": self.arguments,
            "config_hash": config.config_hash(self.cfg),
            "config_file": "config.json",
            "seed": self.seed,
            "tool_version": __version__,
            "timestamp": timestamp(),
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": {rel: sha256(os.path.join(self.out, rel)) for rel in sorted(self.outputs)},
        }
        with open(os.path.join(self.out, "manifest.json"), "w", encoding="utf-8", newline="\n") as f:
            f.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return manifest


# --- shared analysis -------------------------------------------------------------------

def expand_inputs(paths):
    files = []
    for p in paths:
        if os.path.isdir(p):
            files.extend(sorted(glob.glob(os.path.join(p, "*.csv"))))
        else:
            files.append(p)
    if not files:
        raise CSVFormatError("no input CSV files found")
    return files


def read_spectrum_files(files):
    groups = {}
    for path in files:
        for key, g in csvio.read_spectra(path).items():
            if key in groups:
                raise CSVFormatError(f"{path}: channel {key[0]} at {key[1]:g} bar appears in more than one file")
            groups[key] = g
    return groups


def analyze_spectra(groups, series):
    """Lorentzian fits per (channel, pressure); with ``series`` also shift and width fits.

    Returns (channel analyses, report spectrum entries, {channel: {pressure: fit}}).
    """
    channels, entries, fits = {}, [], {}
    for channel in sorted({c for c, _ in groups}):
        ps = sorted(p for c, p in groups if c == channel)
        if series:
            freqs = [groups[channel, p]["frequency_thz"] for p in ps]
            counts = [groups[channel, p]["counts"] for p in ps]
            a = experiment.analyze_channel(channel, ps, freqs, counts)
            channels[channel] = a
            reasons = dict(a.rejected)
            for p, fit in zip(ps, a.lorentz):
                entries.append(report.spectrum_entry(channel, p, fit, p not in reasons, reasons.get(p)))
            fits[channel] = dict(zip(ps, a.lorentz))
            continue
        fits[channel] = {}
        for p in ps:
            g = groups[channel, p]
            try:
                fit = experiment.fit_spectrum(g["frequency_thz"], g["counts"])
            except FitInitError as exc:
                fit, reason = None, str(exc)
            else:
                reason = None if fit.converged else f"fit {fit.status}"
            fits[channel][p] = fit
            entries.append(report.spectrum_entry(channel, p, fit, fit is not None and fit.converged, reason))
    return channels, entries, fits


def analyze_polarization_files(files, basis=None):
    scans, data = [], []
    for path in files:
        name, angles, d1, d2 = csvio.read_polarization(path, basis)
        if name not in polarization.SCAN_PERIOD:
            raise CSVFormatError(f"{path}: unknown basis {name!r}; expected one of {', '.join(polarization.BASES)}")
        try:
            scans.append(experiment.analyze_scan(angles, d1, d2, polarization.SCAN_PERIOD[name], name))
        except (ValueError, DomainError) as exc:
            raise CSVFormatError(f"{path}: {exc}") from exc
        data.append((name, angles, d1, d2))
    return scans, data


def write_spectrum_fits(path, entries):
    cols = ["channel", "pressure_bar", "status", "used"]
    for n in fitting.LORENTZ_NAMES:
        cols += [n, n + "_err"]
    rows = []
    for e in entries:
        row = [e["channel"], e["pressure_bar"], e["status"], str(e["used"]).lower()]
        for n in fitting.LORENTZ_NAMES:
            par, unc = e["parameters"], e["uncertainties"]
            row += ["" if par is None or par[n] is None else par[n], "" if unc is None or unc[n] is None else unc[n]]
        rows.append(row)
    csvio.write_rows(path, cols, rows)


def write_polarization_fits(path, scans):
    cols = ["basis", "detector", "status", "contrast", "contrast_err", "phase_deg", "phase_err_deg",
            "amplitude", "amplitude_err", "offset", "offset_err"]
    rows = []
    for s in scans:
        for name, fit, c, ce in zip(("d1", "d2"), s.fits, s.contrasts, s.contrast_errors):
            rows.append([s.label, name, fit.status, c, ce, fit["phase"], fit.error("phase"), fit["amplitude"],
                         fit.error("amplitude"), fit["offset"], fit.error("offset")])
    csvio.write_rows(path, cols, rows)


def spectrum_figures(run, groups, fits, channels):
    for channel in sorted(fits):
        data = {p: ((groups[channel, p]["frequency_thz"] - experiment.REFERENCE_THZ) * 1e6,
                    groups[channel, p]["counts"]) for p in fits[channel]}
        usable = {p: f for p, f in fits[channel].items() if f is not None and f.converged}
        plotting.plot_spectra(run.path("figures", f"spectra_{channel}.png"), channel, data, usable)
    if not channels:
        return
    centers, widths = {}, {}
    for name, a in channels.items():
        used = [f for f in a.lorentz if f is not None and "rejected" not in f.flags]
        if not used:
            continue
        centers[name] = (a.pressures, [f["center"] for f in used], [f.error("center") for f in used], a.centers)
        widths[name] = (a.pressures, [f["fwhm"] for f in used], [f.error("fwhm") for f in used], a.widths)
    if centers:
        plotting.plot_centers(run.path("figures", "centers.png"), centers)
        plotting.plot_widths(run.path("figures", "widths.png"), widths)


def polarization_figures(run, scans, data):
    for scan, (name, angles, d1, d2) in zip(scans, data):
        plotting.plot_polarization(run.path("figures", f"polarization_{name}.png"), name, angles, d1, d2,
                                   scan.fits, scan.period)


# --- commands --------------------------------------------------------------------

def spectrum_file(p):
    return f"spectrum_{p:07.3f}bar.csv"


def cmd_simulate_spectrum(args, cfg, run):
    setup = experiment.Setup.from_config(cfg)
    s = cfg["spectrum"]
    detunings = None
    if args.detuning_range is not None:
        lo, hi = args.detuning_range
        detunings = np.linspace(lo, hi, int(s["points"]))
    for i, p in enumerate(s["pressures_bar"]):
        freqs = experiment.spectrum_grid(setup, p, s["points"], s["span_linewidths"], detunings)
        spectra = []
        for kind in experiment.KINDS:
            rng = experiment.child_rng(run.seed, experiment.STREAM[kind], i) if s["noise"] else None
            spectra.append(experiment.simulate_spectrum(setup, kind, p, freqs, s["dwell_s"], rng, s["noise"]))
        csvio.write_spectra(run.path("spectra", spectrum_file(p)), spectra)
    return EXIT_OK


def cmd_scan_efficiency(args, cfg, run, setup=None):
    setup = setup or experiment.Setup.from_config(cfg)
    grid = setup.efficiency_grid() if args.pressures is None else np.asarray(args.pressures, dtype=float)
    kinds = experiment.KINDS if args.process == "both" else (ProcessKind(args.process),)
    scans = {}
    for kind in kinds:
        scan = setup.efficiency_scan(kind, grid)
        csvio.write_efficiency(run.path(f"efficiency_{kind.value}.csv"), scan)
        scans[kind.value] = scan
    return scans


def cmd_simulate_polarization(args, cfg, run):
    setup = experiment.Setup.from_config(cfg)
    bases = polarization.BASES if args.basis == "both" else (args.basis,)
    noise = cfg["spectrum"]["noise"]
    for basis in bases:
        angles = None
        if args.angles is not None:
            start, stop, step = args.angles
            if not step > 0 or not stop > start:
                raise DomainError("--angles needs START < STOP and STEP > 0")
            angles = np.arange(start, stop, step)
        scan = experiment.simulate_polarization(setup, basis, run.seed, noise=noise, angles=angles, state=args.state)
        csvio.write_polarization(run.path(f"polarization_{basis}.csv"), scan, basis)
    return EXIT_OK


def cmd_analyze(args, cfg, run):
    files = expand_inputs(args.inputs)
    for path in files:
        run.add_input(path)
    gauge = cfg["analysis"]["pressure_gauge_rel_uncertainty"]
    channels, entries, scans = {}, [], []
    if args.kind == "polarization":
        scans, data = analyze_polarization_files(files, args.basis)
    else:
        groups = read_spectrum_files(files)
        channels, entries, fits = analyze_spectra(groups, args.kind == "pressure-series")
    doc = report.analysis_report(channels, entries, scans, gauge, {"kind": args.kind})
    run.write_text(report.dumps(doc), "report.json")
    if args.json_only:
        sys.stdout.write(report.dumps(doc))
    else:
        if args.kind == "polarization":
            write_polarization_fits(run.path("fits_polarization.csv"), scans)
            polarization_figures(run, scans, data)
        else:
            write_spectrum_fits(run.path("fits_spectra.csv"), entries)
            spectrum_figures(run, groups, fits, channels)
        print_report_summary(doc)
    return EXIT_OK if doc["converged"] else EXIT_NOT_CONVERGED


def print_report_summary(doc):
    for name, p in doc["processes"].items():
        print(f"{name}: shift {_pm(p['shift_MHz_per_bar'])} MHz/bar, nu0 {_pm(p['nu0_THz'], 7)} THz, "
              f"B {_pm(p['broadening_B_MHz_per_bar'])} MHz/bar, A {_pm(p['dicke_A_MHz_bar'], 0)} MHz bar")
    for s in doc["polarization"]["scans"]:
        cs = ", ".join(f"{d['detector']} {_pm(d['contrast'], 3)}" for d in s["detectors"])
        print(f"{s['basis']} scan contrast: {cs}")
    if doc["polarization"]["fidelity"] is not None:
        print(f"fidelity {_pm(doc['polarization']['fidelity'], 3)}")
    if not doc["processes"] and doc["spectra"]:
        print(f"{len(doc['spectra'])} spectra fitted")
    print("all fits converged" if doc["converged"] else "some fits did not converge")


def _pm(q, digits=2):
    if q["value"] is None:
        return "n/a"
    err = np.hypot(q["stat"] or 0.0, q["sys"] or 0.0)
    return f"{q['value']:.{digits}f} +- {err:.{digits}f}" if digits else f"{q['value']:.0f} +- {err:.0f}"


def summary_rows(doc, peak_pressure):
    rows = []
    for (quantity, process), (ref, ref_err) in REFERENCE.items():
        if quantity == "peak_pressure_bar":
            q = {"value": peak_pressure, "stat": None, "sys": None}
        elif quantity == "fidelity":
            q = doc["polarization"]["fidelity"] or {"value": None, "stat": None, "sys": None}
        else:
            q = doc["processes"].get(process, {}).get(quantity, {"value": None, "stat": None, "sys": None})
        rows.append((quantity, process, q["value"], q["stat"], q["sys"], ref, ref_err))
    return rows


def format_summary(rows):
    lines = [f"{'quantity':26s} {'process':7s} {'model':>14s} {'+-':>10s} {'reference':>14s} {'+-':>10s}"]
    for quantity, process, v, stat, sys_, ref, ref_err in rows:
        digits = 7 if quantity == "nu0_THz" else 3
        err = None if stat is None else float(np.hypot(stat, sys_ or 0.0))

        def f(x, d=digits):
            return "-" if x is None else f"{x:.{d}f}"

        lines.append(f"{quantity:26s} {process:7s} {f(v):>14s} {f(err):>10s} {f(ref):>14s} {f(ref_err):>10s}")
    return "\n".join(lines) + "\n"


def cmd_reproduce(args, cfg, run):
    setup = experiment.Setup.from_config(cfg)
    cmd_simulate_spectrum(argparse.Namespace(detuning_range=None), cfg, run)
    spectrum_paths = [os.path.join(run.out, r) for r in run.outputs if r.startswith("spectra/")]
    scans_eff = cmd_scan_efficiency(argparse.Namespace(pressures=None, process="both"), cfg, run, setup)
    cmd_simulate_polarization(argparse.Namespace(basis="both", angles=None, state="H"), cfg, run)
    pol_paths = [os.path.join(run.out, f"polarization_{b}.csv") for b in polarization.BASES]

    groups = read_spectrum_files(spectrum_paths)
    channels, entries, fits = analyze_spectra(groups, series=True)
    scans, data = analyze_polarization_files(pol_paths)
    gauge = cfg["analysis"]["pressure_gauge_rel_uncertainty"]
    doc = report.analysis_report(channels, entries, scans, gauge, {"kind": "reproduce"})
    run.write_text(report.dumps(doc), "report.json")

    kind = ProcessKind.CARS
    peak = fwm.peak_pressure(setup.processes[kind], setup.lines[kind], setup.model, temperature=setup.temperature)
    rows = summary_rows(doc, peak)
    table = format_summary(rows)
    if args.json_only:
        sys.stdout.write(report.dumps(doc))
        return EXIT_OK
    write_spectrum_fits(run.path("fits_spectra.csv"), entries)
    write_polarization_fits(run.path("fits_polarization.csv"), scans)
    csvio.write_rows(run.path("summary.csv"),
                     ("quantity", "process", "value", "stat", "sys", "reference", "reference_uncertainty"),
                     [tuple("" if x is None else x for x in r) for r in rows])
    run.write_text(table, "summary.txt")
    spectrum_figures(run, groups, fits, channels)
    polarization_figures(run, scans, data)
    plotting.plot_efficiency(run.path("figures", "efficiency.png"), scans_eff)
    sys.stdout.write(table)
    return EXIT_OK


# --- argument parsing --------------------------------------------------------------

def _global_flags(parser, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=d(None), metavar="PATH",
                        help=f"JSON config file (fallback: ${config.ENV_VAR})")
    parser.add_argument("--seed", type=int, default=d(0), help="master random seed (default 0)")
    parser.add_argument("--out", default=d("csrslab-out"), metavar="DIR", help="output directory")
    parser.add_argument("--json-only", action="store_true", default=d(False),
                        help="analysis writes only report.json (no CSV or figures) and prints it")


def build_parser():
    parser = argparse.ArgumentParser(prog="csrslab", description="Hydrogen Raman frequency-conversion simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate-spectrum", parents=[common], help="synthetic resonance scans, one CSV per pressure")
    p.add_argument("--pressures", type=float, nargs="+", metavar="BAR")
    p.add_argument("--points", type=int, help="detuning points per spectrum")
    p.add_argument("--span", type=float, metavar="WIDTHS", help="half span in linewidths")
    p.add_argument("--detuning-range", type=float, nargs=2, metavar=("LO", "HI"),
                   help="detuning grid in MHz around the predicted resonances (overrides --span)")
    p.add_argument("--dwell", type=float, metavar="S", help="counting time per point")
    p.add_argument("--no-noise", action="store_true", help="write expected counts instead of Poisson draws")

    p = sub.add_parser("scan-efficiency", parents=[common], help="conversion efficiency vs pressure")
    p.add_argument("--pressures", type=float, nargs="+", metavar="BAR")
    p.add_argument("--pressure-min", type=float)
    p.add_argument("--pressure-max", type=float)
    p.add_argument("--pressure-step", type=float)
    p.add_argument("--process", choices=("CARS", "CSRS", "both"), default="both")

    p = sub.add_parser("simulate-polarization", parents=[common], help="two-detector waveplate scans")
    p.add_argument("--basis", choices=(*polarization.BASES, "both"), default="both")
    p.add_argument("--preset", choices=sorted(polarization.PRESETS), help="optics imperfection preset")
    p.add_argument("--state", default="H", choices=sorted(polarization.STATES), help="input polarization")
    p.add_argument("--angles", type=float, nargs=3, metavar=("START", "STOP", "STEP"), help="angle grid in deg")
    p.add_argument("--no-noise", action="store_true")

    p = sub.add_parser("analyze", parents=[common], help="fit CSV data and write report.json")
    p.add_argument("inputs", nargs="+", help="CSV files or directories of CSV files")
    p.add_argument("--kind", required=True, choices=("spectrum", "pressure-series", "polarization"))
    p.add_argument("--basis", choices=polarization.BASES, help="scan basis when the CSV has no basis column")

    sub.add_parser("reproduce-paper", parents=[common],
                   help="simulate and analyze the full default experiment with figures and a summary table")
    return parser


def overrides_from(args):
    o = {}
    spec = {}
    for flag, key in (("pressures", "pressures_bar"), ("points", "points"), ("span", "span_linewidths"),
                      ("dwell", "dwell_s")):
        if args.command == "simulate-spectrum" and getattr(args, flag, None) is not None:
            spec[key] = getattr(args, flag)
    if getattr(args, "no_noise", False):
        spec["noise"] = False
    if spec:
        o["spectrum"] = spec
    eff = {k: getattr(args, k, None) for k in ("pressure_min", "pressure_max", "pressure_step")}
    eff = {k: v for k, v in eff.items() if v is not None}
    if eff:
        o["efficiency"] = eff
    if getattr(args, "preset", None):
        o["polarization"] = {"preset": args.preset}
    return o


def arguments_record(args):
    skip = {"config", "out", "inputs", "json_only", "seed"}
    rec = {k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None}
    rec["json_only"] = bool(args.json_only)
    return rec


COMMANDS = {
    "simulate-spectrum": cmd_simulate_spectrum,
    "scan-efficiency": lambda args, cfg, run: cmd_scan_efficiency(args, cfg, run) and EXIT_OK,
    "simulate-polarization": cmd_simulate_polarization,
    "analyze": cmd_analyze,
    "reproduce-paper": cmd_reproduce,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; 2 is reserved here for unconverged fits
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    try:
        cfg = config.resolve(args.config, overrides_from(args))
        run = Run(args.command, arguments_record(args), cfg, args.seed, args.out)
        code = COMMANDS[args.command](args, cfg, run)
        run.finish()
    except (ConfigError, CSVFormatError, DomainError) as exc:
        print(f"csrslab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return code


if __name__ == "__main__":
    sys.exit(main())
