"""
PNG figures for analysis outputs.

Figures are drawn on bare ``Figure`` objects with the Agg canvas (no pyplot
state) and saved without the software-version metadata, so identical data
give byte-identical files.
"""

import os

import numpy as np
from matplotlib import colormaps
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from . import fitting
from .experiment import REFERENCE_THZ

DPI = 110
COLORS = {"CARS": "tab:red", "CSRS": "tab:blue", "d1": "tab:blue", "d2": "tab:orange"}


def _figure(width=6.0, height=4.0):
    fig = Figure(figsize=(width, height))
    FigureCanvasAgg(fig)
    return fig


def _style(ax):
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    ax.tick_params(labelsize=8)
    ax.grid(alpha=0.2, linewidth=0.6)


def save(fig, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI, metadata={"Software": None})
    return path


def plot_spectra(path, channel, groups, fits=None):
    """Counts vs detuning, one trace per pressure; ``groups`` maps pressure -> (detuning_MHz, counts)."""
    fig = _figure(6.5, 4.5)
    ax = fig.add_subplot()
    ps = sorted(groups)
    colors = [colormaps["viridis"](i / max(len(ps) - 1, 1)) for i in range(len(ps))]
    for p, color in zip(ps, colors):
        x, y = groups[p]
        ax.plot(x, y, ".", ms=2.5, color=color, label=f"{p:g} bar")
        fit = (fits or {}).get(p)
        if fit is not None:
            xx = np.linspace(np.min(x), np.max(x), 400)
            ax.plot(xx, fitting.lorentzian(xx, *fit.values), "-", lw=0.9, color=color)
    ax.set_xlabel("pump difference detuning (MHz)", fontsize=9)
    ax.set_ylabel("counts", fontsize=9)
    ax.set_title(f"{channel} resonance scans", fontsize=10)
    ax.legend(fontsize=7, ncol=2, frameon=False)
    _style(ax)
    return save(fig, path)


def plot_centers(path, channels):
    """Resonance center vs pressure with the fitted line, per channel."""
    fig = _figure()
    ax = fig.add_subplot()
    for name, (p, centers_mhz, err, fit) in sorted(channels.items()):
        color = COLORS.get(name)
        ax.errorbar(p, centers_mhz, yerr=err, fmt="o", ms=3, color=color, label=name)
        if fit is not None and fit.converged:
            pp = np.linspace(0.0, max(p) * 1.05, 50)
            ax.plot(pp, fit["slope"] * pp + (fit["intercept"] - REFERENCE_THZ) * 1e6, "-", lw=0.9, color=color)
    ax.set_xlabel("pressure (bar)", fontsize=9)
    ax.set_ylabel(f"center - {REFERENCE_THZ:g} THz (MHz)", fontsize=9)
    ax.legend(fontsize=8, frameon=False)
    _style(ax)
    return save(fig, path)


def plot_widths(path, channels):
    """Linewidth vs pressure with the fitted A/p + B*p curve, per channel."""
    fig = _figure()
    ax = fig.add_subplot()
    for name, (p, widths, err, fit) in sorted(channels.items()):
        color = COLORS.get(name)
        ax.errorbar(p, widths, yerr=err, fmt="o", ms=3, color=color, label=name)
        if fit is not None and fit.converged:
            pp = np.linspace(min(p) * 0.8, max(p) * 1.05, 200)
            ax.plot(pp, fit["A"] / pp + fit["B"] * pp, "-", lw=0.9, color=color)
    ax.set_xlabel("pressure (bar)", fontsize=9)
    ax.set_ylabel("FWHM (MHz)", fontsize=9)
    ax.legend(fontsize=8, frameon=False)
    _style(ax)
    return save(fig, path)


def plot_efficiency(path, scans):
    """Normalized internal efficiency vs pressure; ``scans`` maps name -> EfficiencyScan."""
    fig = _figure()
    ax = fig.add_subplot()
    for name, scan in sorted(scans.items()):
        eta = scan.internal
        ax.plot(scan.pressures, eta / np.nanmax(eta), "-", lw=1.2, color=COLORS.get(name), label=name)
    ax.set_xlabel("pressure (bar)", fontsize=9)
    ax.set_ylabel("internal efficiency (normalized)", fontsize=9)
    ax.set_ylim(bottom=0)
    ax.legend(fontsize=8, frameon=False)
    _style(ax)
    return save(fig, path)


def plot_polarization(path, basis, angles, counts_d1, counts_d2, fits=None, period=None):
    fig = _figure()
    ax = fig.add_subplot()
    top = max(np.max(counts_d1), np.max(counts_d2), 1.0)
    for name, counts, fit in zip(("d1", "d2"), (counts_d1, counts_d2), fits or (None, None)):
        color = COLORS[name]
        ax.plot(angles, counts / top, "o", ms=3, color=color, label=name)
        if fit is not None and period:
            aa = np.linspace(np.min(angles), np.max(angles), 400)
            ax.plot(aa, fitting.sine(aa, *fit.values, period) / top, "-", lw=0.9, color=color)
    ax.set_xlabel("waveplate angle (deg)", fontsize=9)
    ax.set_ylabel("counts (normalized)", fontsize=9)
    ax.set_title(f"{basis} basis scan", fontsize=10)
    ax.legend(fontsize=8, frameon=False, loc="upper left", bbox_to_anchor=(1.0, 1.0))
    _style(ax)
    return save(fig, path)
