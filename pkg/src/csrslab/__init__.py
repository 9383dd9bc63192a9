"""
Simulation and analysis of resonant four-wave-mixing frequency conversion in
pressurized hydrogen: gas dispersion, Raman lineshape, phase-matched
conversion efficiency, polarization transfer, photon counting and fitting.
"""

__version__ = "0.1.0"
