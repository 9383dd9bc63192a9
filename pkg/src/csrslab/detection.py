"""
Photon-counting chain: quantum efficiency, dark counts, non-paralyzable dead
time, Poisson sampling and background estimation.

When a detector and the counting electronics both have a dead time, the
larger of the two is taken to govern the loss.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SaturationError

COUNTER_DEAD_TIME_NS = 6.0


@dataclass(frozen=True)
class DetectorSpec:
    name: str
    quantum_efficiency: float = 1.0
    dead_time_ns: float = 0.0
    dark_rate: float = 0.0  # counts/s

    def __post_init__(self):
        if not 0.0 <= self.quantum_efficiency <= 1.0:
            raise DomainError(f"{self.name}: quantum efficiency {self.quantum_efficiency} outside [0, 1]")
        if self.dead_time_ns < 0 or self.dark_rate < 0:
            raise DomainError(f"{self.name}: dead time and dark rate must be nonnegative")

    @classmethod
    def from_dict(cls, doc):
        return cls(
            name=str(doc["name"]),
            quantum_efficiency=float(doc.get("quantum_efficiency", 1.0)),
            dead_time_ns=float(doc.get("dead_time_ns", 0.0)),
            dark_rate=float(doc.get("dark_rate", 0.0)),
        )

    def to_dict(self):
        return {
            "name": self.name,
            "quantum_efficiency": self.quantum_efficiency,
            "dead_time_ns": self.dead_time_ns,
            "dark_rate": self.dark_rate,
        }


APD = DetectorSpec("APD", quantum_efficiency=0.125, dead_time_ns=100.0)
PMT = DetectorSpec("PMT", quantum_efficiency=0.045)
PRESETS = {"APD": APD, "PMT": PMT}


@dataclass(frozen=True)
class CountRecord:
    duration: float  # s
    counts: int
    detector_name: str = ""

    def __post_init__(self):
        if self.counts < 0 or not self.duration > 0:
            raise DomainError("count record needs counts >= 0 and a positive duration")

    @property
    def rate(self):
        return self.counts / self.duration

    @property
    def rate_uncertainty(self):
        return np.sqrt(self.counts) / self.duration


@dataclass(frozen=True)
class BackgroundEstimate:
    rate: float
    uncertainty: float
    compatible_with_zero: bool


def effective_dead_time_ns(spec, counter_dead_time_ns=COUNTER_DEAD_TIME_NS):
    return max(spec.dead_time_ns, counter_dead_time_ns)


def observed_rate(true_rate, spec, counter_dead_time_ns=COUNTER_DEAD_TIME_NS):
    """Registered count rate for a photon flux ``true_rate`` (1/s) hitting the detector."""
    r = np.asarray(true_rate, dtype=float)
    if np.any(r < 0):
        raise DomainError("true rate must be nonnegative")
    tau = effective_dead_time_ns(spec, counter_dead_time_ns) * 1e-9
    detected = spec.quantum_efficiency * r + spec.dark_rate
    out = detected / (1.0 + detected * tau)
    return float(out) if out.ndim == 0 else out


def dead_time_correct(observed, dead_time_ns):
    """Invert the non-paralyzable dead-time loss: r = r_obs / (1 - r_obs * tau)."""
    r = np.asarray(observed, dtype=float)
    tau = dead_time_ns * 1e-9
    if np.any(r < 0):
        raise DomainError("observed rate must be nonnegative")
    if tau > 0 and np.any(r * tau >= 1.0):
        raise SaturationError(f"observed rate {observed} at or beyond saturation 1/tau = {1 / tau:.6g} /s")
    out = r / (1.0 - r * tau)
    return float(out) if out.ndim == 0 else out


def _generator(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_counts(rate, duration, seed=None, detector_name=""):
    """Poisson count record with mean ``rate * duration``.

    ``seed`` may be an int, a SeedSequence or an existing Generator.
    """
    if rate < 0:
        raise DomainError("rate must be nonnegative")
    counts = int(_generator(seed).poisson(rate * duration)) if rate > 0 else 0
    return CountRecord(duration, counts, detector_name)


def background_estimate(records, threshold_sigma=2.0):
    """Pooled background rate from pumps-only records.

    The uncertainty uses sqrt(max(counts, 1)) so that an all-zero record set
    still carries a one-count upper estimate.
    """
    records = list(records)
    if not records:
        raise DomainError("no background records supplied")
    total_t = sum(r.duration for r in records)
    if not total_t > 0:
        raise DomainError("total background duration is zero")
    total_n = sum(r.counts for r in records)
    rate = total_n / total_t
    sigma = np.sqrt(max(total_n, 1)) / total_t
    return BackgroundEstimate(rate, float(sigma), bool(abs(rate) < threshold_sigma * sigma))
