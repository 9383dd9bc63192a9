"""
Jones calculus for the signal preparation and analysis optics.

Conventions: angles in degrees, fast axis measured from horizontal,
counter-clockwise looking against the propagation direction. Jones vectors
are (H, V) amplitudes; right-circular is (1, -i)/sqrt(2), for which
S3 = +1.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

SQ2 = np.sqrt(2.0)
H = np.array([1.0, 0.0], dtype=complex)
V = np.array([0.0, 1.0], dtype=complex)
D = np.array([1.0, 1.0], dtype=complex) / SQ2
A = np.array([1.0, -1.0], dtype=complex) / SQ2
R = np.array([1.0, -1.0j], dtype=complex) / SQ2
L = np.array([1.0, 1.0j], dtype=complex) / SQ2
STATES = {"H": H, "V": V, "D": D, "A": A, "R": R, "L": L}

ELEMENT_KINDS = ("hwp", "qwp", "retarder", "polarizer", "rotator", "pbs")


def jones(vec):
    """Validate and return a complex 2-vector."""
    if isinstance(vec, str):
        try:
            return STATES[vec].copy()
        except KeyError:
            raise DomainError(f"unknown named state {vec!r}") from None
    v = np.asarray(vec, dtype=complex).reshape(2)
    if not np.any(np.abs(v) > 0):
        raise DomainError("Jones vector has zero norm")
    return v


def linear(angle_deg):
    t = np.radians(angle_deg)
    return np.array([np.cos(t), np.sin(t)], dtype=complex)


def _rot(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def retarder_matrix(retardance_deg, angle_deg):
    t = np.radians(angle_deg)
    phase = np.diag([1.0, np.exp(1j * np.radians(retardance_deg))])
    return _rot(t) @ phase @ _rot(-t)


@dataclass(frozen=True)
class OpticalElement:
    """One element of a polarization chain.

    ``retardance_deg`` overrides the nominal 180/90 degrees of a wave plate;
    ``extinction`` is the fraction of the crossed polarization a PBS port
    passes.
    """

    kind: str
    angle_deg: float = 0.0
    retardance_deg: float = None
    extinction: float = 0.0
    port: str = "H"

    def __post_init__(self):
        if self.kind not in ELEMENT_KINDS:
            raise DomainError(f"unknown element kind {self.kind!r}")
        if not 0.0 <= self.extinction <= 0.5:
            raise DomainError("extinction must be in [0, 0.5]")
        if self.port not in ("H", "V"):
            raise DomainError("PBS port must be 'H' or 'V'")
        if self.kind == "retarder" and self.retardance_deg is None:
            raise DomainError("a retarder needs retardance_deg")

    @classmethod
    def from_dict(cls, doc):
        return cls(
            kind=doc["kind"],
            angle_deg=float(doc.get("angle_deg", 0.0)),
            retardance_deg=None if doc.get("retardance_deg") is None else float(doc["retardance_deg"]),
            extinction=float(doc.get("extinction", 0.0)),
            port=doc.get("port", "H"),
        )

    def to_dict(self):
        doc = {"kind": self.kind, "angle_deg": self.angle_deg}
        if self.retardance_deg is not None:
            doc["retardance_deg"] = self.retardance_deg
        if self.kind == "pbs":
            doc["extinction"] = self.extinction
            doc["port"] = self.port
        return doc

    def matrix(self):
        t = np.radians(self.angle_deg)
        if self.kind in ("hwp", "qwp", "retarder"):
            nominal = {"hwp": 180.0, "qwp": 90.0}.get(self.kind)
            delta = self.retardance_deg if self.retardance_deg is not None else nominal
            return retarder_matrix(delta, self.angle_deg)
        if self.kind == "rotator":
            return _rot(t).astype(complex)
        if self.kind == "polarizer":
            return (_rot(t) @ np.diag([1.0, 0.0]) @ _rot(-t)).astype(complex)
        # pbs port: lossless splitter with leakage of the crossed polarization
        e = self.extinction
        amps = [np.sqrt(1 - e), np.sqrt(e)] if self.port == "H" else [np.sqrt(e), np.sqrt(1 - e)]
        return np.diag(amps).astype(complex)


def hwp(angle_deg, retardance_error=0.0, axis_error=0.0):
    return OpticalElement("hwp", angle_deg + axis_error, 180.0 + retardance_error)


def qwp(angle_deg, retardance_error=0.0, axis_error=0.0):
    return OpticalElement("qwp", angle_deg + axis_error, 90.0 + retardance_error)


def pbs_port(port, extinction=0.0):
    return OpticalElement("pbs", port=port, extinction=extinction)


def apply_chain(vec, chain=()):
    """Propagate a Jones vector through ``chain`` (first element met first)."""
    out = jones(vec)
    for element in chain:
        m = element.matrix() if isinstance(element, OpticalElement) else np.asarray(element)
        out = m @ out
    return out


def convert_polarization(vec, pump=None):
    """Polarization state of the converted photon.

    The Q-branch response of the isotropic gas is scalar, so the output state
    equals the input state; the pump polarization only sets the overall
    amplitude, which is not part of the returned state.
    """
    if pump is not None:
        jones(pump)
    v = jones(vec)
    return v / np.linalg.norm(v)


def stokes(vec):
    """(S0, S1, S2, S3) with S3 > 0 for right-circular light."""
    ex, ey = jones(vec)
    s0 = abs(ex) ** 2 + abs(ey) ** 2
    s1 = abs(ex) ** 2 - abs(ey) ** 2
    s2 = 2.0 * (np.conj(ex) * ey).real
    s3 = -2.0 * (np.conj(ex) * ey).imag
    return np.array([s0, s1, s2, s3])


@dataclass
class PolarizationScan:
    angles: np.ndarray  # deg
    counts_d1: np.ndarray
    counts_d2: np.ndarray
    label: str = ""
    period: float = 90.0
    meta: dict = field(default_factory=dict)


def port_probabilities(vec, chain, extinction=0.0):
    """Detection probabilities behind the two PBS ports after ``chain``."""
    out = apply_chain(vec, chain)
    norm = np.vdot(jones(vec), jones(vec)).real
    p1 = np.linalg.norm(pbs_port("H", extinction).matrix() @ out) ** 2 / norm
    p2 = np.linalg.norm(pbs_port("V", extinction).matrix() @ out) ** 2 / norm
    return p1, p2


def simulate_scan(vec, chain_at, angles, amplitude, background=0.0, extinction=0.0, label="", period=90.0):
    """Expected (noise-free) counts on both PBS detectors over a scan.

    ``chain_at(theta)`` returns the optics between the (converted) state and
    the PBS for element angle ``theta``; signal-side elements should be
    applied by the caller or included in the chain since conversion is the
    identity. ``background`` is a scalar or a (d1, d2) pair of counts.
    """
    if amplitude < 0:
        raise DomainError("amplitude must be nonnegative")
    b1, b2 = (background, background) if np.isscalar(background) else background
    if b1 < 0 or b2 < 0:
        raise DomainError("background must be nonnegative")
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    d1 = np.empty_like(angles)
    d2 = np.empty_like(angles)
    for i, theta in enumerate(angles):
        p1, p2 = port_probabilities(vec, chain_at(theta), extinction)
        d1[i] = amplitude * p1 + b1
        d2[i] = amplitude * p2 + b2
    return PolarizationScan(angles, d1, d2, label, period)


def contrast(amplitude, offset, tolerance=None):
    """Visibility (max - min)/(max + min) = amplitude/offset of a fitted sine.

    An offset below the amplitude implies negative counts and is rejected
    unless the excess is within ``tolerance`` (default: rounding level), in
    which case the ratio is returned unclipped.
    """
    if amplitude < 0:
        raise DomainError("amplitude must be nonnegative")
    tol = 1e-9 * abs(offset) if tolerance is None else tolerance
    if offset <= 0 or amplitude - offset > tol:
        raise DomainError(f"offset {offset} below amplitude {amplitude}: negative counts implied")
    return amplitude / offset


def fidelity(contrasts):
    """Mean of the four basis-scan contrasts."""
    values = [float(c) for c in contrasts]
    if len(values) != 4:
        raise DomainError(f"fidelity needs exactly four contrasts, got {len(values)}")
    if any(not 0.0 <= c <= 1.0 for c in values):
        raise DomainError("contrasts must lie in [0, 1]")
    return sum(values) / 4.0


# --- basis scans -----------------------------------------------------------------

BASES = ("linear", "circular")
SCAN_PERIOD = {"linear": 90.0, "circular": 180.0}


@dataclass(frozen=True)
class Imperfections:
    """Non-ideal optics and per-detector background.

    Retardance and axis errors in degrees. Backgrounds are count levels
    relative to the scan amplitude (leakage light, dark counts).
    """

    name: str = "ideal"
    hwp_retardance_error: float = 0.0
    hwp_axis_error: float = 0.0
    prep_qwp_retardance_error: float = 0.0
    qwp_retardance_error: float = 0.0
    qwp_axis_error: float = 0.0
    extinction: float = 0.0
    background_d1: float = 0.0
    background_d2: float = 0.0

    def replace(self, **changes):
        fields = dict(self.__dict__)
        fields.update(changes)
        return Imperfections(**fields)


IDEAL = Imperfections()
PAPER_LIKE = Imperfections(
    name="paper-like",
    hwp_retardance_error=4.0,
    hwp_axis_error=0.2,
    prep_qwp_retardance_error=14.0,
    qwp_retardance_error=14.0,
    qwp_axis_error=0.3,
    extinction=0.002,
    background_d1=0.003,
    background_d2=0.0743,
)
PRESETS = {"ideal": IDEAL, "paper-like": PAPER_LIKE}


def prepared_input(basis, imperfections=IDEAL, state="H"):
    """Signal state entering the cell for a basis scan.

    The linear scan starts from ``state`` (a named state or vector) and
    rotates it with the scanned half-wave plate; the circular scan turns
    ``state`` circular with a quarter-wave plate at 45 degrees.
    """
    v = jones(state)
    if basis == "circular":
        v = apply_chain(v, [qwp(45.0, imperfections.prep_qwp_retardance_error)])
    elif basis != "linear":
        raise DomainError(f"unknown basis {basis!r}; expected one of {BASES}")
    return v


def scan_chain(basis, imperfections=IDEAL):
    """theta -> element list. Linear: signal-side HWP; circular: analyzer QWP."""
    if basis == "linear":
        return lambda theta: [hwp(theta, imperfections.hwp_retardance_error, imperfections.hwp_axis_error)]
    if basis == "circular":
        return lambda theta: [qwp(theta, imperfections.qwp_retardance_error, imperfections.qwp_axis_error)]
    raise DomainError(f"unknown basis {basis!r}; expected one of {BASES}")


def simulate_basis_scan(basis, angles, amplitude, imperfections=IDEAL, state="H"):
    """Expected counts for one basis scan including conversion (identity) and backgrounds."""
    vin = prepared_input(basis, imperfections, state)
    if basis == "linear":
        # the scanned HWP acts on the signal before conversion
        chain_at = scan_chain(basis, imperfections)

        def full_chain(theta):
            return chain_at(theta)
    else:
        full_chain = scan_chain(basis, imperfections)
    converted = convert_polarization(vin)
    backgrounds = (imperfections.background_d1 * amplitude, imperfections.background_d2 * amplitude)
    scan = simulate_scan(converted, full_chain, angles, amplitude, backgrounds, imperfections.extinction,
                         label=basis, period=SCAN_PERIOD[basis])
    scan.meta.update({"preset": imperfections.name, "input_stokes": stokes(vin).tolist()})
    return scan


def expected_phases(basis, state="H"):
    """Sine phases (deg) of detectors 1 and 2 for ideal optics.

    Linear scan, input linear at angle alpha: d1 ~ cos^2(2 theta - alpha),
    phase alpha/2 - 22.5 mod 90. Circular scan with analyzer QWP: d1 ~
    (1 - s3 sin 2theta)/2 for input S3 = s3 = +-1, phase 90 (R) or 0 (L).
    """
    period = SCAN_PERIOD[basis]
    s = stokes(jones(state))
    if basis == "linear":
        alpha = 0.5 * np.degrees(np.arctan2(s[2], s[1]))
        p1 = (alpha / 2.0 - 22.5) % period
    else:
        # the prepared input is circular; handedness follows from the preparation QWP at 45 deg
        s3 = stokes(prepared_input("circular", IDEAL, state))[3]
        p1 = 90.0 if s3 > 0 else 0.0
    return p1, (p1 + period / 2.0) % period
