import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from csrslab import config, experiment, fitting
from csrslab import polarization as pol
from csrslab.errors import DomainError

angles = st.floats(0.0, 360.0)
complex_pairs = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(
    lambda t: sum(x * x for x in t) > 1e-3)


def same_state(a, b):
    a, b = pol.jones(a), pol.jones(b)
    return abs(abs(np.vdot(a, b)) - np.linalg.norm(a) * np.linalg.norm(b)) < 1e-12


def test_apply_chain_examples():
    assert same_state(pol.apply_chain("H", [pol.hwp(0.0)]), pol.H)
    assert same_state(pol.apply_chain("H", [pol.hwp(22.5)]), pol.D)
    out = pol.apply_chain("H", [pol.qwp(45.0)])
    assert abs(pol.stokes(out)[3]) == pytest.approx(1.0, abs=1e-12)
    assert same_state(out, pol.R)
    assert same_state(pol.apply_chain("D", []), pol.D)


def test_stokes_examples():
    assert np.allclose(pol.stokes("H"), [1, 1, 0, 0])
    assert np.allclose(pol.stokes("D"), [1, 0, 1, 0])
    assert np.allclose(pol.stokes("R"), [1, 0, 0, 1])
    assert np.allclose(pol.stokes("L"), [1, 0, 0, -1])


@given(complex_pairs)
def test_stokes_pure_state(t):
    s = pol.stokes(np.array([t[0] + 1j * t[1], t[2] + 1j * t[3]]))
    assert s[0] ** 2 == pytest.approx(s[1] ** 2 + s[2] ** 2 + s[3] ** 2, rel=1e-12)


def test_conversion_is_identity():
    for name in ("D", "R"):
        assert same_state(pol.convert_polarization(name, pump="H"), pol.STATES[name])


@given(complex_pairs)
def test_conversion_preserves_stokes(t):
    v = np.array([t[0] + 1j * t[1], t[2] + 1j * t[3]])
    s_in, s_out = pol.stokes(v), pol.stokes(pol.convert_polarization(v, pump="V"))
    assert np.allclose(s_out[1:] / s_out[0], s_in[1:] / s_in[0], atol=1e-12)


def test_jones_rejects_null_vector():
    with pytest.raises(DomainError):
        pol.jones([0, 0])


@given(complex_pairs, angles, angles, st.floats(-20, 20))
def test_unitary_chains_preserve_norm(t, a1, a2, err):
    v = np.array([t[0] + 1j * t[1], t[2] + 1j * t[3]])
    chain = [pol.hwp(a1, err), pol.qwp(a2, err), pol.OpticalElement("rotator", angle_deg=a1),
             pol.OpticalElement("retarder", angle_deg=a2, retardance_deg=37.0)]
    assert np.linalg.norm(pol.apply_chain(v, chain)) == pytest.approx(np.linalg.norm(v), rel=1e-12)
    for el in chain:
        m = el.matrix()
        assert np.allclose(m.conj().T @ m, np.eye(2), atol=1e-12)


def test_projectors_are_not_unitary():
    for el in (pol.OpticalElement("polarizer", angle_deg=30.0), pol.pbs_port("H", 0.01)):
        m = el.matrix()
        assert not np.allclose(m.conj().T @ m, np.eye(2))


@given(complex_pairs, angles)
def test_lossless_pbs_complete(t, theta):
    v = np.array([t[0] + 1j * t[1], t[2] + 1j * t[3]])
    p1, p2 = pol.port_probabilities(v, [pol.hwp(theta)])
    assert p1 + p2 == pytest.approx(1.0, rel=1e-12)


def test_element_dict_roundtrip():
    el = pol.OpticalElement("retarder", angle_deg=12.0, retardance_deg=80.0)
    assert pol.OpticalElement.from_dict(el.to_dict()) == el
    with pytest.raises(DomainError):
        pol.OpticalElement("mirror")
    with pytest.raises(DomainError):
        pol.pbs_port("H", extinction=0.7)


def test_hwp_scan_malus_and_period():
    theta = np.arange(0.0, 180.0, 2.5)
    scan = pol.simulate_scan("H", lambda t: [pol.hwp(t)], theta, amplitude=1000.0)
    assert np.allclose(scan.counts_d1, 1000.0 * np.cos(np.radians(2 * theta)) ** 2)
    shifted = pol.simulate_scan("H", lambda t: [pol.hwp(t)], theta + 90.0, amplitude=1000.0)
    assert np.allclose(scan.counts_d1, shifted.counts_d1, rtol=1e-12)


def test_background_contrast_closed_form():
    theta = np.arange(0.0, 90.0, 0.5)
    scan = pol.simulate_scan("H", lambda t: [pol.hwp(t)], theta, amplitude=1.0, background=0.05)
    c = (scan.counts_d1.max() - scan.counts_d1.min()) / (scan.counts_d1.max() + scan.counts_d1.min())
    assert c == pytest.approx(1.0 / 1.1, rel=1e-9)
    assert c == pytest.approx(0.9091, abs=1e-4)


def test_single_angle_scan():
    scan = pol.simulate_scan("D", lambda t: [pol.hwp(t)], [17.0], amplitude=500.0, background=3.0)
    assert scan.counts_d1.size == 1
    assert scan.counts_d1[0] + scan.counts_d2[0] == pytest.approx(506.0)


def test_scan_input_validation():
    with pytest.raises(DomainError):
        pol.simulate_scan("H", lambda t: [], [0.0], amplitude=-1.0)
    with pytest.raises(DomainError):
        pol.simulate_scan("H", lambda t: [], [0.0], amplitude=1.0, background=-1.0)


def test_contrast_examples():
    assert pol.contrast(5.0, 5.0) == 1.0
    assert pol.contrast(0.0, 5.0) == 0.0
    assert pol.contrast(0.791, 1.0) == pytest.approx(0.791)
    assert pol.contrast(0.993, 1.0) == pytest.approx(0.993)
    with pytest.raises(DomainError):
        pol.contrast(6.0, 5.0)
    with pytest.raises(DomainError):
        pol.contrast(1.0, 0.0)


def test_fidelity_examples():
    assert pol.fidelity([0.904] * 4) == pytest.approx(0.904)
    assert pol.fidelity([1, 1, 1, 1]) == 1.0
    assert 0.791 <= pol.fidelity([0.791, 0.993, 0.9, 0.932]) <= 0.993
    with pytest.raises(DomainError):
        pol.fidelity([1, 1, 1])
    with pytest.raises(DomainError):
        pol.fidelity([1, 1, 1, 1.2])


@pytest.mark.parametrize("basis, state", [("linear", "H"), ("linear", "V"), ("linear", "D"),
                                          ("circular", "H"), ("circular", "V")])
def test_ideal_basis_scan_phases(basis, state):
    period = pol.SCAN_PERIOD[basis]
    theta = np.arange(0.0, 2 * period, period / 36)
    scan = pol.simulate_basis_scan(basis, theta, 1e4, pol.IDEAL, state)
    expected = pol.expected_phases(basis, state)
    for counts, phase in zip((scan.counts_d1, scan.counts_d2), expected):
        fit = fitting.fit_sine(theta, counts, period, sigma=np.ones_like(counts))
        assert fitting.phase_difference(fit["phase"], phase, period) == pytest.approx(0.0, abs=1e-6)
        assert fit["amplitude"] / fit["offset"] == pytest.approx(1.0, abs=1e-9)


def test_detector_phases_half_period_apart():
    theta = np.arange(0.0, 90.0, 5.0)
    scan = pol.simulate_basis_scan("linear", theta, 1e4)
    f1, f2 = (fitting.fit_sine(theta, c, 90.0, sigma=np.ones_like(c)) for c in (scan.counts_d1, scan.counts_d2))
    assert abs(fitting.phase_difference(f1["phase"], f2["phase"], 90.0)) == pytest.approx(45.0, abs=1e-6)


def test_imperfect_preset_contrasts():
    setup = experiment.Setup.from_config(config.resolve(environ={}))
    contrasts = []
    for basis in pol.BASES:
        scan = experiment.simulate_polarization(setup, basis, preset="paper-like", noise=False)
        res = experiment.analyze_scan(scan.angles, scan.counts_d1, scan.counts_d2, pol.SCAN_PERIOD[basis], basis)
        contrasts.extend(res.contrasts)
    assert all(0.78 <= c <= 1.0 for c in contrasts)
    assert pol.fidelity(contrasts) == pytest.approx(0.904, abs=0.01)


def test_unknown_basis():
    with pytest.raises(DomainError):
        pol.simulate_basis_scan("elliptic", [0.0], 1.0)
