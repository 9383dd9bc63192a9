import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from csrslab import detection as det
from csrslab.errors import DomainError, SaturationError

IDEAL = det.DetectorSpec("ideal")


def test_builtin_presets():
    assert det.APD.quantum_efficiency == 0.125 and det.APD.dead_time_ns == 100.0
    assert det.PMT.quantum_efficiency == 0.045
    assert det.COUNTER_DEAD_TIME_NS == 6.0
    assert det.effective_dead_time_ns(det.APD) == 100.0
    assert det.effective_dead_time_ns(det.PMT) == 6.0


def test_spec_validation_and_roundtrip():
    with pytest.raises(DomainError):
        det.DetectorSpec("x", quantum_efficiency=1.5)
    with pytest.raises(DomainError):
        det.DetectorSpec("x", dead_time_ns=-1.0)
    assert det.DetectorSpec.from_dict(det.APD.to_dict()) == det.APD


def test_observed_rate_examples():
    assert det.observed_rate(1234.5, IDEAL, counter_dead_time_ns=0.0) == 1234.5
    spec = det.DetectorSpec("d", dead_time_ns=100.0)
    assert det.observed_rate(1e6, spec) == pytest.approx(9.0909e5, rel=1e-5)
    dark = det.DetectorSpec("d", dark_rate=50.0, dead_time_ns=100.0)
    assert det.observed_rate(0.0, dark) == pytest.approx(50.0 / (1 + 50.0 * 100e-9))
    assert det.observed_rate(0.0, dark) == pytest.approx(50.0, rel=1e-5)


def test_dead_time_correct_examples():
    assert det.dead_time_correct(9.0909090909e5, 100.0) == pytest.approx(1e6, rel=1e-9)
    assert det.dead_time_correct(777.0, 0.0) == 777.0
    with pytest.raises(SaturationError):
        det.dead_time_correct(1e7, 100.0)
    with pytest.raises(DomainError):
        det.dead_time_correct(-1.0, 100.0)


@given(st.floats(0.0, 0.5), st.floats(6.0, 1000.0))
def test_roundtrip_identity(rt, tau_ns):
    # at or above the 6 ns counter dead time the detector value is the effective one
    spec = det.DetectorSpec("d", dead_time_ns=tau_ns)
    r = rt / (tau_ns * 1e-9)
    back = det.dead_time_correct(det.observed_rate(r, spec), tau_ns)
    assert back == pytest.approx(r, rel=1e-9, abs=1e-300)


@given(st.floats(0.0, 1e9), st.floats(0.0, 1e9))
def test_observed_rate_monotone_and_bounded(a, b):
    lo, hi = sorted((a, b))
    assert det.observed_rate(lo, det.APD) <= det.observed_rate(hi, det.APD)
    assert det.observed_rate(hi, det.APD) < 1.0 / 100e-9


def test_observed_rate_rejects_negative():
    with pytest.raises(DomainError):
        det.observed_rate(-1.0, det.APD)


def test_sample_counts_examples():
    assert all(det.sample_counts(0.0, 10.0, seed=s).counts == 0 for s in range(5))
    assert det.sample_counts(50.0, 2.0, seed=3) == det.sample_counts(50.0, 2.0, seed=3)
    rng = np.random.default_rng(11)
    counts = np.array([det.sample_counts(100.0, 1.0, seed=rng).counts for _ in range(10_000)])
    assert abs(counts.mean() - 100.0) < 3 * 10.0 / 100.0
    assert 0.9 <= counts.var(ddof=1) / counts.mean() <= 1.1


def test_count_record():
    rec = det.CountRecord(120.0, 120, "APD")
    assert rec.rate == 1.0
    assert rec.rate_uncertainty == pytest.approx(np.sqrt(120) / 120)
    with pytest.raises(DomainError):
        det.CountRecord(0.0, 1)
    with pytest.raises(DomainError):
        det.CountRecord(1.0, -1)


def test_background_estimate_examples():
    est = det.background_estimate([det.CountRecord(120.0, 0)])
    assert est.rate == 0.0
    assert est.uncertainty == pytest.approx(0.0083, abs=1e-4)
    assert est.compatible_with_zero
    est = det.background_estimate([det.CountRecord(120.0, 120)])
    assert est.rate == pytest.approx(1.0)
    assert est.uncertainty == pytest.approx(0.091, abs=1e-3)
    assert not est.compatible_with_zero
    with pytest.raises(DomainError):
        det.background_estimate([])


def test_background_pools_records():
    est = det.background_estimate([det.CountRecord(60.0, 2), det.CountRecord(60.0, 1)])
    assert est.rate == pytest.approx(3 / 120)
    assert est.uncertainty == pytest.approx(np.sqrt(3) / 120)
