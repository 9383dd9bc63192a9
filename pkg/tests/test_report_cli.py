import csv
import json
import os

import jsonschema
import numpy as np
import pytest

from csrslab import cli, csvio, experiment, fitting, report
from csrslab.detection import CountRecord
from csrslab.lineshape import ProcessKind


def rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def run(tmp_path, *argv, out="out"):
    return cli.main([*argv, "--out", str(tmp_path / out)])


@pytest.fixture(scope="module")
def series(tmp_path_factory):
    d = tmp_path_factory.mktemp("series")
    assert cli.main(["simulate-spectrum", "--out", str(d), "--seed", "3"]) == 0
    return d


def test_simulate_spectrum_files_and_rows(tmp_path):
    assert run(tmp_path, "simulate-spectrum", "--pressures", "2", "8", "--points", "100") == 0
    files = sorted(os.listdir(tmp_path / "out" / "spectra"))
    assert files == ["spectrum_002.000bar.csv", "spectrum_008.000bar.csv"]
    for name in files:
        r = rows(tmp_path / "out" / "spectra" / name)
        assert len(r) == 200
        assert list(r[0]) == list(csvio.SPECTRUM_COLUMNS)
        assert {x["channel"] for x in r} == {"CARS", "CSRS"}


def test_noiseless_spectrum_is_lorentzian(tmp_path):
    assert run(tmp_path, "simulate-spectrum", "--pressures", "6", "--points", "80", "--no-noise") == 0
    groups = csvio.read_spectra(tmp_path / "out" / "spectra" / "spectrum_006.000bar.csv")
    for (channel, p), g in groups.items():
        fit = fitting.fit_lorentzian(g["frequency_thz"] * 1e6, g["counts"], 1.0)
        model = fitting.lorentzian(g["frequency_thz"] * 1e6, *fit.values)
        # frequencies are stored to 1 kHz
        assert np.max(np.abs(model - g["counts"])) <= 1e-5 * g["counts"].max()


def test_detuning_range_flag(tmp_path):
    assert run(tmp_path, "simulate-spectrum", "--pressures", "4", "--points", "11",
               "--detuning-range", "-500", "500", "--no-noise") == 0
    g = csvio.read_spectra(tmp_path / "out" / "spectra" / "spectrum_004.000bar.csv")
    assert all(v["counts"].size == 11 for v in g.values())


def test_spectrum_csv_roundtrip(tmp_path):
    setup = experiment.Setup.from_config(cli.config.resolve(environ={}))
    freqs = experiment.spectrum_grid(setup, 5.0, 30, 4.0)
    spectra = [experiment.simulate_spectrum(setup, k, 5.0, freqs, 10.0, np.random.default_rng(1), True)
               for k in experiment.KINDS]
    path = tmp_path / "s.csv"
    csvio.write_spectra(path, spectra)
    back = csvio.read_spectra(path)
    for s in spectra:
        g = back[s.kind.value, 5.0]
        assert np.array_equal(g["counts"], s.counts)
        assert np.allclose(g["frequency_thz"], s.frequency_thz, rtol=0, atol=1e-9)


def test_count_record_roundtrip(tmp_path):
    recs = [CountRecord(120.0, 0, "APD"), CountRecord(60.0, 7, "PMT")]
    csvio.write_count_records(tmp_path / "c.csv", recs)
    assert csvio.read_count_records(tmp_path / "c.csv") == recs


def test_analyze_pressure_series_report(series, tmp_path):
    assert run(tmp_path, "analyze", str(series / "spectra"), "--kind", "pressure-series") == 0
    out = tmp_path / "out"
    doc = json.loads((out / "report.json").read_text())
    jsonschema.validate(doc, report.schema())
    assert doc["schema_version"] == report.SCHEMA_VERSION
    assert set(doc["processes"]) == {"CARS", "CSRS"}
    csrs = doc["processes"]["CSRS"]
    assert csrs["shift_MHz_per_bar"]["value"] == pytest.approx(-93.0, abs=4 * csrs["shift_MHz_per_bar"]["stat"] + 1)
    assert csrs["nu0_THz"]["sys"] == 0.0
    b = csrs["broadening_B_MHz_per_bar"]
    assert b["sys"] == pytest.approx(0.01 * abs(b["value"]))
    assert doc["polarization"]["fidelity"] is None
    assert (out / "fits_spectra.csv").exists()
    assert any(name.endswith(".png") for name in os.listdir(out / "figures"))


def test_analyze_polarization_fidelity(tmp_path):
    assert run(tmp_path, "simulate-polarization", out="sim") == 0
    sim = tmp_path / "sim"
    assert run(tmp_path, "analyze", str(sim / "polarization_linear.csv"), str(sim / "polarization_circular.csv"),
               "--kind", "polarization") == 0
    doc = json.loads((tmp_path / "out" / "report.json").read_text())
    assert len(doc["polarization"]["scans"]) == 2
    assert doc["polarization"]["fidelity"]["value"] == pytest.approx(0.904, abs=0.03)
    assert run(tmp_path, "analyze", str(sim / "polarization_linear.csv"), "--kind", "polarization",
               "--json-only", out="one") == 0
    doc = json.loads((tmp_path / "one" / "report.json").read_text())
    assert doc["polarization"]["fidelity"] is None


def test_json_only_prints_report(series, tmp_path, capsys):
    capsys.readouterr()
    assert run(tmp_path, "analyze", str(series / "spectra"), "--kind", "spectrum", "--json-only") == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed == json.loads((tmp_path / "out" / "report.json").read_text())
    names = set(os.listdir(tmp_path / "out"))
    assert names == {"report.json", "config.json", "manifest.json"}


def test_manifest_contents(series, tmp_path):
    assert run(tmp_path, "analyze", str(series / "spectra"), "--kind", "spectrum", "--json-only", "--seed", "9") == 0
    m = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert m["command"] == "analyze" and m["seed"] == 9
    assert m["config_hash"] == cli.config.config_hash(json.loads((tmp_path / "out" / "config.json").read_text()))
    assert m["tool_version"]
    assert "report.json" in m["outputs"] and len(m["inputs"]) == 8
    assert m["outputs"]["report.json"] == cli.sha256(tmp_path / "out" / "report.json")


def test_deterministic_outputs(tmp_path, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    for out in ("a", "b"):
        assert run(tmp_path, "simulate-spectrum", "--pressures", "3", "--points", "20", "--seed", "5", out=out) == 0
    for rel in ("manifest.json", "config.json", "spectra/spectrum_003.000bar.csv"):
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_seed_changes_noise(tmp_path):
    for out, seed in (("a", "1"), ("b", "2")):
        assert run(tmp_path, "simulate-spectrum", "--pressures", "3", "--points", "20", "--seed", seed, out=out) == 0
    rel = "spectra/spectrum_003.000bar.csv"
    assert (tmp_path / "a" / rel).read_bytes() != (tmp_path / "b" / rel).read_bytes()


def test_scan_efficiency_csv(tmp_path):
    assert run(tmp_path, "scan-efficiency", "--pressures", "2", "8", "12.5", "--process", "CSRS") == 0
    r = rows(tmp_path / "out" / "efficiency_CSRS.csv")
    assert list(r[0]) == list(csvio.EFFICIENCY_COLUMNS)
    assert float(r[2]["eta_internal"]) == pytest.approx(1.1e-9, rel=1e-9)
    assert max(float(x["normalized"]) for x in r) == 1.0


def test_exit_code_unconverged(tmp_path, capsys):
    path = tmp_path / "flat.csv"
    csvio.write_rows(path, ("pressure_bar", "detuning_MHz", "counts", "duration_s"),
                     [(5.0, d, 10, 1.0) for d in np.linspace(-100, 100, 21)])
    assert run(tmp_path, "analyze", str(path), "--kind", "spectrum", "--json-only") == cli.EXIT_NOT_CONVERGED
    doc = json.loads(capsys.readouterr().out)
    assert doc["converged"] is False
    assert doc["spectra"][0]["status"] == "no-peak"


def test_exit_code_bad_csv(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("pressure_bar,detuning_MHz,counts,duration_s\n5,0,10,1\n5,1,ten,1\n")
    assert run(tmp_path, "analyze", str(path), "--kind", "spectrum") == cli.EXIT_INPUT
    err = capsys.readouterr().err
    assert "row 3" in err and "counts" in err


def test_exit_code_missing_column(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("pressure_bar,counts\n5,10\n")
    assert run(tmp_path, "analyze", str(path), "--kind", "spectrum") == cli.EXIT_INPUT


def test_exit_code_bad_arguments_and_config(tmp_path, capsys):
    assert cli.main(["no-such-command"]) == cli.EXIT_INPUT
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"spectrum": {"bogus": 1}}')
    assert run(tmp_path, "simulate-spectrum", "--config", str(cfg)) == cli.EXIT_INPUT
    assert "spectrum.bogus" in capsys.readouterr().err


def test_global_flags_after_subcommand(tmp_path):
    assert cli.main(["--seed", "4", "simulate-polarization", "--basis", "linear", "--out", str(tmp_path / "x")]) == 0
    m = json.loads((tmp_path / "x" / "manifest.json").read_text())
    assert m["seed"] == 4


def test_report_requires_fits():
    with pytest.raises(ValueError):
        report.analysis_report()


def test_report_schema_rejects_extra_keys(series):
    groups = cli.read_spectrum_files(cli.expand_inputs([str(series / "spectra")]))
    channels, entries, _ = cli.analyze_spectra(groups, True)
    doc = report.analysis_report(channels, entries)
    doc["extra"] = 1
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(doc, report.schema())
    assert ProcessKind.CARS.value in doc["processes"]


def test_ideal_preset_fidelity_tolerates_noise_above_one(tmp_path):
    assert run(tmp_path, "simulate-polarization", "--preset", "ideal", out="sim") == 0
    sim = tmp_path / "sim"
    assert run(tmp_path, "analyze", str(sim), "--kind", "polarization", "--json-only") == 0
    doc = json.loads((tmp_path / "out" / "report.json").read_text())
    assert doc["polarization"]["fidelity"]["value"] == pytest.approx(1.0, abs=0.005)
    assert doc["polarization"]["fidelity"]["value"] <= 1.0
