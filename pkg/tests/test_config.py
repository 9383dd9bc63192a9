import json

import pytest

from csrslab import config
from csrslab.errors import ConfigError


def write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=2))
    return path


def test_defaults_when_nothing_given():
    doc = config.resolve(environ={})
    assert doc == config.DEFAULTS
    assert doc is not config.DEFAULTS


def test_file_overrides_defaults(tmp_path):
    path = write(tmp_path, {"temperature_K": 300.0, "spectrum": {"points": 50}})
    doc = config.resolve(path, environ={})
    assert doc["temperature_K"] == 300.0
    assert doc["spectrum"]["points"] == 50
    assert doc["spectrum"]["dwell_s"] == config.DEFAULTS["spectrum"]["dwell_s"]


def test_precedence_defaults_env_file_overrides(tmp_path):
    env_file = write(tmp_path, {"temperature_K": 280.0, "spectrum": {"points": 40}}, "env.json")
    explicit = write(tmp_path, {"temperature_K": 290.0}, "explicit.json")
    env = {config.ENV_VAR: str(env_file)}
    assert config.resolve(environ=env)["temperature_K"] == 280.0
    doc = config.resolve(explicit, environ=env)
    assert doc["temperature_K"] == 290.0
    assert doc["spectrum"]["points"] == config.DEFAULTS["spectrum"]["points"]
    doc = config.resolve(explicit, overrides={"temperature_K": 310.0}, environ=env)
    assert doc["temperature_K"] == 310.0


def test_unknown_key_reports_line(tmp_path):
    path = write(tmp_path, {"spectrum": {"points": 10, "pointz": 3}})
    with pytest.raises(ConfigError) as exc:
        config.resolve(path, environ={})
    msg = str(exc.value)
    assert "spectrum.pointz" in msg and "unknown key" in msg and "line 4" in msg


@pytest.mark.parametrize("doc, fragment", [
    ({"temperature_K": "warm"}, "expected a number"),
    ({"temperature_K": True}, "expected a number"),
    ({"spectrum": {"noise": 1}}, "expected true/false"),
    ({"spectrum": {"pressures_bar": [1, "x"]}}, "expected a list of numbers"),
    ({"process": {"kernel": 3}}, "expected a string"),
    ({"process": 5}, "expected an object"),
    ({"anchors": {"CARS": {"pressure_bar": [8]}}}, "expected a scalar or null"),
])
def test_type_errors(tmp_path, doc, fragment):
    with pytest.raises(ConfigError, match=fragment):
        config.resolve(write(tmp_path, doc), environ={})


def test_flexible_keys_accept_null_or_number(tmp_path):
    doc = config.resolve(write(tmp_path, {"anchors": {"CARS": {"pressure_bar": 8.0}},
                                         "optics_transmission": {"CSRS": 0.7}}), environ={})
    assert doc["anchors"]["CARS"]["pressure_bar"] == 8.0
    assert doc["optics_transmission"]["CSRS"] == 0.7


def test_invalid_json_location(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "temperature_K": 300,\n}\n')
    with pytest.raises(ConfigError, match="line 3"):
        config.load_file(path)


def test_missing_file_and_non_object(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        config.load_file(tmp_path / "none.json")
    with pytest.raises(ConfigError, match="top level"):
        config.load_file(write(tmp_path, [1, 2]))


def test_bad_overrides_rejected():
    with pytest.raises(ConfigError):
        config.resolve(overrides={"nonsense": 1}, environ={})


def test_hash_stable_and_sensitive():
    a = config.resolve(environ={})
    b = json.loads(json.dumps(a))
    assert config.config_hash(a) == config.config_hash(b)
    assert len(config.config_hash(a)) == 64
    b["temperature_K"] = 297.0
    assert config.config_hash(a) != config.config_hash(b)


def test_hash_ignores_key_order():
    assert config.config_hash({"a": 1, "b": 2}) == config.config_hash({"b": 2, "a": 1})
