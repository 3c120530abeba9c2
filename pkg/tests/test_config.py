import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st
from pydantic import ValidationError

from nanotalbot import constants as const
from nanotalbot.config import (
    Experiment,
    ExperimentConfig,
    ScanConfig,
    json_schema,
    load_config,
    parse_quantity,
    resolve_path,
    with_value,
)


@pytest.mark.parametrize("text,value", [
    ("160 ms", 0.160), ("1e-10 mbar", 1e-10 * const.mbar), ("1e6 amu", 1e6 * const.amu),
    ("200 kHz", 200e3), ("20 mK", 20e-3), ("90 mW/um2", 9e10), ("355nm", 355e-9),
    ("1.4 pi", 1.4 * math.pi), ("4pi", 4 * math.pi), ("pi", math.pi), ("2.5", 2.5), (3, 3.0),
])
def test_parse_quantity(text, value):
    assert parse_quantity(text) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize("bad", ["fast", "10 parsecs", "", True, None, [1]])
def test_parse_quantity_rejects(bad):
    with pytest.raises(ValueError):
        parse_quantity(bad)


@given(st.floats(1e-30, 1e30))
def test_parse_quantity_roundtrip(x):
    assert parse_quantity(repr(x)) == x
    assert parse_quantity(f"{x!r} ms") == pytest.approx(x * 1e-3, rel=1e-15)


def test_defaults():
    cfg = ExperimentConfig()
    assert cfg.particle.mass == pytest.approx(1e6 * const.amu)
    assert cfg.grating.phi0 == pytest.approx(1.4 * math.pi)
    assert cfg.timeline.t1_talbot == 2.0 and cfg.timeline.t2_talbot == 1.6
    assert cfg.decoherence.channels() == ["collision", "absorption", "scattering", "emission"]
    ex = Experiment(cfg)
    assert ex.timeline.t1 == pytest.approx(2 * ex.talbot_time)
    assert ex.pulse.beta > 0 and ex.pulse.eta > 0


def test_exactly_one_constraints():
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"particle": {"mass": 1e-21, "radius": 5e-9}})
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"grating": {"phi0": 1.0, "pulse_energy": 1e-6, "waist": 1e-5}})
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"grating": {"pulse_energy": 1e-6}})
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"timeline": {"t1": 0.1, "t1_talbot": 2}})


def test_caps_and_ranges():
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"grating": {"phi0": 5 * math.pi}})
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"grating": {"pulse_energy": "600 uJ", "waist": "20 um"}})
    ok = ExperimentConfig.model_validate({"grating": {"phi0": "5 pi", "max_phi0": "6 pi"}})
    assert ok.grating.phi0 == pytest.approx(5 * math.pi)
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"environment": {"pressure": -1}})
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"seed": -1})


def test_talbot_strings_and_units():
    cfg = ExperimentConfig.model_validate({"timeline": {"t1": "2 tT", "t2": "126 ms"}})
    assert cfg.timeline.t1_talbot == 2.0 and cfg.timeline.t2 == pytest.approx(0.126)
    ex = Experiment(cfg)
    assert ex.timeline.t2 == pytest.approx(0.126)


def test_pulse_energy_route():
    cfg = ExperimentConfig.model_validate({"grating": {"pulse_energy": "60 uJ", "waist": "30 mm"}})
    ex = Experiment(cfg)
    assert ex.pulse.phi0 > 0
    doubled = with_value(cfg, "pulse_energy", 120e-6)
    assert Experiment(doubled).pulse.phi0 == pytest.approx(2 * ex.pulse.phi0, rel=1e-12)


def test_scan_validation():
    assert resolve_path("phi0") == "grating.phi0"
    assert resolve_path("timeline.t2") == "timeline.t2"
    with pytest.raises(ValueError):
        resolve_path("grating.colour")
    with pytest.raises(ValueError):
        resolve_path("mode.x")
    with pytest.raises(ValidationError):
        ScanConfig(variable="nonsense", start=0, stop=1, steps=3)
    with pytest.raises(ValidationError):
        ScanConfig(variable="phi0", start=0, stop=1, steps=0)
    sc = ScanConfig(variable="t2", start="10 ms", stop="20 ms", steps=3)
    assert sc.values().tolist() == pytest.approx([0.01, 0.015, 0.02])


def test_with_value_switches_parameterisation():
    cfg = ExperimentConfig()
    c = with_value(cfg, "t2", 0.1)
    assert c.timeline.t2 == 0.1 and c.timeline.t2_talbot is None
    c = with_value(c, "t2_talbot", 1.0)
    assert c.timeline.t2 is None
    c = with_value(cfg, "particle.radius", 5e-9)
    assert c.particle.mass is None


def test_load_config_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"particle": {"material": "silica"}, "scan": {"variable": "phi0", "start": 0,
                                                                            "stop": "2 pi", "steps": 5}}))
    cfg = load_config(path)
    assert cfg.particle.material == "silica"
    assert len(cfg.scan) == 1
    cfg = load_config(path, {"phi0": 1.0})
    assert cfg.grating.phi0 == 1.0


def test_unknown_keys_rejected():
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"grating": {"colour": "green"}})


def test_schema():
    schema = json_schema()
    assert "grating" in schema["properties"]
