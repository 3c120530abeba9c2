"""Experiment configuration: JSON schema, unit parsing and model construction.

Files always hold SI numbers. Strings with a unit suffix (``"160 ms"``,
``"1e6 amu"``, ``"1.4 pi"``, ``"1e-10 mbar"``, ``"2 tT"``) are converted when
the config is parsed.
"""

from __future__ import annotations

import json
import math
import re
import threading
from pathlib import Path
from typing import Annotated, Any, Literal

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, model_validator

from . import constants as const
from .decoherence import CSL, DecoherenceModel, Environment
from .dynamics import Timeline, talbot_time, trap_state
from .grating import GratingPulse, phase_amplitude, spot_area
from .materials import Particle, bundled_material, load_spectrum
from .thermal import Phase, evolve_temperature

UNITS = {
    "": 1.0, "s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "ns": 1e-9,
    "m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9, "pm": 1e-12, "angstrom": 1e-10,
    "kg": 1.0, "amu": const.amu, "u": const.amu,
    "pa": 1.0, "mbar": const.mbar, "bar": 1e5,
    "k": 1.0, "mk": 1e-3, "uk": 1e-6, "µk": 1e-6,
    "hz": 1.0, "khz": 1e3, "mhz": 1e6,
    "j": 1.0, "mj": 1e-3, "uj": 1e-6, "µj": 1e-6, "ev": const.eV,
    "w": 1.0, "mw": 1e-3,
    "w/m2": 1.0, "mw/um2": 1e-3 / 1e-12, "mw/µm2": 1e-3 / 1e-12, "w/um2": 1e12, "w/µm2": 1e12,
    "rad": 1.0, "pi": math.pi,
}

_QTY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*([A-Za-zµ/0-9]*)\s*$")


def parse_quantity(value):
    """Convert ``"160 ms"``-style strings to SI floats; numbers pass through."""
    if isinstance(value, bool):
        raise ValueError("expected a number")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"expected a number or a quantity string, got {type(value).__name__}")
    m = _QTY.match(value)
    if not m or (m.group(1) is None and not m.group(2)):
        raise ValueError(f"cannot parse quantity {value!r}")
    number = float(m.group(1)) if m.group(1) is not None else 1.0
    unit = m.group(2).lower()
    if unit not in UNITS:
        raise ValueError(f"unknown unit {m.group(2)!r}")
    return number * UNITS[unit]


Quantity = Annotated[float, BeforeValidator(parse_quantity)]


def _split_talbot(value):
    """``"2 tT"`` -> 2.0 (Talbot units); anything else -> None."""
    if isinstance(value, str):
        m = re.match(r"^\s*([-+]?[\d.eE+-]+)?\s*\*?\s*(tT|t_T|talbot)\s*$", value)
        if m:
            return float(m.group(1)) if m.group(1) else 1.0
    return None


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class ParticleConfig(_Model):
    material: str = "silicon"
    spectrum: str | None = Field(None, description="CSV refractive-index file overriding the bundled material")
    mass: Quantity | None = Field(None, gt=0, description="kg")
    radius: Quantity | None = Field(None, gt=0, description="m")
    density: Quantity | None = Field(None, gt=0, description="kg/m^3")
    specific_heat: Quantity = Field(700.0, gt=0, description="J/(kg K)")

    @model_validator(mode="before")
    @classmethod
    def _default_mass(cls, data):
        if isinstance(data, dict) and data.get("mass") is None and data.get("radius") is None:
            data = {**data, "mass": 1e6 * const.amu}
        return data

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.mass is None) == (self.radius is None):
            raise ValueError("give exactly one of mass or radius")
        return self


class TrapConfig(_Model):
    frequency: Quantity = Field(200e3, gt=0, description="mechanical trap frequency nu_M [Hz]")
    temperature: Quantity = Field(20e-3, ge=0, description="motional temperature [K]")
    state: Literal["exact", "classical"] = "exact"
    wavelength: Quantity = Field(1550e-9, gt=0)
    intensity: Quantity = Field(90e-3 / 1e-12, ge=0, description="W/m^2")
    waist: Quantity = Field(860e-9, gt=0)
    power: Quantity | None = Field(53e-3, gt=0, description="W, used only for the readout estimate")
    responsivity: Quantity = Field(1.0, gt=0, description="A/W")
    duration: Quantity = Field(1.0, ge=0, description="trapping time before release [s]")
    initial_internal_temperature: Quantity = Field(300.0, gt=0)


class GratingConfig(_Model):
    wavelength: Quantity = Field(355e-9, gt=0)
    phi0: Quantity | None = Field(None, ge=0)
    pulse_energy: Quantity | None = Field(None, ge=0)
    spot_area: Quantity | None = Field(None, gt=0)
    waist: Quantity | None = Field(None, gt=0)
    absorption: bool = True
    scattering: bool = True
    max_phi0: Quantity = Field(4 * math.pi, gt=0)
    max_pulse_energy: Quantity = Field(500e-6, gt=0)

    @model_validator(mode="before")
    @classmethod
    def _default_phase(cls, data):
        if isinstance(data, dict) and data.get("phi0") is None and data.get("pulse_energy") is None:
            data = {**data, "phi0": 1.4 * math.pi}
        return data

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.phi0 is None) == (self.pulse_energy is None):
            raise ValueError("give exactly one of phi0 or pulse_energy")
        if self.pulse_energy is not None and (self.spot_area is None) == (self.waist is None):
            raise ValueError("pulse_energy needs exactly one of spot_area or waist")
        if self.phi0 is not None and self.phi0 > self.max_phi0:
            raise ValueError(f"phi0 = {self.phi0:.4g} exceeds max_phi0 = {self.max_phi0:.4g}")
        if self.pulse_energy is not None and self.pulse_energy > self.max_pulse_energy:
            raise ValueError("pulse_energy exceeds max_pulse_energy")
        return self


class TimelineConfig(_Model):
    """Free-fall times in seconds (``t1``/``t2``) or Talbot units (``t1_talbot``/``t2_talbot``)."""

    t1: Quantity | None = Field(None, gt=0)
    t2: Quantity | None = Field(None, gt=0)
    t1_talbot: float | None = Field(None, gt=0)
    t2_talbot: float | None = Field(None, gt=0)

    @model_validator(mode="before")
    @classmethod
    def _talbot_strings(cls, data):
        if not isinstance(data, dict):
            return data
        data = dict(data)
        for key in ("t1", "t2"):
            tt = _split_talbot(data.get(key))
            if tt is not None:
                data[key] = None
                data[f"{key}_talbot"] = tt
        if data.get("t1") is None and data.get("t1_talbot") is None:
            data["t1_talbot"] = 2.0
        if data.get("t2") is None and data.get("t2_talbot") is None:
            data["t2_talbot"] = 1.6
        return data

    @model_validator(mode="after")
    def _exactly_one(self):
        for key in ("t1", "t2"):
            if (getattr(self, key) is None) == (getattr(self, f"{key}_talbot") is None):
                raise ValueError(f"give exactly one of {key} or {key}_talbot")
        return self


class EnvironmentConfig(_Model):
    temperature: Quantity = Field(300.0, gt=0)
    pressure: Quantity = Field(1e-10 * const.mbar, ge=0)
    gas_mass: Quantity = Field(28 * const.amu, gt=0)
    gas_polarizability: Quantity = Field(1.74 * const.angstrom**3 * 4 * math.pi * const.epsilon_0, gt=0)
    gas_ionization: Quantity = Field(15.6 * const.eV, gt=0)


class DecoherenceConfig(_Model):
    collision: bool = True
    absorption: bool = True
    scattering: bool = True
    emission: bool = True
    csl: bool = False

    def channels(self):
        return [k for k in ("collision", "absorption", "scattering", "emission", "csl") if getattr(self, k)]


class CSLConfig(_Model):
    rate: Quantity = Field(1e-16, ge=0, description="lambda_CSL [Hz]")
    length: Quantity = Field(100e-9, gt=0, description="r_c [m]")


class ScanConfig(_Model):
    variable: str
    start: Quantity
    stop: Quantity
    steps: int = Field(ge=1)

    @model_validator(mode="after")
    def _known(self):
        resolve_path(self.variable)
        return self

    def values(self):
        import numpy as np

        return np.linspace(self.start, self.stop, self.steps)


class OutputConfig(_Model):
    directory: str = "."
    prefix: str | None = None
    points_per_period: int = Field(512, ge=8)
    periods: tuple[float, float] = (-2.0, 2.0)


class ExperimentConfig(_Model):
    particle: ParticleConfig = ParticleConfig()
    trap: TrapConfig = TrapConfig()
    grating: GratingConfig = GratingConfig()
    timeline: TimelineConfig = TimelineConfig()
    environment: EnvironmentConfig = EnvironmentConfig()
    decoherence: DecoherenceConfig = DecoherenceConfig()
    csl: CSLConfig = CSLConfig()
    acceleration: list[tuple[Quantity, Quantity]] = Field(default_factory=list,
                                                          description="(duration [s], a [m/s^2]) segments")
    scan: list[ScanConfig] = Field(default_factory=list)
    mode: Literal["quantum", "classical"] = "quantum"
    detection_window: Quantity = Field(10e-6, ge=0)
    output: OutputConfig = OutputConfig()
    seed: int = Field(0, ge=0, lt=2**64)

    @model_validator(mode="before")
    @classmethod
    def _single_scan(cls, data):
        if isinstance(data, dict) and isinstance(data.get("scan"), dict):
            data = {**data, "scan": [data["scan"]]}
        return data


SCAN_ALIASES = {
    "phi0": "grating.phi0",
    "t1": "timeline.t1",
    "t2": "timeline.t2",
    "t1_talbot": "timeline.t1_talbot",
    "t2_talbot": "timeline.t2_talbot",
    "mass": "particle.mass",
    "pressure": "environment.pressure",
    "T_env": "environment.temperature",
    "pulse_energy": "grating.pulse_energy",
    "trap_temperature": "trap.temperature",
    "lambda_csl": "csl.rate",
}


def resolve_path(path):
    """Map a scan variable (alias or dotted path) to a config section and field."""
    path = SCAN_ALIASES.get(path, path)
    parts = path.split(".")
    model = ExperimentConfig
    for i, part in enumerate(parts):
        fields = model.model_fields
        if part not in fields:
            raise ValueError(f"unknown config path {path!r}")
        ann = fields[part].annotation
        if i < len(parts) - 1:
            if not (isinstance(ann, type) and issubclass(ann, BaseModel)):
                raise ValueError(f"{'.'.join(parts[:i + 1])!r} is not a section")
            model = ann
    return path


def with_value(config: ExperimentConfig, path, value) -> ExperimentConfig:
    """Copy of ``config`` with the dotted ``path`` set to ``value`` (revalidated)."""
    path = resolve_path(path)
    data = config.model_dump()
    section, _, key = path.rpartition(".")
    target = data
    for part in section.split(".") if section else []:
        target = target[part]
    target[key] = value
    # switching between equivalent parameterisations
    if path == "timeline.t1":
        data["timeline"]["t1_talbot"] = None
    elif path == "timeline.t2":
        data["timeline"]["t2_talbot"] = None
    elif path == "timeline.t1_talbot":
        data["timeline"]["t1"] = None
    elif path == "timeline.t2_talbot":
        data["timeline"]["t2"] = None
    elif path == "grating.phi0":
        data["grating"]["pulse_energy"] = None
    elif path == "grating.pulse_energy":
        data["grating"]["phi0"] = None
    elif path == "particle.mass":
        data["particle"]["radius"] = None
    elif path == "particle.radius":
        data["particle"]["mass"] = None
    return ExperimentConfig.model_validate(data)


def load_config(path=None, overrides=None) -> ExperimentConfig:
    data: dict[str, Any] = {}
    if path is not None:
        data = json.loads(Path(path).read_text())
    cfg = ExperimentConfig.model_validate(data)
    for k, v in (overrides or {}).items():
        cfg = with_value(cfg, k, v)
    return cfg


def json_schema():
    return ExperimentConfig.model_json_schema()


# --- model construction -----------------------------------------------------


class InternalTemperature:
    """T_int(t) after release, extended on demand by integrating the free-fall phase."""

    def __init__(self, particle, trap: TrapConfig, T_env, horizon=1.0):
        self.particle = particle
        self.trap = trap
        self.T_env = T_env
        self._lock = threading.Lock()
        self._timeline = None
        self.release_temperature = None
        self._extend(horizon)

    def _extend(self, horizon):
        phases = []
        if self.trap.duration > 0:
            phases.append(Phase(self.trap.duration, self.trap.intensity, self.trap.wavelength))
        phases.append(Phase(horizon, 0.0, self.trap.wavelength))
        self._timeline = evolve_temperature(self.particle, phases, self.trap.initial_internal_temperature,
                                            self.T_env, t_start=-self.trap.duration)
        self.release_temperature = float(self._timeline.temperature_at(0.0))

    @property
    def timeline(self):
        return self._timeline

    def __call__(self, t):
        import numpy as np

        t = np.asarray(t, dtype=float)
        with self._lock:
            if t.size and t.max() > self._timeline.boundaries[-1]:
                self._extend(2.0 * float(t.max()))
            tl = self._timeline
        return tl.temperature_at(t)


class Experiment:
    """Physical objects built from an :class:`ExperimentConfig`."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        pc = config.particle
        overrides = {"specific_heat": pc.specific_heat}
        if pc.density is not None:
            overrides["density"] = pc.density
        if pc.spectrum:
            material = load_spectrum(pc.spectrum, name=pc.material, density=pc.density or 2329.0,
                                     specific_heat=pc.specific_heat)
        else:
            material = bundled_material(pc.material, **overrides)
        self.material = material
        if pc.mass is not None:
            self.particle = Particle.from_mass(pc.mass, material, config.trap.initial_internal_temperature)
        else:
            self.particle = Particle.from_radius(pc.radius, material, config.trap.initial_internal_temperature)
        m = self.particle.mass
        g = config.grating
        self.period = g.wavelength / 2.0
        self.talbot_time = talbot_time(m, self.period)
        tc = config.timeline
        t1 = tc.t1 if tc.t1 is not None else tc.t1_talbot * self.talbot_time
        t2 = tc.t2 if tc.t2 is not None else tc.t2_talbot * self.talbot_time
        self.timeline = Timeline(t1, t2, self.period, m)
        self.source = trap_state(m, config.trap.frequency, config.trap.temperature, config.trap.state)
        if g.phi0 is not None:
            pulse = GratingPulse.from_particle(self.particle, g.wavelength, phi0=g.phi0)
        else:
            area = g.spot_area if g.spot_area is not None else spot_area(g.waist)
            phi0 = phase_amplitude(self.particle, g.pulse_energy, area, g.wavelength)
            if phi0 > g.max_phi0:
                raise ValueError(f"pulse energy gives phi0 = {phi0:.4g} > max_phi0 = {g.max_phi0:.4g}")
            pulse = GratingPulse.from_particle(self.particle, g.wavelength, pulse_energy=g.pulse_energy,
                                               spot_area=area)
        if not g.absorption:
            pulse = pulse.replace(beta=0.0)
        if not g.scattering:
            pulse = pulse.replace(eta=0.0)
        self.pulse = pulse
        e = config.environment
        self.environment = Environment(e.temperature, e.pressure, e.gas_mass, e.gas_polarizability,
                                       e.gas_ionization)
        self.csl = CSL(config.csl.rate, config.csl.length)
        self._temperature = None

    @property
    def internal_temperature(self):
        if self._temperature is None:
            self._temperature = InternalTemperature(self.particle, self.config.trap, self.environment.temperature,
                                                    horizon=max(1.0, 1.5 * self.timeline.total))
        return self._temperature

    def decoherence(self, channels=None):
        chans = self.config.decoherence.channels() if channels is None else list(channels)
        if not chans:
            return None
        temp = self.internal_temperature if "emission" in chans else None
        return DecoherenceModel(self.particle, self.environment, chans, temp, self.csl)
