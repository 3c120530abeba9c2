import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nanotalbot import constants as const
from nanotalbot.materials import Material, Particle, silica, silicon

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

MASS = 1e6 * const.amu
PERIOD = 355e-9 / 2


@pytest.fixture(scope="session")
def si_particle():
    return Particle.from_mass(MASS, silicon())


@pytest.fixture(scope="session")
def sio2_particle():
    return Particle.from_mass(MASS, silica())


def toy_material(n=1.5 + 0j, name="toy", lo=1e-7, hi=1e-3, rows=5, **kw):
    wl = np.geomspace(lo, hi, rows)
    kw.setdefault("density", 2000.0)
    return Material(name, wl, np.full(rows, n.real), np.full(rows, n.imag), **kw)


@pytest.fixture
def lossless():
    return Particle.from_mass(MASS, toy_material(1.5 + 0j, "lossless"))
