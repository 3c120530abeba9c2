import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import MASS
from nanotalbot.materials import Particle, silica
from nanotalbot.thermal import (
    Phase,
    equilibrium_temperature,
    evolve_temperature,
    heating_rhs,
    laser_heating_power,
)

I_TRAP = 90e-3 / 1e-12  # 90 mW per square micron, silicon at 200 kHz
I_SILICA = 300e-3 / 1e-12  # silica needs more intensity for the same trap frequency
LAM = 1550e-9


def test_laser_power_linear(si_particle):
    p = laser_heating_power(si_particle, I_TRAP, LAM)
    assert p > 0
    assert laser_heating_power(si_particle, 2 * I_TRAP, LAM) == pytest.approx(2 * p, rel=1e-15)
    assert laser_heating_power(si_particle, 0.0, LAM) == 0.0
    with pytest.raises(ValueError):
        laser_heating_power(si_particle, -1.0, LAM)


def test_initial_heating_rates(si_particle, sio2_particle):
    # frozen; the acceptance suite compares this with the 200 K/s target
    assert heating_rhs(si_particle, I_TRAP, LAM, 300, 300) == pytest.approx(260.5, rel=1e-3)
    assert heating_rhs(sio2_particle, I_TRAP, LAM, 300, 300) > 3 * heating_rhs(si_particle, I_TRAP, LAM, 300, 300)


def test_lossless_particle_stays_put(lossless):
    assert heating_rhs(lossless, I_TRAP, LAM, 300, 300) == 0.0
    assert heating_rhs(lossless, 0.0, LAM, 300, 900) == 0.0
    tl = evolve_temperature(lossless, [(0.5, I_TRAP)], 300.0)
    np.testing.assert_array_equal(tl.T, 300.0)


def test_boltzmann_emission_at_equal_temperatures(sio2_particle):
    # without stimulated emission the particle still gains heat when T_int = T_env
    r = heating_rhs(sio2_particle, 0.0, LAM, 300, 300)
    assert r > 0
    assert r < heating_rhs(sio2_particle, 0.0, LAM, 300, 250)


@given(st.floats(350.0, 3000.0))
def test_cooling_without_laser(T):
    p = Particle.from_mass(MASS, silica())
    assert heating_rhs(p, 0.0, LAM, 300, T) < 0


def test_monotone_without_laser(si_particle, sio2_particle):
    for p in (si_particle, sio2_particle):
        tl = evolve_temperature(p, [(0.3, 0.0)], 1200.0)
        assert np.all(np.diff(tl.T) <= 1e-9)


@pytest.mark.parametrize("which", ["si", "sio2"])
def test_equilibrium_is_fixed_point(which, si_particle, sio2_particle):
    p = si_particle if which == "si" else sio2_particle
    T = equilibrium_temperature(p, I_TRAP, LAM, 300)
    assert abs(heating_rhs(p, I_TRAP, LAM, 300, T)) < 1e-3


def test_equilibrium_values(si_particle, sio2_particle):
    assert equilibrium_temperature(si_particle, I_TRAP, LAM, 300) == pytest.approx(1678.4, abs=1.0)
    assert equilibrium_temperature(sio2_particle, I_SILICA, LAM, 300) == pytest.approx(604.5, abs=1.0)


def test_tolerance_convergence(si_particle):
    phases = [(1.0, I_TRAP), (0.3, 0.0)]
    a = evolve_temperature(si_particle, phases, rtol=1e-6, atol=1e-3).final_temperature
    b = evolve_temperature(si_particle, phases, rtol=1e-9, atol=1e-6).final_temperature
    assert abs(a - b) < 0.1


def test_spectral_grid_independence(si_particle, sio2_particle):
    from nanotalbot.thermal import _Balance
    for p in (si_particle, sio2_particle):
        for T in (300.0, 800.0, 1500.0):
            coarse = _Balance(p, 300.0, n_points=2000).emission_power(T)
            fine = _Balance(p, 300.0, n_points=8000).emission_power(T)
            assert coarse == pytest.approx(fine, rel=5e-3)


def test_silicon_timeline(si_particle):
    tl = evolve_temperature(si_particle, [(1.0, I_TRAP), (0.3, 0.0)], 300.0)
    T_release = tl.temperature_at(1.0)
    assert 450 < T_release < 700
    # nearly flat after release: emission is weak below ~600 K
    assert abs(tl.temperature_at(1.284) - T_release) < 5.0
    assert tl.boundaries.tolist() == pytest.approx([0.0, 1.0, 1.3])
    assert tl(0.0) == 300.0


def test_silica_timeline(sio2_particle):
    T_eq = equilibrium_temperature(sio2_particle, I_SILICA, LAM, 300)
    tl = evolve_temperature(sio2_particle, [(1.0, I_SILICA), (0.3, 0.0)], 300.0)
    # equilibrates within the trapping time, then cools quickly after release
    assert tl.temperature_at(1.0) == pytest.approx(T_eq, abs=1.0)
    assert tl.temperature_at(1.284) == pytest.approx(344.6, abs=1.0)


def test_phase_validation(si_particle):
    with pytest.raises(ValueError):
        Phase(-1.0)
    with pytest.raises(ValueError):
        evolve_temperature(si_particle, [], 300.0)
    with pytest.raises(ValueError):
        evolve_temperature(si_particle, [(1.0, 0.0)], 0.0)
    tl = evolve_temperature(si_particle, [Phase(0.1, I_TRAP), (0.1, 0.0, 1064e-9)], t_start=2.0)
    assert tl.t[0] == 2.0 and tl.t[-1] == pytest.approx(2.2)
    assert np.all(np.diff(tl.t) > 0)


@pytest.mark.parametrize("T", [250.0, 300.0, 900.0])
def test_cooling_without_any_absorption(sio2_particle, si_particle, T):
    from nanotalbot.thermal import _Balance
    for p in (si_particle, sio2_particle):
        bal = _Balance(p, 300.0, env_absorption=False)
        assert bal.rhs(T, 0.0) < 0


def test_halving_tolerance(si_particle):
    phases = [(1.0, I_TRAP), (0.3, 0.0)]
    rtol = 1e-6
    a = evolve_temperature(si_particle, phases, rtol=rtol, atol=1e-3).final_temperature
    b = evolve_temperature(si_particle, phases, rtol=rtol / 2, atol=5e-4).final_temperature
    assert abs(a - b) < 10 * rtol * a
