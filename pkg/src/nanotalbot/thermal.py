"""Internal temperature of the nanosphere during trapping and free fall.

The rate balance is

    m c_m dT/dt = sigma_abs(lambda_T) I_T + int d omega hbar omega [gamma_abs(omega) - gamma_emi(omega, T)],

where absorption draws from the environment field at ``T_env`` and emission
uses the Boltzmann factor at the internal temperature (no stimulated emission).
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from . import constants as const
from .errors import NumericError
from .materials import clausius_mossotti, refractive_index, spectral_grid

T_MAX = 5000.0
SAMPLES_PER_PHASE = 200


def laser_heating_power(particle, intensity, wavelength):
    """Absorbed trap-laser power ``4 pi I omega R^3 Im(chi) / c`` [W]."""
    if intensity < 0:
        raise ValueError("intensity must be non-negative")
    if intensity == 0:
        return 0.0
    n = refractive_index(particle.material, wavelength)
    chi = complex(clausius_mossotti(n * n))
    omega = 2.0 * math.pi * const.c / wavelength
    return 4.0 * math.pi * intensity * omega * particle.radius**3 * chi.imag / const.c


class _Balance:
    """Precomputed pieces of the rate balance for one particle and environment."""

    def __init__(self, particle, T_env, env_absorption=True, n_points=4000):
        self.particle = particle
        self.grid = spectral_grid(particle.material, n_points)
        self.heat_capacity = particle.mass * particle.material.specific_heat
        g = self.grid
        self.hw = const.hbar * g.omega
        self.p_abs = float(g.weights @ (self.hw * g.rate("absorption", particle.radius, T_env))) \
            if env_absorption else 0.0

    def emission_power(self, T):
        if T <= 0:
            return 0.0
        g = self.grid
        return float(g.weights @ (self.hw * g.rate("emission", self.particle.radius, T)))

    def rhs(self, T, laser_power):
        return (laser_power + self.p_abs - self.emission_power(T)) / self.heat_capacity


def heating_rhs(particle, intensity, wavelength, T_env, T_int, *, env_absorption=True):
    """dT_int/dt [K/s] at internal temperature ``T_int``."""
    if T_int <= 0:
        raise ValueError("T_int must be positive")
    bal = _Balance(particle, T_env, env_absorption)
    return bal.rhs(T_int, laser_heating_power(particle, intensity, wavelength))


def equilibrium_temperature(particle, intensity, wavelength, T_env, *, xtol=1e-6):
    """Internal temperature where heating and emission balance (bisection on [T_env, 5000 K])."""
    bal = _Balance(particle, T_env)
    laser = laser_heating_power(particle, intensity, wavelength)

    def f(T):
        return bal.rhs(T, laser)

    lo, hi = T_env, T_MAX
    if f(lo) <= 0:
        return lo
    if f(hi) > 0:
        raise NumericError(f"no equilibrium below {T_MAX} K", where="thermal.equilibrium_temperature")
    return optimize.bisect(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)


@dataclass(frozen=True)
class Phase:
    duration: float
    intensity: float = 0.0
    wavelength: float = 1550e-9

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("phase duration must be positive")
        if self.intensity < 0:
            raise ValueError("intensity must be non-negative")


@dataclass(frozen=True)
class ThermalTimeline:
    """Sampled T_int(t) through a sequence of phases.

    ``t`` starts at ``t_start`` (e.g. ``-1.0`` for a one-second trap phase
    ending at release, ``t = 0``).
    """

    phases: tuple
    initial_temperature: float
    t_start: float
    t: np.ndarray
    T: np.ndarray
    boundaries: np.ndarray
    _dense: tuple = field(repr=False, compare=False, default=())

    def temperature_at(self, t):
        """T_int at arbitrary times inside the timeline (dense interpolant of the integrator)."""
        t = np.asarray(t, dtype=float)
        if np.any(t < self.boundaries[0] - 1e-12) or np.any(t > self.boundaries[-1] + 1e-12):
            raise ValueError("time outside the evolved interval")
        out = np.empty(t.shape)
        flat, res = t.ravel(), out.reshape(-1)
        idx = np.clip(np.searchsorted(self.boundaries, flat, side="right") - 1, 0, len(self._dense) - 1)
        for k, sol in enumerate(self._dense):
            sel = idx == k
            if np.any(sel):
                res[sel] = sol(flat[sel])[0]
        return float(out) if out.ndim == 0 else out

    def __call__(self, t):
        return self.temperature_at(t)

    @property
    def final_temperature(self):
        return float(self.T[-1])


def evolve_temperature(particle, phases: Sequence[Phase | tuple], initial_temperature=300.0, T_env=300.0, *,
                       t_start=0.0, rtol=1e-6, atol=1e-3, samples_per_phase=SAMPLES_PER_PHASE,
                       env_absorption=True):
    """Integrate the rate balance phase by phase with an embedded Runge-Kutta pair.

    ``phases`` are :class:`Phase` objects or ``(duration, intensity[, wavelength])``
    tuples. The integrator is restarted at every phase boundary.
    """
    if initial_temperature <= 0:
        raise ValueError("initial temperature must be positive")
    phases = tuple(p if isinstance(p, Phase) else Phase(*p) for p in phases)
    if not phases:
        raise ValueError("at least one phase required")
    bal = _Balance(particle, T_env, env_absorption)
    T0 = float(initial_temperature)
    t0 = float(t_start)
    ts, Ts, dense = [], [], []
    bounds = [t0]
    for k, ph in enumerate(phases):
        laser = laser_heating_power(particle, ph.intensity, ph.wavelength) if ph.intensity > 0 else 0.0

        def f(t, y, laser=laser):
            return [bal.rhs(max(y[0], 1e-9), laser)]

        t1 = t0 + ph.duration
        sol = integrate.solve_ivp(f, (t0, t1), [T0], method="RK45", rtol=rtol, atol=atol,
                                  dense_output=True)
        if not sol.success:
            raise NumericError(sol.message, where="thermal.evolve_temperature",
                               state={"phase": k, "t": float(sol.t[-1]), "T": float(sol.y[0, -1])})
        grid = np.linspace(t0, t1, samples_per_phase)
        vals = sol.sol(grid)[0]
        vals[-1] = sol.y[0, -1]
        if np.any(vals <= 0):
            raise NumericError("temperature became non-positive", where="thermal.evolve_temperature",
                               state={"phase": k})
        ts.append(grid if k == 0 else grid[1:])
        Ts.append(vals if k == 0 else vals[1:])
        dense.append(sol.sol)
        t0, T0 = t1, float(sol.y[0, -1])
        bounds.append(t1)
    return ThermalTimeline(phases, float(initial_temperature), float(t_start), np.concatenate(ts),
                           np.concatenate(Ts), np.array(bounds), tuple(dense))
