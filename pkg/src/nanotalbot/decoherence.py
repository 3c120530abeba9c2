"""Fringe reduction factors from environmental decoherence and CSL.

Every channel multiplies the n-th fringe amplitude by

    R_n = exp{-Gamma [1 - f(x_n)] (t1 + t2)},    x_n = n h t2 / (m D),

where ``f`` is the channel's spatial resolution function (``f(0) = 1``).
Photon channels integrate ``gamma(omega) [1 - f(omega x / c)]`` over the
spectrum. Gas collisions are taken to resolve the path separation fully
(``f = 0``).
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.polynomial import legendre
from scipy import special

from . import constants as const
from .materials import spectral_grid, static_polarizability

Channel = Literal["collision", "absorption", "scattering", "emission", "csl"]
CHANNELS = ("collision", "absorption", "scattering", "emission", "csl")
SHORT_NAMES = {"col": "collision", "abs": "absorption", "sca": "scattering", "emi": "emission", "csl": "csl"}

GL_ORDER = 64
_SERIES_CUT = 0.5


@dataclass(frozen=True)
class Environment:
    """Thermal radiation field and residual gas (nitrogen by default)."""

    temperature: float = 300.0
    pressure: float = 1e-10 * const.mbar
    gas_mass: float = 28.0 * const.amu
    gas_polarizability: float = 1.74 * const.angstrom**3 * 4.0 * math.pi * const.epsilon_0
    gas_ionization: float = 15.6 * const.eV

    def __post_init__(self):
        for name in ("temperature", "gas_mass", "gas_polarizability", "gas_ionization"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.pressure < 0:
            raise ValueError("pressure must be non-negative")

    @property
    def gas_velocity(self):
        return math.sqrt(2.0 * const.k_B * self.temperature / self.gas_mass)


@dataclass(frozen=True)
class CSL:
    rate: float = 1e-16  # lambda_CSL [Hz]
    length: float = 100e-9  # r_c [m]


# --- resolution functions ---------------------------------------------------
# Each returns 1 - f(a), with a power series at small arguments to avoid
# cancellation.


def _series(a2, coeffs):
    out = np.zeros_like(a2)
    p = np.ones_like(a2)
    for c in coeffs:
        p = p * a2
        out = out + c * p
    return out


# 1 - Si(a)/a = sum_{k>=1} (-1)^(k+1) a^(2k) / ((2k+1) (2k+1)!)
_ABS_COEFFS = [(-1) ** (k + 1) / ((2 * k + 1) * math.factorial(2 * k + 1)) for k in range(1, 12)]
# 1 - Si(2a)/a + sinc(a)^2
_SCA_COEFFS = [(-1) ** (k + 1) * 2.0 * 4.0**k / ((2 * k + 1) * math.factorial(2 * k + 1))
               + (-1) ** k * 4.0 ** (k + 1) / (2.0 * math.factorial(2 * k + 2)) for k in range(1, 12)]
# 1 - sqrt(pi)/(2z) erf(z) = sum_{k>=1} (-1)^(k+1) z^(2k) / (k! (2k+1))
_CSL_COEFFS = [(-1) ** (k + 1) / (math.factorial(k) * (2 * k + 1)) for k in range(1, 14)]


def loss_absorption(a):
    """``1 - Si(a)/a`` (isotropic single-photon recoil)."""
    a = np.abs(np.asarray(a, dtype=float))
    small = a < _SERIES_CUT
    safe = np.where(small, 1.0, a)
    direct = 1.0 - special.sici(safe)[0] / safe
    return np.where(small, _series(a * a, _ABS_COEFFS), direct)


def loss_scattering(a):
    """``1 - Si(2a)/a + sinc(a)^2`` (elastic dipole scattering)."""
    a = np.abs(np.asarray(a, dtype=float))
    small = a < _SERIES_CUT
    safe = np.where(small, 1.0, a)
    direct = 1.0 - special.sici(2.0 * safe)[0] / safe + (np.sin(safe) / safe) ** 2
    return np.where(small, _series(a * a, _SCA_COEFFS), direct)


def loss_csl(x, length):
    """``1 - sqrt(pi) r_c / x * erf(x / 2 r_c)``."""
    z = np.abs(np.asarray(x, dtype=float)) / (2.0 * length)
    small = z < _SERIES_CUT
    safe = np.where(small, 1.0, z)
    direct = 1.0 - math.sqrt(math.pi) / (2.0 * safe) * special.erf(safe)
    return np.where(small, _series(z * z, _CSL_COEFFS), direct)


def resolution_absorption(a):
    return 1.0 - loss_absorption(a)


def resolution_scattering(a):
    return 1.0 - loss_scattering(a)


def resolution_csl(x, length):
    return 1.0 - loss_csl(x, length)


# --- rates ------------------------------------------------------------------


def separation(n, timeline):
    """Path separation ``x_n = n h t2 / (m D)`` resolved by harmonic ``n``."""
    return np.asarray(n, dtype=float) * const.h * timeline.t2 / (timeline.mass * timeline.magnified_period)


def c6(particle, env=Environment()):
    """London van der Waals coefficient between particle and gas molecule [J m^6]."""
    I = particle.material.ionization_energy
    Ig = env.gas_ionization
    a0 = static_polarizability(particle)
    return 3.0 * a0 * env.gas_polarizability * Ig * I / (32.0 * math.pi**2 * const.epsilon_0**2 * (I + Ig))


def collision_rate(particle, env=Environment()):
    """Total gas scattering rate from the van der Waals cross section [1/s]."""
    pref = 4.0 * math.pi * special.gamma(0.9) / (5.0 * math.sin(math.pi / 5.0))
    return (pref * (3.0 * math.pi * c6(particle, env) / (2.0 * const.hbar)) ** 0.4
            * env.pressure * env.gas_velocity**0.6 / (const.k_B * env.temperature))


def csl_rate(mass, rate):
    """Effective CSL localization rate ``(m / amu)^2 lambda``."""
    return (mass / const.amu) ** 2 * rate


def _spectral_log(kind, particle, T, n, timeline, n_points=4000):
    grid = spectral_grid(particle.material, n_points)
    gamma = grid.rate(kind, particle.radius, T)
    absn = np.abs(np.atleast_1d(n))
    uniq, inv = np.unique(absn, return_inverse=True)
    a = np.multiply.outer(separation(uniq, timeline), grid.omega / const.c)
    loss = loss_absorption(a) if kind != "scattering" else loss_scattering(a)
    return (-timeline.total * (loss @ (grid.weights * gamma)))[inv.ravel()]


def reduction_static(channel: Channel, particle, env, timeline, n, *, csl=CSL(), temperature=None):
    """Log reduction ``ln R_n`` of a single channel with time-independent rates.

    ``temperature`` is the internal temperature for the emission channel
    (defaults to the particle's). Returns an array matching ``n``.
    """
    n = np.asarray(n)
    scalar = n.ndim == 0
    n1 = np.atleast_1d(n)
    if channel == "collision":
        out = np.where(n1 == 0, 0.0, -collision_rate(particle, env) * timeline.total)
    elif channel in ("absorption", "scattering"):
        out = _spectral_log(channel, particle, env.temperature, n1, timeline)
    elif channel == "emission":
        T = particle.internal_temperature if temperature is None else temperature
        out = _spectral_log("emission", particle, T, n1, timeline) if T > 0 else np.zeros(n1.shape)
    elif channel == "csl":
        out = -csl_rate(particle.mass, csl.rate) * loss_csl(separation(n1, timeline), csl.length) * timeline.total
    else:
        raise ValueError(f"unknown channel {channel!r}")
    out = np.asarray(out, dtype=float) + 0.0  # normalise -0.0
    return float(out[0]) if scalar else out


def reduction_emission(particle, timeline, temperature: Callable[[np.ndarray], np.ndarray] | float, n,
                       *, n_points=4000, order=GL_ORDER):
    """Log reduction from thermal emission with a time-dependent internal temperature.

    ``temperature(t)`` gives T_int at time ``t`` after release, for
    ``0 <= t <= t1 + t2``. Before the grating the emission time ``t1 (1 - theta)``
    and after it ``t1 + t2 theta`` are sampled by Gauss-Legendre in ``theta``.
    """
    if np.isscalar(temperature):
        T_const = float(temperature)

        def temperature(t):
            return np.full(np.shape(t), T_const)

    n = np.asarray(n)
    scalar = n.ndim == 0
    n1 = np.atleast_1d(n)
    nodes, w = legendre.leggauss(order)
    theta = 0.5 * (nodes + 1.0)
    w = 0.5 * w
    t1, t2 = timeline.t1, timeline.t2
    T_before = np.asarray(temperature(t1 * (1.0 - theta)), dtype=float)
    T_after = np.asarray(temperature(t1 + t2 * theta), dtype=float)
    grid = spectral_grid(particle.material, n_points)

    def gamma(T):
        return grid.rate("emission", particle.radius, T) if T > 0 else np.zeros(grid.omega.shape)

    # weighted spectral rate for each theta node: [t1 g(T_before) + t2 g(T_after)] * spectral weight
    G = np.array([t1 * gamma(Tb) + t2 * gamma(Ta) for Tb, Ta in zip(T_before, T_after)]) * grid.weights
    # drop frequencies suppressed by the Boltzmann factor
    col = np.abs(G).max(axis=0)
    keep = col > 1e-20 * col.max() if col.max() > 0 else np.zeros(col.shape, bool)
    G, omega = G[:, keep], grid.omega[keep]
    # R_n = R_-n and R_0 = 1, so only distinct |n| > 0 are evaluated
    absn = np.abs(n1)
    uniq = np.unique(absn[absn > 0])
    vals = {}
    for k, xi in zip(uniq, separation(uniq, timeline)):
        a = np.multiply.outer(theta, omega * xi / const.c)
        vals[k] = float(w @ np.einsum("ij,ij->i", G, np.sin(a) / a - 1.0))
    out = np.array([vals.get(k, 0.0) for k in absn], dtype=float) + 0.0
    return float(out[0]) if scalar else out


@dataclass
class ReductionSet:
    """Per-channel ``ln R_n`` for a set of harmonic orders."""

    orders: np.ndarray
    log: dict = field(default_factory=dict)

    @property
    def log_total(self):
        total = np.zeros(self.orders.shape)
        for v in self.log.values():
            total = total + v
        return total

    @property
    def combined(self):
        return np.exp(self.log_total)

    def channel(self, name):
        return np.exp(self.log[name])


def total_reduction(particle, env, timeline, n, *, temperature=None, channels: Iterable[str] = CHANNELS,
                    csl=CSL()):
    """Sum of channel log-reductions.

    ``temperature`` may be a number or a callable ``T_int(t)``; with a
    callable the emission channel uses :func:`reduction_emission`.
    """
    orders = np.atleast_1d(np.asarray(n))
    res = ReductionSet(orders)
    for ch in _normalise_channels(channels):
        if ch == "emission" and callable(temperature):
            res.log[ch] = reduction_emission(particle, timeline, temperature, orders)
        else:
            res.log[ch] = reduction_static(ch, particle, env, timeline, orders, csl=csl, temperature=temperature)
    return res


def _normalise_channels(channels):
    out = []
    for ch in channels:
        ch = SHORT_NAMES.get(ch, ch)
        if ch not in CHANNELS:
            raise ValueError(f"unknown decoherence channel {ch!r}")
        if ch not in out:
            out.append(ch)
    return out


class DecoherenceModel:
    """Callable ``R(orders, timeline)`` for use with :func:`dynamics.fringe_pattern`.

    Results are cached per (timeline, orders), so scans over grating
    parameters reuse them while scans over ``t1`` or ``t2`` recompute.
    """

    def __init__(self, particle, env=Environment(), channels=CHANNELS, temperature=None, csl=CSL()):
        self.particle = particle
        self.env = env
        self.channels = tuple(_normalise_channels(channels))
        self.temperature = temperature
        self.csl = csl
        self._cache = {}

    def reductions(self, orders, timeline):
        orders = np.atleast_1d(np.asarray(orders))
        key = (timeline, orders.tobytes())
        hit = self._cache.get(key)
        if hit is None:
            hit = total_reduction(self.particle, self.env, timeline, orders, temperature=self.temperature,
                                  channels=self.channels, csl=self.csl)
            if len(self._cache) > 4096:
                self._cache.clear()
            self._cache[key] = hit
        return hit

    def __call__(self, orders, timeline):
        return self.reductions(orders, timeline).combined


def csl_bound(visibility_ratio, particle, timeline, *, length=100e-9, n=1):
    """Largest ``lambda_CSL`` compatible with a measured visibility ratio.

    ``ln R_n^CSL`` is linear in ``lambda``, so the inversion is exact.
    """
    if not 0 < visibility_ratio < 1:
        raise ValueError("visibility ratio must lie in (0, 1)")
    loss = float(loss_csl(separation(n, timeline), length))
    per_rate = (particle.mass / const.amu) ** 2 * loss * timeline.total
    return -math.log(visibility_ratio) / per_rate
