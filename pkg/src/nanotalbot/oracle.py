"""Brute-force references for the closed-form interference model.

* :func:`propagate_point_source` evolves Gaussian wavepackets on a grid with
  exact (spectral) free propagation and the eikonal grating phase, and sums
  the thermal mixture over momentum boosts.
* :func:`classical_monte_carlo` samples ballistic trajectories with the
  classical grating kick.
* :func:`coeff_convolution` (re-exported from :mod:`nanotalbot.grating`)
  builds the Talbot coefficients from explicit convolutions.

None of these include decoherence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import constants as const
from .errors import NumericError
from .grating import coeff_convolution  # noqa: F401  (public oracle API)

LEAK_TOL = 1e-6


class GridError(NumericError):
    """The wave grid is too small or too coarse for the requested propagation."""


def grating_phase(x, phi0, period):
    """Eikonal phase ``phi0 cos^2(pi x / d)`` of the standing-wave pulse."""
    return phi0 * np.cos(np.pi * np.asarray(x) / period) ** 2


def grating_kick(x, phi0, period):
    """Classical momentum kick ``hbar d(phi)/dx``."""
    return -const.hbar * phi0 * (np.pi / period) * np.sin(2.0 * np.pi * np.asarray(x) / period)


@dataclass
class WaveGrid:
    """Uniform periodic grid of ``size`` points spanning ``span`` metres, centred on 0."""

    size: int
    span: float
    mass: float

    def __post_init__(self):
        if self.size < 16 or self.size & (self.size - 1):
            raise ValueError("grid size must be a power of two >= 16")
        if self.span <= 0 or self.mass <= 0:
            raise ValueError("span and mass must be positive")

    @property
    def dx(self):
        return self.span / self.size

    @property
    def x(self):
        return (np.arange(self.size) - self.size // 2) * self.dx

    @property
    def k(self):
        return 2.0 * np.pi * np.fft.fftfreq(self.size, self.dx)

    def norm(self, psi):
        return float(np.sum(np.abs(psi) ** 2) * self.dx)

    def free(self, psi, t):
        """Exact free evolution over time ``t`` (diagonal in momentum)."""
        phase = np.exp(-0.5j * const.hbar * self.k**2 * t / self.mass)
        return np.fft.ifft(np.fft.fft(psi) * phase)

    def leakage(self, psi):
        """Norm fraction in the outer sixteenth of position space and of momentum space."""
        n = self.size
        edge = max(n // 32, 1)
        p = np.abs(psi) ** 2
        pos = (p[:edge].sum() + p[-edge:].sum()) / p.sum()
        q = np.abs(np.fft.fftshift(np.fft.fft(psi))) ** 2
        mom = (q[:edge].sum() + q[-edge:].sum()) / q.sum()
        return float(pos), float(mom)


def gaussian_packet(grid, sigma_x, x0=0.0, p0=0.0):
    x = grid.x
    psi = np.exp(-((x - x0) ** 2) / (4.0 * sigma_x**2) + 1j * p0 * x / const.hbar)
    return psi / math.sqrt(grid.norm(psi))


def _evolve(grid, psi, t1, phase, t2, check=True):
    n0 = grid.norm(psi)
    psi = grid.free(psi, t1)
    psi = psi * np.exp(1j * phase)
    psi = grid.free(psi, t2)
    drift = abs(grid.norm(psi) - n0)
    if check:
        pos, mom = grid.leakage(psi)
        if pos > LEAK_TOL or mom > LEAK_TOL:
            raise GridError(f"spectral leakage {max(pos, mom):.2e} exceeds {LEAK_TOL:g}",
                            where="oracle.propagate", state={"position": pos, "momentum": mom})
    return psi, drift


@dataclass(frozen=True)
class PeriodicDensity:
    """Fourier series of a D-periodic density: ``w(x) = sum_n c_n exp(2 pi i n x / D)``."""

    orders: np.ndarray
    coefficients: np.ndarray
    period: float
    norm_drift: float = 0.0

    def density(self, x):
        x = np.asarray(x, dtype=float)
        ph = np.exp(2j * np.pi * np.multiply.outer(x, self.orders) / self.period)
        return (ph @ self.coefficients).real

    @property
    def visibility(self):
        i0 = np.searchsorted(self.orders, 0)
        return 2.0 * abs(self.coefficients[i0 + 1]) / self.coefficients[i0].real


def propagate_point_source(sigma_x, sigma_p, mass, t1, t2, phi0, period, *, grid=None,
                           shifts=64, harmonics=40, check=True):
    """Wave-mechanical density at the centre of the dispersed thermal cloud.

    The source is a mixture of minimum-uncertainty packets of width
    ``sigma_x`` with Gaussian momentum boosts. A boost ``p0`` is equivalent,
    by Galilean invariance, to a packet at rest seeing the grating displaced
    by ``s = p0 t1 / m`` and a final displacement ``mu s``. Since the momentum
    spread covers many grating periods, ``s mod d`` is uniformly distributed
    and the mixture reduces to an average over ``s`` in ``[0, d)`` followed by
    periodization with period ``D = mu d`` (Poisson summation). The
    ``s``-average uses the trapezoid rule, which is spectrally accurate for
    periodic integrands.

    Returns a :class:`PeriodicDensity` normalised like the closed-form pattern
    (mean ``m / (sqrt(2 pi) sigma_p (t1 + t2))``).
    """
    if sigma_x <= 0 or sigma_p <= 0:
        raise ValueError("sigma_x and sigma_p must be positive")
    if grid is None:
        grid = WaveGrid(8192, 20e-6, mass)
    if grid.dx > period / 16:
        raise GridError(f"grid spacing {grid.dx:.3g} m does not resolve d/16", where="oracle.propagate")
    mu = (t1 + t2) / t1
    D = mu * period
    orders = np.arange(-harmonics, harmonics + 1)
    q = 2.0 * np.pi * orders / D
    x = grid.x
    psi0 = gaussian_packet(grid, sigma_x)
    acc = np.zeros(orders.shape, dtype=complex)
    drift = 0.0
    for j in range(shifts):
        s = period * j / shifts
        psi, dn = _evolve(grid, psi0, t1, grating_phase(x + s, phi0, period), t2, check)
        drift = max(drift, dn)
        rho = np.abs(psi) ** 2
        acc += (np.exp(-1j * np.multiply.outer(q, x + mu * s)) @ rho) * grid.dx
    acc *= period / shifts  # integral over s
    coeffs = mass / (math.sqrt(2.0 * math.pi) * sigma_p * t1) * acc / D
    return PeriodicDensity(orders, coeffs, D, drift)


def propagate_thermal_mixture(sigma_x, sigma_p, mass, t1, t2, phi0, period, grid, *, boosts=256,
                              check=True):
    """Full-grid density of the thermal mixture (small momentum spreads only).

    The momentum distribution ``N(0, sigma_p^2 - (hbar / 2 sigma_x)^2)`` of
    the packet boosts is sampled by ``boosts``-point Gauss-Hermite quadrature.
    Every boosted packet must stay on the grid.
    """
    extra = sigma_p**2 - (const.hbar / (2.0 * sigma_x)) ** 2
    if extra < 0:
        raise ValueError("sigma_x * sigma_p below the uncertainty bound")
    nodes, weights = np.polynomial.hermite_e.hermegauss(boosts)
    weights = weights / weights.sum()
    x = grid.x
    phase = grating_phase(x, phi0, period)
    rho = np.zeros(grid.size)
    for z, w in zip(nodes, weights):
        if w < 1e-300:
            continue
        psi = gaussian_packet(grid, sigma_x, p0=z * math.sqrt(extra))
        # nodes with negligible weight may leave the grid; only check the ones that matter
        psi, _ = _evolve(grid, psi, t1, phase, t2, check=check and w > 1e-12)
        rho += w * np.abs(psi) ** 2
    return x, rho


# --- classical trajectories -------------------------------------------------


@dataclass(frozen=True)
class MonteCarloResult:
    positions: np.ndarray
    period: float

    @property
    def size(self):
        return self.positions.size

    def histogram(self, bins=200, range=None):
        return np.histogram(self.positions, bins=bins, range=range)

    def folded_histogram(self, bins=64):
        """Histogram of ``x mod D`` normalised to unit mean."""
        h, edges = np.histogram(np.mod(self.positions, self.period), bins=bins, range=(0.0, self.period))
        return h * bins / h.sum(), edges

    def harmonic(self, n=1):
        return complex(np.mean(np.exp(2j * np.pi * n * self.positions / self.period)))

    def visibility(self):
        """Sinusoidal visibility ``2 |<exp(2 pi i x / D)>|`` and its standard error."""
        z = np.exp(2j * np.pi * self.positions / self.period)
        m = z.mean()
        direction = m / abs(m) if m != 0 else 1.0
        proj = (z * np.conj(direction)).real
        return 2.0 * abs(m), 2.0 * float(proj.std(ddof=1)) / math.sqrt(z.size)


def classical_monte_carlo(n, sigma_x, sigma_p, mass, t1, t2, phi0, period, seed, *, batch=1 << 18):
    """Arrival positions of ``n`` ballistic trajectories through the grating.

    Random numbers come from a counter-based Philox generator; batches are
    drawn and reduced in a fixed order, so equal seeds give identical output.
    """
    if n < 10_000:
        raise ValueError("at least 1e4 trajectories required")
    rng = np.random.Generator(np.random.Philox(seed))
    out = np.empty(n)
    done = 0
    while done < n:
        k = min(batch, n - done)
        x0 = rng.normal(0.0, sigma_x, k)
        p0 = rng.normal(0.0, sigma_p, k)
        x1 = x0 + p0 * t1 / mass
        p1 = p0 + grating_kick(x1, phi0, period)
        out[done:done + k] = x1 + p1 * t2 / mass
        done += k
    return MonteCarloResult(out, (t1 + t2) / t1 * period)
