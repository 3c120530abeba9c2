"""Standing-wave phase grating: eikonal phase and Talbot coefficients.

The grating acts on the characteristic function as a convolution over
momentum orders ``n h / d`` with coefficients ``B_n(xi)``, where ``xi = s/d``
is the path separation in units of the grating period. For a pure phase
grating ``B_n = J_n(phi0 sin(pi xi))``; the classical (ballistic) analogue
replaces ``sin(pi xi)`` by ``pi xi``. Photon absorption and Rayleigh
scattering during the pulse modify the coefficients (see
:func:`coeff_with_absorption` and :func:`combine_scattering`).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import special

from . import constants as const
from .errors import BranchPointWarning, NumericError, UnsupportedMaterialError
from .materials import optical_response

Mode = Literal["quantum", "classical"]

CUTOFF_TOL = 1e-12


@dataclass(frozen=True)
class GratingPulse:
    """A retro-reflected laser pulse forming a grating of period ``wavelength/2``.

    ``beta`` and ``eta`` are the absorbed and scattered photon numbers per unit
    imprinted phase (``n0 = 2 beta phi0``, ``n_R = 2 eta phi0``).
    ``pulse_energy`` and ``spot_area`` are kept for bookkeeping and may be
    ``None`` when ``phi0`` is given directly.
    """

    wavelength: float
    phi0: float
    beta: float = 0.0
    eta: float = 0.0
    pulse_energy: float | None = None
    spot_area: float | None = None

    def __post_init__(self):
        if self.wavelength <= 0:
            raise ValueError("grating wavelength must be positive")
        if self.phi0 < 0:
            raise ValueError("phi0 must be non-negative")
        if self.beta < 0 or self.eta < 0:
            raise ValueError("beta and eta must be non-negative")

    @property
    def period(self):
        return self.wavelength / 2.0

    @property
    def n0(self):
        return 2.0 * self.beta * self.phi0

    @property
    def n_R(self):
        return 2.0 * self.eta * self.phi0

    @classmethod
    def from_particle(cls, particle, wavelength, *, pulse_energy=None, spot_area=None, phi0=None):
        """Build a pulse whose beta, eta and (optionally) phi0 follow from the particle.

        Exactly one of ``phi0`` or (``pulse_energy``, ``spot_area``) must be given.
        """
        response = optical_response(particle, wavelength)
        if phi0 is None:
            if pulse_energy is None or spot_area is None:
                raise ValueError("give phi0 or both pulse_energy and spot_area")
            phi0 = phase_amplitude(particle, pulse_energy, spot_area, wavelength)
        elif pulse_energy is not None:
            raise ValueError("give either phi0 or pulse_energy, not both")
        return cls(wavelength, phi0, response.beta, response.eta, pulse_energy, spot_area)

    def replace(self, **changes):
        kw = dict(wavelength=self.wavelength, phi0=self.phi0, beta=self.beta, eta=self.eta,
                  pulse_energy=self.pulse_energy, spot_area=self.spot_area)
        kw.update(changes)
        return GratingPulse(**kw)


def spot_area(waist):
    """Spot area ``pi w^2`` used for a quoted beam waist."""
    return math.pi * waist**2


def phase_amplitude(particle, pulse_energy, spot_area, wavelength):
    """Maximum eikonal phase ``phi0 = 2 Re(alpha) E_G / (hbar c eps0 a_G)``."""
    if pulse_energy < 0:
        raise ValueError("pulse energy must be non-negative")
    if spot_area <= 0:
        raise ValueError("spot area must be positive")
    alpha = optical_response(particle, wavelength).alpha
    if alpha.real <= 0:
        raise UnsupportedMaterialError(
            f"Re(alpha) = {alpha.real:.3g} <= 0 at {wavelength:.4g} m; phase grating needs an attractive potential")
    return 2.0 * alpha.real * pulse_energy / (const.hbar * const.c * const.epsilon_0 * spot_area)


# --- coefficients -----------------------------------------------------------


def coeff_coherent(n, xi, phi0):
    return special.jv(n, phi0 * np.sin(np.pi * np.asarray(xi, dtype=float)))


def coeff_classical(n, xi, phi0):
    return special.jv(n, phi0 * np.pi * np.asarray(xi, dtype=float))


def _zeta(xi, phi0, beta, mode):
    xi = np.asarray(xi, dtype=float)
    coh = phi0 * np.sin(np.pi * xi) if mode == "quantum" else phi0 * np.pi * xi
    if mode not in ("quantum", "classical"):
        raise ValueError(f"unknown mode {mode!r}")
    absorb = beta * phi0 * (1.0 - np.cos(np.pi * xi))
    return coh, absorb


def coeff_with_absorption(n, xi, phi0, beta, mode: Mode = "quantum"):
    """Talbot coefficient including random photon absorption.

    Evaluates the Graf closed form
    ``exp(-za) * ((zc + za)/(zc - za))**(n/2) * J_n(sgn(zc - za) sqrt(zc**2 - za**2))``
    with ``zc = phi0 sin(pi xi)`` (``phi0 pi xi`` classically) and
    ``za = beta phi0 (1 - cos(pi xi))`` in complex arithmetic. Below the
    branch (``zc**2 < za**2``) the principal branches continue the expression
    analytically to a real value. Exactly at ``zc = +-za`` the closed form is
    0/0 and the coefficient is taken from the convolution route instead.

    Returns a real value (or array); the discarded imaginary part is checked
    to be below 1e-10.
    """
    if beta < 0:
        raise ValueError("beta must be non-negative")
    n_arr, xi_arr = np.broadcast_arrays(np.asarray(n), np.asarray(xi, dtype=float))
    scalar = n_arr.ndim == 0
    n_arr, xi_arr = np.atleast_1d(n_arr), np.atleast_1d(xi_arr)
    zc, za = _zeta(xi_arr, phi0, beta, mode)
    nf = n_arr.astype(float)
    diff, summ = zc - za, zc + za
    scale = np.maximum(np.abs(zc), za)
    branch = (za > 0) & ((np.abs(diff) <= 1e-14 * scale) | (np.abs(summ) <= 1e-14 * scale))
    generic = (za > 0) & ~branch
    out = np.asarray(special.jv(nf, zc), dtype=float).copy()
    if np.any(generic):
        d, s_, c, a = diff[generic], summ[generic], zc[generic], za[generic]
        ratio = (s_ / d).astype(complex)
        arg = np.sign(d) * np.sqrt((c * c - a * a).astype(complex))
        val = np.exp(-a) * ratio ** (nf[generic] / 2.0) * special.jv(nf[generic], arg)
        if np.any(np.abs(val.imag) > 1e-10):
            raise NumericError(f"closed form not real: max imaginary part {np.abs(val.imag).max():.3g}",
                               where="grating.coeff_with_absorption")
        out[generic] = val.real
    for idx in zip(*np.nonzero(branch)):
        warnings.warn(f"branch point zeta_coh = +-zeta_abs at xi={float(xi_arr[idx])!r}; using convolution",
                      BranchPointWarning, stacklevel=2)
        out[idx] = coeff_convolution(int(n_arr[idx]), float(xi_arr[idx]), phi0, beta, 0.0, mode=mode).real
    return float(out[0]) if scalar else out


def _sinc_term(xi):
    """(sin(pi xi) - j1(pi xi)) / (2 pi xi), continuous at xi = 0 with value 1/3."""
    x = np.pi * np.abs(np.asarray(xi, dtype=float))
    small = x < 1e-4
    safe = np.where(small, 1.0, x)
    val = (np.sin(safe) - special.spherical_jn(1, safe)) / (2.0 * safe)
    return np.where(small, 1.0 / 3.0 - x * x / 15.0, val)


def coeff_scattering(n, xi, n_R):
    """Rayleigh-scattering kernel ``R_n^(sca)(xi)`` for ``n_R`` scattered photons."""
    if n_R < 0:
        raise ValueError("n_R must be non-negative")
    xi = np.asarray(xi, dtype=float)
    s = _sinc_term(xi)
    cos = np.cos(np.pi * xi)
    arg = 0.5 * n_R * (3.0 * s - cos)
    expo = -0.5 * n_R * (1.0 - 3.0 * cos * s)
    # scaled form exp(expo + |arg|) ive(n, arg); plain iv returns nan for subnormal arguments
    return np.exp(expo + np.abs(arg)) * special.ive(n, arg)


def scattering_kernel_sum(xi, n_R):
    """Closed form of ``sum_n R_n^(sca)(xi)`` from the generating function of I_n."""
    xi = np.asarray(xi, dtype=float)
    s = _sinc_term(xi)
    return np.exp(0.5 * n_R * (3.0 * s - 1.0) * (1.0 + np.cos(np.pi * xi)))


@dataclass(frozen=True)
class TalbotCoefficientSet:
    """Coefficients ``B_n(xi)`` for ``n = -N..N`` at a single ``xi``."""

    xi: float
    values: np.ndarray

    @property
    def cutoff(self):
        return (self.values.size - 1) // 2

    @property
    def orders(self):
        N = self.cutoff
        return np.arange(-N, N + 1)

    def __getitem__(self, n):
        N = self.cutoff
        if abs(n) > N:
            return 0.0
        return self.values[n + N]


def cutoff_for(phi0, beta=0.0, n_R=0.0, mode: Mode = "quantum", xi=None):
    """Order cutoff sufficient for |B_N| + |B_{N+1}| < 1e-12.

    Bounded Bessel arguments decay super-exponentially once ``N`` exceeds the
    argument; classically the argument grows with ``xi``.
    """
    amp = phi0 * (1.0 + 2.0 * beta) + 2.0 * n_R
    if mode == "classical" and xi is not None:
        amp = max(amp, phi0 * math.pi * abs(xi) + 2.0 * beta * phi0 + 2.0 * n_R)
    N = 10
    # (amp/2)^N / N! < tol
    while N * math.log(max(amp, 1e-300) / 2.0) - math.lgamma(N + 1) > math.log(CUTOFF_TOL * 1e-2):
        N += 1
    return max(N, 10)


def talbot_coefficients(xi, phi0, beta=0.0, n_R=0.0, mode: Mode = "quantum", cutoff=None):
    """Full coefficient set at one ``xi``, including absorption and scattering."""
    N = cutoff if cutoff is not None else cutoff_for(phi0, beta, n_R, mode, xi)
    orders = np.arange(-N, N + 1)
    if beta > 0:
        vals = coeff_with_absorption(orders, np.full(orders.shape, xi), phi0, beta, mode)
    elif mode == "quantum":
        vals = coeff_coherent(orders, xi, phi0)
    else:
        vals = coeff_classical(orders, xi, phi0)
    coeffs = TalbotCoefficientSet(float(xi), np.asarray(vals, dtype=float))
    if n_R > 0:
        coeffs = combine_scattering(coeffs, xi, n_R)
    tail = abs(coeffs.values[0]) + abs(coeffs.values[-1])
    if tail > 2 * CUTOFF_TOL:
        raise NumericError(f"coefficient cutoff N={N} too small (tail {tail:.2e})",
                           where="grating.talbot_coefficients")
    return coeffs


def combine_scattering(coeffs, xi, n_R):
    """Convolve a coefficient set with the scattering kernel, truncated at the set's cutoff."""
    N = coeffs.cutoff
    kernel = coeff_scattering(np.arange(-2 * N, 2 * N + 1), xi, n_R)
    full = np.convolve(coeffs.values, kernel)
    # full index k corresponds to order k - 3N
    return TalbotCoefficientSet(coeffs.xi, full[2 * N: 4 * N + 1].copy())


def coeff_convolution(n, xi, phi0, beta, n_R, mode: Mode = "quantum", cutoff=None):
    """Reference coefficient from explicit convolutions.

    The coherent Bessel coefficients are convolved with the modified-Bessel
    absorption kernel ``exp(-z) I_j(z)``, ``z = n0 (1 - cos(pi xi)) / 2``, and
    then with the Rayleigh kernel. Independent of the Graf closed form.
    """
    xi = float(xi)
    zc = phi0 * math.sin(math.pi * xi) if mode == "quantum" else phi0 * math.pi * xi
    z = beta * phi0 * (1.0 - math.cos(math.pi * xi))
    N = cutoff or (cutoff_for(phi0, beta, n_R, mode, xi) + 20 + abs(int(n)))
    j = np.arange(-N, N + 1)
    coherent = special.jv(j, zc)
    absorb = special.ive(j, z) if z > 0 else (j == 0).astype(float)
    total = np.convolve(coherent, absorb)  # orders -2N..2N
    if n_R > 0:
        total = np.convolve(total, coeff_scattering(j, xi, n_R))  # orders -3N..3N
        offset = 3 * N
    else:
        offset = 2 * N
    idx = int(n) + offset
    if idx < 0 or idx >= total.size:
        return 0.0
    return complex(total[idx])
