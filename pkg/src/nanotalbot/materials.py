"""Optical response of dielectric nanospheres in the point-dipole limit.

A :class:`Material` carries a tabulated complex refractive-index spectrum.
Everything else (polarizability, cross sections, thermal photon rates) is
derived from ``eps = n**2`` through the Clausius-Mossotti factor
``chi = (eps - 1) / (eps + 2)``.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Literal

import numpy as np

from . import constants as const
from .errors import (
    QuadratureWarning,
    SingularityError,
    SpectrumError,
    SpectrumRangeWarning,
)

SPECTRUM_HEADER = ("wavelength_m", "n_real", "n_imag")

RateKind = Literal["absorption", "scattering", "emission"]


@dataclass(frozen=True, eq=False)
class Material:
    """Dielectric with a tabulated refractive-index spectrum.

    ``spectrum`` rows are ``(wavelength [m], n_real, n_imag)`` sorted by
    wavelength. Instances hash by identity so derived quadrature grids can be
    cached per material.
    """

    name: str
    wavelengths: np.ndarray
    n_real: np.ndarray
    n_imag: np.ndarray
    density: float
    specific_heat: float = 700.0
    ionization_energy: float = 5.0 * const.eV
    static_permittivity: float = 1.0

    def __post_init__(self):
        wl = np.asarray(self.wavelengths, dtype=float)
        nr = np.asarray(self.n_real, dtype=float)
        ni = np.asarray(self.n_imag, dtype=float)
        if not (wl.shape == nr.shape == ni.shape) or wl.ndim != 1:
            raise SpectrumError("spectrum columns must be 1-D and of equal length")
        if wl.size < 2:
            raise SpectrumError("spectrum needs at least two rows")
        if np.any(wl <= 0):
            raise SpectrumError("wavelengths must be positive")
        if np.any(np.diff(wl) <= 0):
            raise SpectrumError("wavelengths must be strictly increasing")
        if np.any(ni < 0):
            raise SpectrumError("n_imag must be non-negative (passive medium)")
        if self.static_permittivity < 1:
            raise ValueError("static permittivity must be >= 1")
        if self.density <= 0:
            raise ValueError("density must be positive")
        for name, arr in (("wavelengths", wl), ("n_real", nr), ("n_imag", ni)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def spectrum(self):
        return list(zip(self.wavelengths.tolist(), self.n_real.tolist(), self.n_imag.tolist()))

    @property
    def wavelength_range(self):
        return float(self.wavelengths[0]), float(self.wavelengths[-1])


@dataclass(frozen=True, eq=False)
class Particle:
    """Homogeneous sphere of a given material.

    Use :meth:`from_mass` or :meth:`from_radius`; the direct constructor does
    not check that ``mass`` and ``radius`` are consistent with the density.
    """

    mass: float
    radius: float
    material: Material
    internal_temperature: float = 300.0

    def __post_init__(self):
        if self.mass <= 0 or self.radius <= 0:
            raise ValueError("mass and radius must be positive")
        if self.internal_temperature < 0:
            raise ValueError("internal temperature must be >= 0")

    @classmethod
    def from_mass(cls, mass, material, internal_temperature=300.0):
        radius = (3.0 * mass / (4.0 * math.pi * material.density)) ** (1.0 / 3.0)
        return cls(mass, radius, material, internal_temperature)

    @classmethod
    def from_radius(cls, radius, material, internal_temperature=300.0):
        mass = 4.0 * math.pi * radius**3 * material.density / 3.0
        return cls(mass, radius, material, internal_temperature)

    def with_temperature(self, internal_temperature):
        return Particle(self.mass, self.radius, self.material, internal_temperature)


@dataclass(frozen=True)
class OpticalResponse:
    wavelength: float
    alpha: complex
    beta: float
    eta: float
    sigma_abs: float
    sigma_sca: float
    clamped: bool = field(default=False, compare=False)


# --- spectrum I/O -----------------------------------------------------------


def load_spectrum(source, name=None, *, density, specific_heat=700.0,
                  ionization_energy=5.0 * const.eV, static_permittivity=None):
    """Parse a spectrum CSV into a :class:`Material`.

    ``source`` may be a path, raw bytes, a text string containing the CSV, or
    an open file object. The header must be ``wavelength_m,n_real,n_imag``;
    lines starting with ``#`` are ignored. Rows are sorted by wavelength and
    duplicate wavelengths are rejected.

    If ``static_permittivity`` is omitted it is taken as ``n_real**2`` at the
    longest tabulated wavelength.
    """
    text, default_name = _read_source(source)
    rows = []
    header_seen = False
    for lineno, line in enumerate(io.StringIO(text), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = [f.strip() for f in next(csv.reader([stripped]))]
        if not header_seen:
            if tuple(fields) != SPECTRUM_HEADER:
                raise SpectrumError(
                    f"expected header {','.join(SPECTRUM_HEADER)!r}, got {stripped!r}", lineno)
            header_seen = True
            continue
        if len(fields) != 3:
            raise SpectrumError(f"expected 3 columns, got {len(fields)}", lineno)
        try:
            wl, nr, ni = (float(f) for f in fields)
        except ValueError:
            raise SpectrumError(f"non-numeric value in {stripped!r}", lineno) from None
        if not all(math.isfinite(v) for v in (wl, nr, ni)):
            raise SpectrumError("non-finite value", lineno)
        if wl <= 0:
            raise SpectrumError("wavelength must be positive", lineno)
        if ni < 0:
            raise SpectrumError("n_imag must be non-negative", lineno)
        rows.append((wl, nr, ni))

    if not header_seen:
        raise SpectrumError("empty spectrum (no header)")
    if len(rows) < 2:
        raise SpectrumError(f"spectrum needs at least two rows, got {len(rows)}")
    rows.sort(key=lambda r: r[0])
    wl = np.array([r[0] for r in rows])
    if np.any(np.diff(wl) <= 0):
        dup = wl[1:][np.diff(wl) <= 0][0]
        raise SpectrumError(f"duplicate wavelength {dup!r}")
    nr = np.array([r[1] for r in rows])
    ni = np.array([r[2] for r in rows])
    if static_permittivity is None:
        static_permittivity = max(1.0, float(nr[-1] ** 2))
    return Material(
        name=name or default_name,
        wavelengths=wl,
        n_real=nr,
        n_imag=ni,
        density=density,
        specific_heat=specific_heat,
        ionization_energy=ionization_energy,
        static_permittivity=static_permittivity,
    )


def _read_source(source):
    if isinstance(source, bytes):
        return source.decode("utf-8"), "material"
    if isinstance(source, Path):
        return source.read_text(encoding="utf-8"), source.stem
    if isinstance(source, str):
        if "\n" in source or "," in source or not source.strip():
            return source, "material"
        path = Path(source)
        return path.read_text(encoding="utf-8"), path.stem
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data, getattr(source, "name", "material")


# bulk defaults; the densities are textbook values, c_m = 700 J/(kg K) for both
_BUNDLED = {
    "silicon": dict(file="silicon.csv", density=2329.0, specific_heat=700.0,
                    ionization_energy=5.0 * const.eV, static_permittivity=11.9),
    "silica": dict(file="silica.csv", density=2200.0, specific_heat=700.0,
                   ionization_energy=5.0 * const.eV, static_permittivity=3.8),
}
_ALIASES = {"si": "silicon", "sio2": "silica", "glass": "silica"}


@lru_cache(maxsize=None)
def _bundled(name):
    spec = dict(_BUNDLED[name])
    text = resources.files("nanotalbot").joinpath("data", spec.pop("file")).read_text(encoding="utf-8")
    return load_spectrum(text, name, **spec)


def bundled_material(name, **overrides):
    """Return one of the bundled materials (``"silicon"`` or ``"silica"``).

    Keyword overrides (``density``, ``specific_heat``, ...) produce a new
    material sharing the bundled spectrum.
    """
    key = _ALIASES.get(name.lower(), name.lower())
    if key not in _BUNDLED:
        raise KeyError(f"unknown bundled material {name!r}; choose from {sorted(_BUNDLED)}")
    base = _bundled(key)
    if not overrides:
        return base
    kwargs = dict(name=base.name, wavelengths=base.wavelengths, n_real=base.n_real,
                  n_imag=base.n_imag, density=base.density, specific_heat=base.specific_heat,
                  ionization_energy=base.ionization_energy,
                  static_permittivity=base.static_permittivity)
    kwargs.update(overrides)
    return Material(**kwargs)


def silicon(**overrides):
    return bundled_material("silicon", **overrides)


def silica(**overrides):
    return bundled_material("silica", **overrides)


# --- optical response -------------------------------------------------------


def refractive_index(material, wavelength, *, warn=True):
    """Complex refractive index at ``wavelength`` (scalar or array).

    Real and imaginary parts are interpolated linearly in wavelength. Queries
    outside the tabulated range are clamped to the nearest endpoint and a
    :class:`SpectrumRangeWarning` is issued.
    """
    wl = np.asarray(wavelength, dtype=float)
    if np.any(wl <= 0):
        raise ValueError("wavelength must be positive")
    lo, hi = material.wavelength_range
    if warn and (np.any(wl < lo) or np.any(wl > hi)):
        warnings.warn(
            f"{material.name}: wavelength outside tabulated range [{lo:.4g}, {hi:.4g}] m; clamped",
            SpectrumRangeWarning, stacklevel=2)
    n = np.interp(wl, material.wavelengths, material.n_real) \
        + 1j * np.interp(wl, material.wavelengths, material.n_imag)
    return complex(n) if n.ndim == 0 else n


def in_range(material, wavelength):
    lo, hi = material.wavelength_range
    return bool(lo <= wavelength <= hi)


def clausius_mossotti(eps):
    eps = np.asarray(eps, dtype=complex)
    if np.any(np.abs(eps + 2.0) < 1e-12):
        raise SingularityError("eps = -2: dipole plasmon pole")
    out = (eps - 1.0) / (eps + 2.0)
    return complex(out) if out.ndim == 0 else out


def polarizability(radius, eps):
    """SI polarizability ``4 pi eps0 R^3 (eps-1)/(eps+2)`` in C m^2/V."""
    return 4.0 * math.pi * const.epsilon_0 * radius**3 * clausius_mossotti(eps)


def static_polarizability(particle):
    return polarizability(particle.radius, particle.material.static_permittivity).real


def optical_response(particle, wavelength):
    clamped = not in_range(particle.material, wavelength)
    n = refractive_index(particle.material, wavelength)
    eps = n * n
    alpha = polarizability(particle.radius, eps)
    k = 2.0 * math.pi / wavelength
    omega = const.c * k
    sigma_abs = omega * alpha.imag / (const.c * const.epsilon_0)
    sigma_sca = k**4 * abs(alpha) ** 2 / (6.0 * math.pi * const.epsilon_0**2)
    beta = alpha.imag / alpha.real if alpha.real != 0 else math.inf
    eta = k**3 * abs(alpha) ** 2 / (6.0 * math.pi * const.epsilon_0 * alpha.real) \
        if alpha.real != 0 else math.inf
    return OpticalResponse(wavelength, alpha, beta, eta, sigma_abs, sigma_sca, clamped)


# --- thermal photon rates ---------------------------------------------------


def planck_occupation(omega, T):
    x = const.hbar * np.asarray(omega, dtype=float) / (const.k_B * T)
    with np.errstate(over="ignore"):
        return 1.0 / np.expm1(x)


def boltzmann_factor(omega, T):
    if T == 0:
        return np.zeros_like(np.asarray(omega, dtype=float))
    x = const.hbar * np.asarray(omega, dtype=float) / (const.k_B * T)
    with np.errstate(under="ignore"):
        return np.exp(-x)


def _rate_from_chi(kind, radius, omega, chi, T):
    u = omega * radius / const.c
    if kind == "absorption":
        return 4.0 * u**3 / math.pi * chi.imag * planck_occupation(omega, T)
    if kind == "scattering":
        return 8.0 * u**6 / (3.0 * math.pi) * np.abs(chi) ** 2 * planck_occupation(omega, T)
    if kind == "emission":
        return 4.0 * u**3 / math.pi * chi.imag * boltzmann_factor(omega, T)
    raise ValueError(f"unknown rate kind {kind!r}")


def spectral_rate(kind: RateKind, particle, omega, T):
    """Dimensionless spectral photon rate gamma(omega).

    Absorption and scattering use the Planck occupation of a thermal field at
    ``T`` (the environment); emission uses the Boltzmann factor at ``T`` (the
    particle's internal temperature), i.e. no stimulated emission.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("omega must be positive")
    if T <= 0:
        raise ValueError("temperature must be positive")
    n = refractive_index(particle.material, 2.0 * math.pi * const.c / omega)
    chi = np.asarray(clausius_mossotti(n * n))
    out = _rate_from_chi(kind, particle.radius, omega, chi, T)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """Frequency quadrature over a material's tabulated band.

    ``weights @ f(omega)`` approximates the integral of ``f``. The nodes are a
    log-spaced grid merged with the tabulated wavelengths (where the linearly
    interpolated integrand has kinks).
    """

    omega: np.ndarray
    weights: np.ndarray
    chi: np.ndarray

    def rate(self, kind, radius, T):
        return _rate_from_chi(kind, radius, self.omega, self.chi, T)


def _trapezoid_weights(x):
    w = np.empty_like(x)
    dx = np.diff(x)
    w[0] = dx[0] / 2
    w[-1] = dx[-1] / 2
    w[1:-1] = (dx[:-1] + dx[1:]) / 2
    return w


@lru_cache(maxsize=64)
def spectral_grid(material, n_points=4000):
    """Quadrature grid with ``n_points`` log-spaced base nodes.

    Trapezoid sums on the base grid and on its midpoint refinement are
    Richardson-combined, which removes the leading h^2 error term.
    """
    lo, hi = material.wavelength_range
    u_lo = math.log(2.0 * math.pi * const.c / hi)
    u_hi = math.log(2.0 * math.pi * const.c / lo)
    table = np.log(2.0 * math.pi * const.c / material.wavelengths)
    u_fine = np.union1d(np.linspace(u_lo, u_hi, 2 * n_points - 1), table)
    u_coarse = np.union1d(np.linspace(u_lo, u_hi, 2 * n_points - 1)[::2], table)
    u_fine = u_fine[(u_fine >= u_lo) & (u_fine <= u_hi)]
    u_coarse = u_coarse[(u_coarse >= u_lo) & (u_coarse <= u_hi)]
    omega = np.exp(u_fine)
    w_fine = _trapezoid_weights(omega)
    w_coarse = np.zeros_like(omega)
    w_coarse[np.searchsorted(u_fine, u_coarse)] = _trapezoid_weights(np.exp(u_coarse))
    weights = (4.0 * w_fine - w_coarse) / 3.0
    wl = np.clip(2.0 * math.pi * const.c / omega, lo, hi)
    n = refractive_index(material, wl, warn=False)
    chi = clausius_mossotti(n * n)
    for arr in (omega, weights, chi):
        arr.setflags(write=False)
    return SpectralGrid(omega, weights, chi)


def integrated_rate_and_power(kind: RateKind, particle, T, *, n_points=4000, check=True, rtol=1e-6):
    """Total photon rate [1/s] and power [W] integrated over the tabulated band.

    With ``check=True`` the integral is repeated on a grid with twice the
    points and a :class:`QuadratureWarning` is raised if the rate or power
    changes by more than ``rtol``.
    """
    grid = spectral_grid(particle.material, n_points)
    gamma = grid.rate(kind, particle.radius, T)
    rate = float(grid.weights @ gamma)
    power = float(grid.weights @ (const.hbar * grid.omega * gamma))
    if check:
        fine = spectral_grid(particle.material, 2 * n_points)
        gamma_f = fine.rate(kind, particle.radius, T)
        rate_f = float(fine.weights @ gamma_f)
        power_f = float(fine.weights @ (const.hbar * fine.omega * gamma_f))
        for label, a, b in (("rate", rate, rate_f), ("power", power, power_f)):
            if b != 0 and abs(a - b) > rtol * abs(b):
                warnings.warn(
                    f"{kind} {label} changed by {abs(a - b) / abs(b):.2e} (relative) under grid doubling",
                    QuadratureWarning, stacklevel=2)
    return rate, power
