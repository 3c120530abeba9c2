"""Source state, free-fall timeline and the final fringe pattern.

The particle is released from a thermal harmonic trap, falls freely for
``t1``, is hit by the grating pulse and falls for ``t2`` before detection.
For a point-like source the density behind the grating is periodic with the
magnified period ``D = mu d``,

    w(x) = m / (sqrt(2 pi) sigma_p (t1 + t2)) * sum_n A_n exp(2 pi i n (x - dx) / D),

with ``A_n = B_n(xi_n) exp(-2 pi^2 n^2 sigma_x^2 t2^2 / (d^2 (t1+t2)^2)) R_n`` and
``xi_n = n t1 t2 / (t_T (t1 + t2))``.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import constants as const
from .errors import NumericError, ValidityWarning, VisibilityError
from .grating import GratingPulse, coeff_scattering, coeff_with_absorption, cutoff_for
from .grating import coeff_classical, coeff_coherent
from .materials import optical_response

Mode = Literal["quantum", "classical"]

POINTS_PER_PERIOD = 512
TAIL_TOL = 1e-12


@dataclass(frozen=True)
class SourceState:
    """Gaussian thermal state of the trapped particle at release."""

    sigma_x: float
    sigma_p: float
    mass: float
    trap_frequency: float | None = None
    motional_temperature: float | None = None

    def __post_init__(self):
        if self.sigma_x < 0 or self.sigma_p <= 0 or self.mass <= 0:
            raise ValueError("sigma_x >= 0, sigma_p > 0 and mass > 0 required")

    @property
    def velocity_spread(self):
        return self.sigma_p / self.mass


def trap_state(mass, trap_frequency, temperature, mode: Literal["exact", "classical"] = "exact"):
    """Thermal state of a harmonic trap at frequency ``trap_frequency`` [Hz].

    ``exact`` uses the ``coth(h nu / 2 k T)`` forms (valid down to ``T = 0``);
    ``classical`` uses the equipartition limits.
    """
    if trap_frequency <= 0:
        raise ValueError("trap frequency must be positive")
    if temperature < 0 or (mode == "classical" and temperature == 0):
        raise ValueError("temperature must be positive")
    if mode == "exact":
        x = const.h * trap_frequency / (2.0 * const.k_B * temperature) if temperature > 0 else math.inf
        coth = 1.0 if x > 350 else 1.0 / math.tanh(x)
        sx2 = const.hbar / (4.0 * math.pi * mass * trap_frequency) * coth
        sp2 = math.pi * const.hbar * mass * trap_frequency * coth
    elif mode == "classical":
        sx2 = const.k_B * temperature / (4.0 * math.pi**2 * mass * trap_frequency**2)
        sp2 = mass * const.k_B * temperature
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return SourceState(math.sqrt(sx2), math.sqrt(sp2), mass, trap_frequency, temperature)


def talbot_time(mass, period):
    """Talbot time ``m d^2 / h``."""
    if mass <= 0 or period <= 0:
        raise ValueError("mass and period must be positive")
    return mass * period**2 / const.h


@dataclass(frozen=True)
class Timeline:
    """Free-fall times before (``t1``) and after (``t2``) the grating."""

    t1: float
    t2: float
    period: float
    mass: float

    def __post_init__(self):
        if not (self.t1 > 0 and self.t2 > 0):
            raise ValueError("t1 and t2 must be positive")
        if self.period <= 0 or self.mass <= 0:
            raise ValueError("period and mass must be positive")

    @classmethod
    def in_talbot_units(cls, t1, t2, period, mass):
        tT = talbot_time(mass, period)
        return cls(t1 * tT, t2 * tT, period, mass)

    @property
    def talbot_time(self):
        return talbot_time(self.mass, self.period)

    @property
    def total(self):
        return self.t1 + self.t2

    @property
    def magnification(self):
        return (self.t1 + self.t2) / self.t1

    @property
    def magnified_period(self):
        return self.magnification * self.period

    def xi(self, n):
        """Path separation (in grating periods) probed by harmonic ``n``."""
        return np.asarray(n, dtype=float) * self.t1 * self.t2 / (self.talbot_time * self.total)

    def replace(self, **changes):
        kw = dict(t1=self.t1, t2=self.t2, period=self.period, mass=self.mass)
        kw.update(changes)
        return Timeline(**kw)


@dataclass(frozen=True)
class ValidityReport:
    momentum_ratio: float  # sigma_p d / h
    position_ratio: float  # sigma_x / d
    momentum_ok: bool
    position_ok: bool

    @property
    def ok(self):
        return self.momentum_ok and self.position_ok


def point_source_validity(source, period, *, warn=True):
    """Check the regime ``sigma_p d / h >> 1`` and ``sigma_x / d << 1``."""
    mom = source.sigma_p * period / const.h
    pos = source.sigma_x / period
    report = ValidityReport(mom, pos, mom >= 10.0, pos <= 0.3)
    if warn and not report.ok:
        warnings.warn(f"point-source approximation questionable: sigma_p d/h = {mom:.3g}, "
                      f"sigma_x/d = {pos:.3g}", ValidityWarning, stacklevel=2)
    return report


# --- fringe pattern ---------------------------------------------------------

Reductions = None | Mapping[int, float] | Callable[[np.ndarray, Timeline], np.ndarray]


def _reduction_values(reductions, orders, timeline):
    if reductions is None:
        return np.ones(orders.shape)
    if isinstance(reductions, Mapping):
        return np.array([reductions.get(int(n), reductions.get(abs(int(n)), 1.0)) for n in orders], dtype=float)
    return np.asarray(reductions(orders, timeline), dtype=float)


@dataclass(frozen=True)
class FringePattern:
    """Fourier representation of the periodic far-field density."""

    orders: np.ndarray
    amplitudes: np.ndarray
    period: float
    prefactor: float
    shift: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def amplitude(self, n):
        idx = np.searchsorted(self.orders, n)
        if idx < self.orders.size and self.orders[idx] == n:
            return self.amplitudes[idx]
        return 0.0

    def density(self, x, *, complex_output=False):
        """Evaluate ``w(x)``. Returns the real part unless ``complex_output``."""
        x = np.asarray(x, dtype=float)
        phase = 2j * np.pi * np.multiply.outer(x - self.shift, self.orders) / self.period
        w = self.prefactor * (np.exp(phase) @ self.amplitudes.astype(complex))
        return w if complex_output else w.real

    def grid(self, periods=(-2, 2), points_per_period=POINTS_PER_PERIOD):
        lo, hi = periods
        n = int(round((hi - lo) * points_per_period))
        return self.period * (lo + np.arange(n) / points_per_period)

    @property
    def mean(self):
        return self.prefactor * self.amplitude(0).real

    @property
    def visibility(self):
        a0 = self.amplitude(0).real
        if a0 == 0:
            raise VisibilityError("A_0 = 0: sinusoidal visibility undefined")
        return 2.0 * abs(self.amplitude(1)) / a0

    def shifted(self, dx):
        return FringePattern(self.orders, self.amplitudes, self.period, self.prefactor, self.shift + dx, self.meta)


def _coefficients(orders, xi, pulse, mode):
    if pulse.n_R > 0:
        # the scattering kernel decays like n_R^k / k!, so a short direct sum
        # replaces the full convolution at each xi_n
        K = cutoff_for(0.0, 0.0, pulse.n_R)
        k = np.arange(-K, K + 1)
        inner = pulse.replace(eta=0.0)
        B = _coefficients(orders[:, None] - k[None, :], np.broadcast_to(xi[:, None], (xi.size, k.size)),
                          inner, mode)
        return np.sum(B * coeff_scattering(k[None, :], xi[:, None], pulse.n_R), axis=1)
    if pulse.beta > 0:
        return coeff_with_absorption(orders, xi, pulse.phi0, pulse.beta, mode)
    if mode == "quantum":
        return coeff_coherent(orders, xi, pulse.phi0)
    return coeff_classical(orders, xi, pulse.phi0)


def _amplitudes(N, source, timeline, pulse, reductions, mode):
    orders = np.arange(-N, N + 1)
    xi = timeline.xi(orders)
    B = _coefficients(orders, xi, pulse, mode)
    arg = source.sigma_x * timeline.t2 / (timeline.period * timeline.total)
    envelope = np.exp(-2.0 * math.pi**2 * orders**2 * arg**2)
    R = _reduction_values(reductions, orders, timeline)
    return orders, B * envelope * R


def _initial_cutoff(source, timeline, pulse, mode):
    N = cutoff_for(pulse.phi0, pulse.beta, pulse.n_R, mode)
    if mode == "classical":
        # J_n(n z) decays only for z < 1; beyond that rely on the source envelope
        arg = source.sigma_x * timeline.t2 / (timeline.period * timeline.total)
        if arg > 0:
            N = max(N, int(math.ceil(math.sqrt(-math.log(TAIL_TOL * 1e-2) / (2.0 * math.pi**2)) / arg)))
    return min(N, 4096)


def fringe_pattern(source, timeline, pulse, reductions: Reductions = None, acceleration=None,
                   mode: Mode = "quantum", cutoff=None, check_validity=True):
    """Final density pattern for a point-like thermal source.

    Parameters
    ----------
    source : SourceState
    timeline : Timeline
    pulse : GratingPulse
        ``beta`` and ``eta`` enable the absorption and scattering corrections.
    reductions : mapping, callable or None
        Decoherence factors ``R_n``. A callable is invoked as
        ``reductions(orders, timeline)``.
    acceleration : sequence of (duration, a) or None
        Piecewise-constant acceleration along the grating axis.
    mode : {"quantum", "classical"}
    cutoff : int, optional
        Harmonic cutoff ``N``; chosen adaptively when omitted.
    """
    if mode not in ("quantum", "classical"):
        raise ValueError(f"unknown mode {mode!r}")
    if check_validity:
        point_source_validity(source, timeline.period)
    N = cutoff or _initial_cutoff(source, timeline, pulse, mode)
    for attempt in range(2):
        orders, A = _amplitudes(N, source, timeline, pulse, reductions, mode)
        tail = abs(A[0]) + abs(A[1])
        if tail < TAIL_TOL:
            break
        if attempt == 0:
            N *= 2
    else:
        raise NumericError(f"harmonic series not converged at N={N} (tail {tail:.2e})",
                           where="dynamics.fringe_pattern", state={"N": N, "tail": tail})
    prefactor = source.mass / (math.sqrt(2.0 * math.pi) * source.sigma_p * timeline.total)
    shift = fringe_shift(acceleration, timeline) if acceleration else 0.0
    return FringePattern(orders, A.astype(complex), timeline.magnified_period, prefactor, shift,
                         {"mode": mode, "cutoff": N})


def visibility_sin(source, timeline, pulse, reductions: Reductions = None, mode: Mode = "quantum",
                   check_validity=True):
    """Sinusoidal visibility ``2 |A_1| / A_0``.

    Only ``A_0`` and ``A_1`` are needed, so no harmonic cutoff is involved.
    """
    orders = np.array([0, 1])
    if check_validity:
        point_source_validity(source, timeline.period)
    xi = timeline.xi(orders)
    B = _coefficients(orders, xi, pulse, mode)
    arg = source.sigma_x * timeline.t2 / (timeline.period * timeline.total)
    R = _reduction_values(reductions, orders, timeline)
    a0 = B[0] * R[0]
    a1 = B[1] * math.exp(-2.0 * math.pi**2 * arg**2) * R[1]
    if a0 == 0:
        raise VisibilityError("A_0 = 0: sinusoidal visibility undefined")
    return 2.0 * abs(a1) / a0


# --- kinematics -------------------------------------------------------------


def _displacement(profile, t):
    """Double integral of a piecewise-constant acceleration from 0 to t (zero initial velocity)."""
    x = v = 0.0
    elapsed = 0.0
    for duration, a in profile:
        if duration < 0:
            raise ValueError("segment durations must be non-negative")
        dt = min(duration, t - elapsed)
        if dt <= 0:
            break
        x += v * dt + 0.5 * a * dt * dt
        v += a * dt
        elapsed += dt
    if t > elapsed:
        x += v * (t - elapsed)
    return x


def fringe_shift(profile: Sequence[tuple[float, float]] | None, timeline):
    """Rigid fringe shift ``dx(t1 + t2) - mu dx(t1)`` from an external acceleration.

    ``profile`` is a list of ``(duration, acceleration)`` segments starting at
    release; time beyond the last segment has zero acceleration.
    """
    if not profile:
        return 0.0
    profile = [(float(d), float(a)) for d, a in profile]
    return _displacement(profile, timeline.total) - timeline.magnification * _displacement(profile, timeline.t1)


def detection_probability(source, timeline, window):
    """Probability of detection in a window of width ``window`` at the envelope centre."""
    if window < 0:
        raise ValueError("window must be non-negative")
    p = window * source.mass / (math.sqrt(2.0 * math.pi) * source.sigma_p * timeline.total)
    if p > 1:
        warnings.warn(f"detection probability {p:.3g} > 1: window exceeds the envelope", ValidityWarning,
                      stacklevel=2)
    return p


# --- scans ------------------------------------------------------------------


@dataclass(frozen=True)
class Carpet:
    """Rows of ``w(x)`` over a scan of ``t2`` or ``phi0``.

    ``x_over_D`` is common to all rows; ``periods[i]`` converts row ``i`` to metres.
    """

    variable: str
    values: np.ndarray
    x_over_D: np.ndarray
    periods: np.ndarray
    density: np.ndarray
    visibility: np.ndarray
    mode: str


def carpet(variable: Literal["t2", "phi0"], values, source, timeline, pulse, reductions: Reductions = None,
           mode: Mode = "quantum", periods=(-2, 2), points_per_period=POINTS_PER_PERIOD, threads=1):
    """Evaluate fringe patterns along a scan of ``t2`` or ``phi0``.

    Rows are independent; ``threads > 1`` evaluates them in a thread pool but
    the output order always follows ``values``.
    """
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if values.size == 0:
        raise ValueError("scan grid is empty")
    if variable not in ("t2", "phi0"):
        raise ValueError(f"carpet scans t2 or phi0, not {variable!r}")
    lo, hi = periods
    u = lo + np.arange(int(round((hi - lo) * points_per_period))) / points_per_period

    def row(v):
        tl, pl = timeline, pulse
        if variable == "t2":
            tl = timeline.replace(t2=v)
        else:
            pl = pulse.replace(phi0=v)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ValidityWarning)
            pat = fringe_pattern(source, tl, pl, reductions, mode=mode)
        return pat.density(u * pat.period), pat.period, pat.visibility

    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(row, values))
    else:
        rows = [row(v) for v in values]
    dens = np.array([r[0] for r in rows])
    per = np.array([r[1] for r in rows])
    vis = np.array([r[2] for r in rows])
    return Carpet(variable, values, u, per, dens, vis, mode)


# --- trap readout -----------------------------------------------------------


@dataclass(frozen=True)
class TrapReadout:
    sensitivity: float  # relative signal change per metre
    shot_noise: float  # relative, per sqrt(Hz)
    position_resolution: float | None = None  # m, after boxcar averaging


def trap_readout(particle, waist, wavelength, power, responsivity, periods=None, trap_frequency=None,
                 shot_noise: Literal["single", "double"] = "single"):
    """Position sensitivity and shot-noise floor of the trap detection.

    ``shot_noise="single"`` uses ``sqrt(e / (rho P))``, ``"double"`` uses
    ``sqrt(2 e / (rho P))``. With ``periods`` and ``trap_frequency`` the
    position resolution after boxcar averaging over that many oscillation
    periods is also returned.
    """
    for name, val in (("waist", waist), ("wavelength", wavelength), ("power", power),
                      ("responsivity", responsivity)):
        if val <= 0:
            raise ValueError(f"{name} must be positive")
    alpha = optical_response(particle, wavelength).alpha
    sens = 8.0 * alpha.real / (const.epsilon_0 * waist**3 * wavelength * math.sqrt(math.pi))
    factor = {"single": 1.0, "double": 2.0}[shot_noise]
    noise = math.sqrt(factor * const.e / (responsivity * power))
    res = None
    if periods is not None and trap_frequency is not None:
        if periods <= 0 or trap_frequency <= 0:
            raise ValueError("periods and trap_frequency must be positive")
        res = noise * math.sqrt(trap_frequency / periods) / sens
    return TrapReadout(sens, noise, res)
