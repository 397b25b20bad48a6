"""Lineshape and decay-envelope models for write-time and storage-time decays.

Linewidths are in kHz unless a function says otherwise, lineshape detunings in
Hz, delays in microseconds. The echo envelope of a spectral density is its
(magnitude) Fourier transform; the combined decay is the pointwise product of
the spin-dephasing (Voigt) time envelope and the field-gradient envelope,
which is the time-domain statement of convolving the two lineshapes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize

from .core import ValidationError, _require

HZ_US = 1e-6  # cycles per (Hz * us)
KHZ_US = 1e-3  # cycles per (kHz * us)
LN2 = math.log(2.0)


class FitError(ValidationError):
    """Fit failed to converge; carries the best parameters seen so far."""

    def __init__(self, msg: str, best=None, residual_rms: float | None = None):
        super().__init__(msg)
        self.best = best
        self.residual_rms = residual_rms


@dataclass(frozen=True)
class VoigtParams:
    """Gaussian and Lorentzian FWHM components of a Voigt profile, in kHz."""

    gaussian_fwhm: float
    lorentzian_fwhm: float

    def __post_init__(self) -> None:
        _require(self.gaussian_fwhm >= 0 and self.lorentzian_fwhm >= 0,
                 "FWHM components must be >= 0")
        _require(self.gaussian_fwhm > 0 or self.lorentzian_fwhm > 0,
                 "at least one Voigt component must be nonzero")


@dataclass(frozen=True)
class FieldProfile:
    """Parabolic magnetic field B(x) = a x^2 + b x + c across the crystal.

    ``a, b, c`` in (T/mm^2, T/mm, T); ``crystal_extent`` in mm; ``sensitivity_g``
    in kHz/mT for the relevant transition.
    """

    a: float
    b: float
    c: float
    crystal_extent: tuple[float, float]
    sensitivity_g: float

    def __post_init__(self) -> None:
        x0, x1 = self.crystal_extent
        _require(x1 > x0, "crystal_extent must have x1 > x0")
        _require(np.isfinite(self.a), "parabola coefficient a must be finite")

    def field(self, x: np.ndarray) -> np.ndarray:
        return self.a * x**2 + self.b * x + self.c

    def detuning_hz(self, x: np.ndarray) -> np.ndarray:
        """f(x) = g * B(x) converted to Hz (g in kHz/mT, B in T): g * B * 1e6."""
        return self.sensitivity_g * self.field(x) * 1e6

    def detuning_span_hz(self) -> tuple[float, float]:
        x0, x1 = self.crystal_extent
        xs = [x0, x1]
        if self.a != 0.0:
            xv = -self.b / (2.0 * self.a)
            if x0 < xv < x1:
                xs.append(xv)
        vals = self.detuning_hz(np.asarray(xs))
        return float(np.min(vals)), float(np.max(vals))

    def max_detuning_hz(self) -> float:
        """Largest detuning spread across the crystal (offset-free)."""
        lo, hi = self.detuning_span_hz()
        return hi - lo


# default profile: crystal within 1 mm of the magnet center, ~1 mT of field
# variation over 3 mm, giving at most ~300 Hz of detuning spread
def default_field_profile() -> FieldProfile:
    return FieldProfile(
        a=2.22e-4,  # T/mm^2; ~1 mT bowing across the 3 mm crystal
        b=-2.0e-5,  # T/mm; slight off-center tilt making the lineshape lopsided
        c=6.0,
        crystal_extent=(-1.4, 1.6),
        sensitivity_g=0.55,  # kHz/mT
    )


@dataclass(frozen=True)
class Lineshape:
    """Spectral density over detuning (Hz), normalized to unit trapezoid area."""

    detunings: np.ndarray
    density: np.ndarray

    def __post_init__(self) -> None:
        f = np.asarray(self.detunings, dtype=float)
        rho = np.asarray(self.density, dtype=float)
        _require(f.ndim == 1 and f.size >= 2, "need at least two grid points")
        _require(rho.shape == f.shape, "grid and density shapes must match")
        _require(np.all(np.diff(f) > 0), "detuning grid must be strictly increasing")
        _require(np.all(rho >= 0), "density must be nonnegative")
        area = np.trapezoid(rho, f)
        _require(area > 0, "density must have positive area")
        object.__setattr__(self, "detunings", f)
        object.__setattr__(self, "density", rho / area)

    @property
    def area(self) -> float:
        return float(np.trapezoid(self.density, self.detunings))

    def rms_width_hz(self) -> float:
        f, rho = self.detunings, self.density
        mean = np.trapezoid(f * rho, f)
        var = np.trapezoid((f - mean) ** 2 * rho, f)
        return float(np.sqrt(max(var, 0.0)))


@dataclass(frozen=True)
class DecayFit:
    """Result of fitting a decay curve: 1/e time (us) plus model components."""

    t_1e: float
    voigt: VoigtParams
    gradient_contribution: float  # Hz, rms width of the fixed gradient lineshape
    residual_rms: float

    def __post_init__(self) -> None:
        _require(self.t_1e > 0, "t_1e must be positive")


# ---------------------------------------------------------------------------
# lineshape constructors
# ---------------------------------------------------------------------------

def tophat_lineshape(width_hz: float, center_hz: float = 0.0, n_bins: int = 64) -> Lineshape:
    """Uniform density of full width ``width_hz``; envelope is |sinc(pi W t)|."""
    _require(width_hz > 0, "width must be positive")
    edges = np.linspace(center_hz - width_hz / 2, center_hz + width_hz / 2, n_bins + 1)
    return Lineshape(edges, np.ones_like(edges))


def lorentzian_lineshape(fwhm_hz: float, core_step: float = 0.003,
                         core_halfwidth: float = 12.0, tail_ratio: float = 1.003,
                         tail_reach: float = 3e6) -> Lineshape:
    """Lorentzian density on a grid dense enough for its piecewise-linear
    Fourier transform to track the exponential envelope to ~1e-6.

    Uniform sampling over +-``core_halfwidth`` half-widths, then geometric
    tails out to ``tail_reach`` half-widths (truncated tail mass ~2e-7).
    """
    _require(fwhm_hz > 0, "fwhm must be positive")
    gamma = fwhm_hz / 2.0
    core = np.arange(0.0, core_halfwidth, core_step)
    tail = [core_halfwidth]
    while tail[-1] < tail_reach:
        tail.append(tail[-1] * tail_ratio)
    x = np.concatenate([core, tail[1:]])
    f = np.concatenate([-x[:0:-1], x]) * gamma
    rho = (gamma / np.pi) / (f**2 + gamma**2)
    return Lineshape(f, rho)


def gaussian_lineshape(fwhm_hz: float, n: int = 8193, span_sigma: float = 8.0) -> Lineshape:
    _require(fwhm_hz > 0, "fwhm must be positive")
    sigma = fwhm_hz / (2.0 * math.sqrt(2.0 * LN2))
    f = np.linspace(-span_sigma * sigma, span_sigma * sigma, n)
    rho = np.exp(-0.5 * (f / sigma) ** 2)
    return Lineshape(f, rho)


def gradient_lineshape(profile: FieldProfile, n_slices: int = 1024) -> Lineshape:
    """Ion density over detuning for a parabolic field gradient.

    The crystal is sliced in the frequency domain and the ion count per
    frequency bin is integrated analytically on each monotone branch of the
    parabola, so the dx/df singularity at the vertex is never evaluated.
    """
    _require(n_slices >= 16, "need at least 16 frequency slices")
    x0, x1 = profile.crystal_extent
    fmin, fmax = profile.detuning_span_hz()
    span = fmax - fmin

    if span <= 0:
        # constant field: all ions at one detuning; delta-like density
        return Lineshape(np.array([-0.5, 0.5]), np.array([1.0, 1.0]))

    bin_width = max(span / n_slices, 1.0)  # floor 1 Hz
    n_bins = max(int(math.ceil(span / bin_width)), 1)
    edges_f = fmin + bin_width * np.arange(n_bins + 1)
    edges_f[-1] = max(edges_f[-1], fmax)

    # monotone branches of x(f)
    branches: list[tuple[float, float]] = []
    if profile.a == 0.0:
        branches.append((x0, x1))
    else:
        xv = -profile.b / (2.0 * profile.a)
        if x0 < xv < x1:
            branches.append((x0, xv))
            branches.append((xv, x1))
        else:
            branches.append((x0, x1))

    def x_of_f(f_hz: np.ndarray, lo: float, hi: float) -> np.ndarray:
        """Invert f(x) on a monotone branch, clipped to [lo, hi]."""
        b_t = profile.sensitivity_g * 1e6  # Hz per T
        if profile.a == 0.0:
            x = (f_hz / b_t - profile.c) / profile.b
        else:
            # x = xv +/- sqrt((f/b_t - c + b^2/(4a)) / a)
            xv = -profile.b / (2.0 * profile.a)
            disc = (f_hz / b_t - profile.c) / profile.a + (profile.b / (2 * profile.a)) ** 2
            root = np.sqrt(np.clip(disc, 0.0, None))
            sign = 1.0 if hi > xv else -1.0
            x = xv + sign * root
        return np.clip(x, lo, hi)

    mass = np.zeros(n_bins)
    for lo, hi in branches:
        xs = x_of_f(edges_f, lo, hi)
        mass += np.abs(np.diff(xs))

    # node grid: bin edges at the ends, bin centers inside; node densities from
    # per-bin masses so the vertex singularity enters only through its integral.
    # Detunings are reported relative to the low edge (the constant field
    # offset belongs to the optical frequency, not the gradient lineshape).
    edges_f = edges_f - edges_f[0]
    centers = 0.5 * (edges_f[:-1] + edges_f[1:])
    dens_bins = mass / np.diff(edges_f)
    grid = np.concatenate([[edges_f[0]], centers, [edges_f[-1]]])
    dens = np.concatenate([[dens_bins[0]], dens_bins, [dens_bins[-1]]])
    return Lineshape(grid, dens)


# ---------------------------------------------------------------------------
# envelopes
# ---------------------------------------------------------------------------

def _segment_moments(theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """M0 = int e^{-i theta u} du, M1 = int u e^{-i theta u} du over u in [-1/2, 1/2]."""
    theta = np.asarray(theta, dtype=float)
    small = np.abs(theta) < 1e-4
    t2 = theta * theta
    m0 = np.where(
        small,
        1.0 - t2 / 24.0 + t2 * t2 / 1920.0,
        np.sin(theta / 2.0) / np.where(small, 1.0, theta / 2.0),
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        m1_exact = (theta * np.cos(theta / 2.0) - 2.0 * np.sin(theta / 2.0)) / np.where(
            small, 1.0, t2
        )
    m1 = np.where(small, -theta / 12.0 + theta * t2 / 480.0, m1_exact)
    return m0, 1j * m1


def envelope_from_lineshape(ls: Lineshape, times_us: np.ndarray) -> np.ndarray:
    """|FT| of the density, exact for the piecewise-linear grid representation.

    Returns the envelope magnitude on ``times_us``; exactly 1 at t = 0 for a
    normalized lineshape.
    """
    t = np.atleast_1d(np.asarray(times_us, dtype=float))
    _require(np.all(t >= 0), "times must be >= 0")
    f = ls.detunings
    rho = ls.density
    f1, f2 = f[:-1], f[1:]
    w = f2 - f1
    fc = 0.5 * (f1 + f2)
    rho_mid = 0.5 * (rho[:-1] + rho[1:])
    drho = rho[1:] - rho[:-1]

    # phase per segment: theta = 2 pi t w (t in us, f in Hz)
    tw = 2.0 * np.pi * HZ_US * np.outer(t, w)
    m0, m1 = _segment_moments(tw)
    carrier = np.exp(-1j * 2.0 * np.pi * HZ_US * np.outer(t, fc))
    total = np.sum(w * carrier * (rho_mid * m0 + drho * m1), axis=1)
    return np.abs(total)


def voigt_time_envelope(voigt: VoigtParams, times_us: np.ndarray) -> np.ndarray:
    """Fourier pair of the Voigt lineshape: exp(-pi Gl t) * exp(-(pi Gg t)^2 / 4ln2)."""
    t = np.asarray(times_us, dtype=float)
    lor = np.pi * voigt.lorentzian_fwhm * KHZ_US * t
    gau = (np.pi * voigt.gaussian_fwhm * KHZ_US * t) ** 2 / (4.0 * LN2)
    return np.exp(-lor - gau)


def total_envelope(voigt: VoigtParams, grad: Lineshape | None,
                   times_us: np.ndarray) -> np.ndarray:
    """Combined decay envelope: Voigt dephasing times the field-gradient envelope.

    Convolving the two lineshapes is a pointwise product of their time
    envelopes, which keeps envelope(0) = 1 exactly.
    """
    env = voigt_time_envelope(voigt, times_us)
    if grad is not None:
        env = env * envelope_from_lineshape(grad, times_us)
    return env


def envelope_t1e(voigt: VoigtParams, grad: Lineshape | None,
                 t_max_us: float = 1e5) -> float:
    """Delay at which the combined envelope first crosses 1/e."""
    target = 1.0 / math.e

    def h(t):
        return float(total_envelope(voigt, grad, np.array([t]))[0]) - target

    t_hi = 1.0
    while h(t_hi) > 0 and t_hi < t_max_us:
        t_hi *= 2.0
    if h(t_hi) > 0:
        raise ValidationError("envelope does not reach 1/e within t_max")
    return float(brentq(h, 1e-9, t_hi, xtol=1e-9 * t_hi))


# ---------------------------------------------------------------------------
# decay fitting
# ---------------------------------------------------------------------------

def fit_decay(delays_us: np.ndarray, amplitudes: np.ndarray,
              gradient: Lineshape | None = None,
              n_starts: int = 3, max_iter: int = 4000) -> DecayFit:
    """Least-squares Voigt fit of a decay curve with a fixed gradient envelope.

    Fits (amplitude, gaussian FWHM, lorentzian FWHM) with a derivative-free
    simplex from ``n_starts`` starting splits, to avoid the shallow valley of
    the Gaussian/Lorentzian trade-off. The objective uses fractional
    residuals, which weights the decay tail where the two shapes separate and
    matches amplitude data whose noise scales with the signal. Reports the
    1/e time of the fitted envelope (gradient included).
    """
    t = np.asarray(delays_us, dtype=float)
    y = np.asarray(amplitudes, dtype=float)
    _require(t.size >= 6, "need at least 6 points")
    _require(np.all(y > 0), "amplitudes must be positive")
    _require(np.all(t >= 0), "delays must be >= 0")

    grad_env = (envelope_from_lineshape(gradient, t) if gradient is not None
                else np.ones_like(t))

    # crude scale for linewidth starts: treat the observed 1/e crossing as a
    # pure Lorentzian to get a kHz-scale guess
    amp0 = float(np.max(y))
    order = np.argsort(t)
    below = np.where(y[order] < amp0 / math.e)[0]
    t_1e_guess = t[order][below[0]] if below.size else t[order][-1]
    gamma_guess = 1.0 / (np.pi * max(t_1e_guess, 1e-6) * KHZ_US)  # kHz

    def model(params):
        amp, g_fwhm, l_fwhm = params
        lor = np.pi * abs(l_fwhm) * KHZ_US * t
        gau = (np.pi * abs(g_fwhm) * KHZ_US * t) ** 2 / (4.0 * LN2)
        return amp * np.exp(-lor - gau) * grad_env

    def loss(params):
        if params[0] <= 0:
            return 1e30
        r = (model(params) - y) / y
        return float(np.dot(r, r))

    splits = [(0.05, 0.95), (0.95, 0.05), (0.5, 0.5)][:n_starts]
    best = None
    for gs, ls in splits:
        x0 = np.array([amp0, gs * gamma_guess, ls * gamma_guess])
        res = minimize(loss, x0, method="Nelder-Mead",
                       options={"maxiter": max_iter, "xatol": 1e-10, "fatol": 1e-14})
        if best is None or res.fun < best.fun:
            best = res

    residual_rms = math.sqrt(best.fun / t.size)  # rms fractional residual
    params = (float(best.x[0]), abs(float(best.x[1])), abs(float(best.x[2])))
    if not best.success and residual_rms > 0.2:
        raise FitError("decay fit failed to converge", best=params,
                       residual_rms=residual_rms)

    voigt = VoigtParams(gaussian_fwhm=params[1], lorentzian_fwhm=params[2])
    t_1e = envelope_t1e(voigt, gradient)
    grad_rms = gradient.rms_width_hz() if gradient is not None else 0.0
    return DecayFit(t_1e=t_1e, voigt=voigt, gradient_contribution=grad_rms,
                    residual_rms=residual_rms)
