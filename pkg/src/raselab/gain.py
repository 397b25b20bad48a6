"""Recall-efficiency models: the Ledingham closed form and a numerical
Maxwell-Bloch model with background absorption and imperfect rephasing.

The MBE model propagates a weak probe through the inverted feature (gain pass
on the ASE transition), conjugates the stored coherence at the rephasing time
scaled by the rephasing efficiency, and propagates the echo out through the
now-absorbing medium. Recall efficiency is the echo energy relative to the
stored-excitation budget, input energy times (e^{alpha L} - 1), which reduces
to the closed form 1 - e^{-alpha L} for a perfect rephase and no background.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import TimeTrace, ValidationError, WindowSpec, _require
from .sequence import PulseSequence

try:  # compiled kernel, with pure-python fallback selected at import
    from . import _mbe_core  # type: ignore[attr-defined]

    HAVE_COMPILED_KERNEL = True
except ImportError:  # pragma: no cover - depends on build environment
    _mbe_core = None
    HAVE_COMPILED_KERNEL = False

from . import _mbe_py

LN10 = math.log(10.0)


class StepSizeError(ValidationError):
    """Time step too large for the detuning grid."""


class ConvergenceError(ValidationError):
    """Propagation produced energy beyond the analytic gain bound."""


def kernel_backend(force: str | None = None) -> str:
    """Which propagation kernel is active: 'compiled' or 'python'.

    ``force`` (or env var RASELAB_MBE_BACKEND) can pin either backend.
    """
    choice = force or os.environ.get("RASELAB_MBE_BACKEND", "")
    if choice == "python":
        return "python"
    if choice == "compiled":
        if not HAVE_COMPILED_KERNEL:
            raise ValidationError("compiled kernel requested but not built")
        return "compiled"
    return "compiled" if HAVE_COMPILED_KERNEL else "python"


def _propagate(backend: str, *args):
    if backend == "compiled":
        return _mbe_core.propagate_segment(*args)
    return _mbe_py.propagate_segment(*args)


def default_detuning_grid(n_points: int = 257, span_mhz: float = 4.0) -> tuple[float, ...]:
    """Detuning grid (MHz) covering the feature; odd count keeps 0 on the grid.

    The grid spacing sets a spurious comb-rephasing time 1/d(delta); the span
    and count are chosen so that revival falls beyond the simulated window.
    """
    return tuple(np.linspace(-span_mhz, span_mhz, n_points))


@dataclass(frozen=True)
class MbeConfig:
    alpha_l_gain: float  # gain-length product on the ASE transition
    alpha_l_background: float = 0.0  # background absorption (same units)
    rephasing_efficiency: float = 1.0  # power fraction surviving the rephase pair
    detuning_grid: tuple[float, ...] = field(default_factory=default_detuning_grid)
    space_steps: int = 64
    time_step: float = 0.01  # us
    feature_fwhm_mhz: float = 1.0  # antihole width; super-Gaussian profile

    def __post_init__(self) -> None:
        _require(self.alpha_l_gain >= 0, "alpha_l_gain must be >= 0")
        _require(self.alpha_l_background >= 0, "alpha_l_background must be >= 0")
        _require(0.0 <= self.rephasing_efficiency <= 1.0,
                 "rephasing_efficiency must be in [0, 1]")
        _require(self.space_steps >= 8, "need at least 8 space steps")
        _require(self.time_step > 0, "time_step must be positive")
        _require(len(self.detuning_grid) >= 16, "need at least 16 detuning points")
        _require(self.feature_fwhm_mhz > 0, "feature width must be positive")

    def feature_profile(self) -> np.ndarray:
        """Flat-topped (4th-order super-Gaussian) antihole profile, peak 1."""
        delta = np.asarray(self.detuning_grid)
        return np.exp(-math.log(2.0) * (2.0 * delta / self.feature_fwhm_mhz) ** 4)


def gain_db_to_alpha_l(gain_db: float) -> float:
    """alpha L = (gain_dB / 10) ln 10, the power-gain convention."""
    _require(gain_db >= 0, f"gain_db must be >= 0, got {gain_db}")
    return (gain_db / 10.0) * LN10


def alpha_l_to_gain_db(alpha_l: float) -> float:
    return 10.0 * alpha_l / LN10


def ledingham_efficiency(alpha_l) -> float:
    """Ideal recall efficiency 8 sinh^2(aL/2) / (2 e^{aL} - 2) = 1 - e^{-aL}.

    The simplified form is used; the algebraic identity with the sinh form is
    exercised by the test suite across the full alpha L range.
    """
    alpha_l = np.asarray(alpha_l, dtype=float)
    if np.any(alpha_l < 0):
        raise ValidationError("alpha_l must be >= 0")
    result = -np.expm1(-alpha_l)
    return float(result) if result.ndim == 0 else result


def gaussian_probe_trace(t_center: float = 5.5, sigma_t: float = 1.5,
                         amplitude: float = 1e-3, duration: float = 11.0,
                         sample_rate: float = 100.0) -> TimeTrace:
    """Weak Gaussian probe envelope with an annotated input window."""
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    env = amplitude * np.exp(-0.5 * ((t - t_center) / sigma_t) ** 2)
    window = WindowSpec("input", max(t_center - 3 * sigma_t, 0.0),
                        min(6 * sigma_t, duration), None)
    return TimeTrace(sample_rate=sample_rate, samples=env, het_freq=0.0,
                     windows=(window,))


def _window_energy(trace: TimeTrace, window: WindowSpec) -> float:
    x = trace.window_samples(window)
    return float(np.sum(np.abs(x) ** 2)) / trace.sample_rate


def mbe_simulate(cfg: MbeConfig, seq: PulseSequence, input_trace: TimeTrace,
                 backend: str | None = None) -> dict:
    """Propagate an I4LE probe and its echo through the inverted feature.

    Returns ``{"output": TimeTrace, "efficiency": float, "gain_db_measured": float}``.
    The output trace holds the amplified probe (input window) and the echo
    (echo window); the gap while the coherence sits on the spin levels is
    recorded as zeros.
    """
    delta = np.asarray(cfg.detuning_grid, dtype=float)
    omega = 2.0 * np.pi * delta  # rad/us
    dt = cfg.time_step
    max_phase = float(np.max(np.abs(omega))) * dt
    if max_phase > 0.5:
        suggested = 0.5 / float(np.max(np.abs(omega)))
        raise StepSizeError(
            f"time_step {dt} us gives {max_phase:.2f} rad/step on the detuning grid; "
            f"use time_step <= {suggested:.4f}"
        )
    if abs(input_trace.sample_rate * dt - 1.0) > 1e-9:
        raise ValidationError(
            f"input trace sample rate {input_trace.sample_rate}/us must equal "
            f"1/time_step = {1.0 / dt}/us"
        )

    input_windows = input_trace.windows_of("input")
    _require(len(input_windows) == 1, "input trace needs exactly one input window")
    in_win = input_windows[0]
    e_in_energy = _window_energy(input_trace, in_win)
    _require(e_in_energy > 0, "input pulse has zero energy")

    profile = cfg.feature_profile()
    d_delta = float(delta[1] - delta[0])
    kappa = 4.0 * cfg.alpha_l_gain * profile * d_delta
    beta = cfg.alpha_l_background

    n_z = cfg.space_steps
    sigma = np.zeros((n_z, delta.size), dtype=np.complex128)

    t_freeze = in_win.end + seq.t_a
    n_a = int(round(t_freeze / dt))
    t_freeze = n_a * dt
    t_conj = t_freeze + max(seq.t_b, dt)
    n_gap = int(round((t_conj - t_freeze) / dt))
    t_conj = t_freeze + n_gap * dt

    # probe center: energy centroid of the input window
    x = input_trace.window_samples(in_win)
    tw = input_trace.times[input_trace.window_slice(in_win)]
    t_probe = float(np.sum(tw * np.abs(x) ** 2) / np.sum(np.abs(x) ** 2))
    echo_center = t_conj + (t_freeze - t_probe)
    echo_half = (in_win.length / 2.0) + 2.0 / cfg.feature_fwhm_mhz
    t_end = echo_center + echo_half + 1.0
    n_b = int(round((t_end - t_conj) / dt))

    # boundary field at half-step resolution for segment A; zero for segment B
    t_half_a = np.arange(2 * n_a + 1) * (dt / 2.0)
    env = np.interp(t_half_a, input_trace.times, input_trace.samples.real) + 1j * np.interp(
        t_half_a, input_trace.times, input_trace.samples.imag
    )

    which = kernel_backend(backend)
    out_a = _propagate(which, sigma, kappa, omega, 1.0, beta, dt, env, n_a)

    sigma[:] = math.sqrt(cfg.rephasing_efficiency) * np.conj(sigma)
    zeros_b = np.zeros(2 * n_b + 1, dtype=np.complex128)
    out_b = _propagate(which, sigma, kappa, omega, -1.0, beta, dt, zeros_b, n_b)

    n_total = n_a + n_gap + n_b
    samples = np.zeros(n_total, dtype=np.complex128)
    samples[:n_a] = out_a
    samples[n_a + n_gap:] = out_b

    duration = n_total * dt
    echo_win = WindowSpec("echo", max(echo_center - echo_half, t_conj),
                          min(2 * echo_half, duration - (echo_center - echo_half)), None)
    out_windows = (in_win, echo_win)
    output = TimeTrace(sample_rate=1.0 / dt, samples=samples, het_freq=0.0,
                       windows=out_windows)

    gain_power = _window_energy(output, in_win) / e_in_energy
    # transmitted probe must not exceed the analytic feature gain
    bound = math.exp(cfg.alpha_l_gain) * 1.05 + 1e-9
    if gain_power > bound:
        raise ConvergenceError(
            f"transmitted energy gain {gain_power:.3g} exceeds e^(alpha L) = "
            f"{math.exp(cfg.alpha_l_gain):.3g}; refine the grid/time step"
        )
    echo_energy = _window_energy(output, echo_win)
    denom = math.expm1(cfg.alpha_l_gain)
    efficiency = echo_energy / (e_in_energy * denom) if denom > 1e-12 else 0.0

    return {
        "output": output,
        "efficiency": float(efficiency),
        "gain_db_measured": 10.0 * math.log10(gain_power),
    }


def measure_gain(with_medium: TimeTrace, without_medium: TimeTrace,
                 window: WindowSpec) -> float:
    """Gain in dB from the energy ratio inside ``window``."""
    e_ref = _window_energy(without_medium, window)
    if e_ref <= 0:
        raise ValidationError("reference window has zero energy")
    e_sig = _window_energy(with_medium, window)
    return 10.0 * math.log10(e_sig / e_ref)


def efficiency_curve(gains_db, bg: float = 0.02, rephasing_efficiency: float = 0.82,
                     t_a: float = 6.0, t_b: float = 0.1,
                     threads: int = 1, backend: str | None = None) -> list[dict]:
    """MBE efficiency and the Ledingham reference across a gain scan.

    Each point is an independent propagation; the scan is a deterministic
    parallel map over gains.
    """
    from .sequence import build_i4le

    gains = [float(g) for g in gains_db]
    _require(all(0.0 <= g <= 40.0 for g in gains), "gains must lie in [0, 40] dB")

    def one(gain_db: float) -> dict:
        alpha_l = gain_db_to_alpha_l(gain_db)
        cfg = MbeConfig(alpha_l_gain=alpha_l, alpha_l_background=bg,
                        rephasing_efficiency=rephasing_efficiency)
        seq = build_i4le(t_a=t_a, t_b=t_b)
        probe = gaussian_probe_trace(sample_rate=1.0 / cfg.time_step)
        result = mbe_simulate(cfg, seq, probe, backend=backend)
        return {
            "gain_db": gain_db,
            "eff_mbe": result["efficiency"],
            "eff_ledingham": ledingham_efficiency(alpha_l),
        }

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, gains))
    return [one(g) for g in gains]
