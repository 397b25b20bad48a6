"""Measurement pipeline: demodulation, phase correction, windowed correlations,
vacuum subtraction, multiplexing, polarization metrics, inseparability and
squeezing inference.

All correlation and inseparability statistics operate on vacuum-normalized
baseband windows. The RASE window is read in the transform frame (conjugated,
mirror-paired with the ASE window), which is where the recorded pair shows the
equal, negative I and Q cross-correlations entering the EPR sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import fftconvolve
from scipy.special import voigt_profile

from .core import TimeTrace, ValidationError, WindowSpec, _require
from .quantum import GaussianState, fractional_shift

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class CorrelationResult:
    lags: np.ndarray  # us
    values: np.ndarray  # complex ensemble average
    kind: str  # auto_A | auto_R | cross | neighbor_cross | vacuum
    fwhm: float  # us, of |values| around the central peak

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.values)))

    def at_zero(self) -> complex:
        i0 = int(np.argmin(np.abs(self.lags)))
        return complex(self.values[i0])


@dataclass(frozen=True)
class InsepResult:
    b_grid: np.ndarray
    lam: np.ndarray
    lambda_min: float
    b_min: float
    sigma_min: float
    certainty_sigma: float


# ---------------------------------------------------------------------------
# demodulation and phase correction
# ---------------------------------------------------------------------------

def _lowpass_transfer(freqs_mhz: np.ndarray, cutoff_khz: float,
                      transition_frac: float = 0.2) -> np.ndarray:
    """Zero-phase low-pass: flat to the cutoff, raised-cosine to zero."""
    fc = cutoff_khz * 1e-3  # MHz
    edge = fc * (1.0 + transition_frac)
    af = np.abs(freqs_mhz)
    h = np.zeros_like(af)
    h[af <= fc] = 1.0
    roll = (af > fc) & (af < edge)
    h[roll] = 0.5 * (1.0 + np.cos(np.pi * (af[roll] - fc) / (edge - fc)))
    return h


def demodulate(trace: TimeTrace, f_mhz: float, cutoff_khz: float) -> TimeTrace:
    """Beat the record down by ``f_mhz`` and low-pass filter at ``cutoff_khz``.

    The filter is zero-phase (applied in the frequency domain), so window
    timestamps are preserved with no group delay to compensate.
    """
    nyquist_khz = trace.sample_rate * 1e3 / 2.0
    if cutoff_khz >= nyquist_khz:
        raise ValidationError(
            f"cutoff {cutoff_khz} kHz is at/above Nyquist {nyquist_khz} kHz"
        )
    shifted = trace.samples * np.exp(-2j * np.pi * f_mhz * trace.times)
    freqs = np.fft.fftfreq(shifted.size, d=1.0 / trace.sample_rate)
    filtered = np.fft.ifft(np.fft.fft(shifted) * _lowpass_transfer(freqs, cutoff_khz))
    windows = tuple(
        replace(w, ref_freq=w.ref_freq - f_mhz) if w.ref_freq is not None else w
        for w in trace.windows
    )
    return trace.with_samples(filtered, het_freq=trace.het_freq - f_mhz,
                              windows=windows)


def _reference_phase(trace: TimeTrace, window: WindowSpec,
                     margin_us: float = 0.8) -> tuple[float, float]:
    """Measured phase of one reference tone and its SNR."""
    sl = trace.window_slice(window)
    m = int(round(margin_us * trace.sample_rate))
    sl = slice(sl.start + m, sl.stop - m)
    t = trace.times[sl]
    x = trace.samples[sl] * np.exp(-2j * np.pi * window.ref_freq * (t - window.start))
    mean = np.mean(x)
    noise = np.std(x - mean) / math.sqrt(x.size) + 1e-30
    return float(np.angle(mean)), float(np.abs(mean) / noise)


def phase_correct(trace: TimeTrace, search_range_us: float = 0.1,
                  snr_threshold: float = 5.0) -> dict:
    """Estimate and undo per-shot trigger jitter and interferometer phase.

    Solves phi_k = phi0 - 2 pi f_k dt over the reference tones (least squares
    on the unit circle with a grid search to settle the 2 pi branch), then
    applies the inverse fractional time shift and phase to the whole trace.
    Returns ``{"trace", "jitter", "phase"}``.
    """
    refs = trace.windows_of("reference")
    if len(refs) < 2:
        raise ValidationError("need >= 2 reference windows to solve jitter + phase")
    phases = []
    freqs = []
    for w in refs:
        phi, snr = _reference_phase(trace, w)
        if snr < snr_threshold:
            raise ValidationError(
                f"reference at {w.ref_freq} MHz too weak (SNR {snr:.1f} < {snr_threshold})"
            )
        phases.append(phi)
        freqs.append(w.ref_freq)
    phases = np.array(phases)
    freqs = np.array(freqs)

    # grid over candidate jitters, phase residual on the unit circle
    dts = np.linspace(-search_range_us, search_range_us, 4001)
    rot = np.exp(1j * (phases[None, :] + TWO_PI * freqs[None, :] * dts[:, None]))
    resid = np.sum(np.abs(rot - np.mean(rot, axis=1, keepdims=True)) ** 2, axis=1)
    dt0 = dts[int(np.argmin(resid))]

    # linear refinement on the unwrapped branch near dt0
    psi = np.angle(np.exp(1j * (phases + TWO_PI * freqs * dt0)))
    a = np.column_stack([np.ones_like(freqs), -TWO_PI * freqs])
    sol, *_ = np.linalg.lstsq(a, psi, rcond=None)
    phi0 = float(sol[0])
    jitter = float(dt0 + sol[1])

    corrected = np.exp(-1j * phi0) * fractional_shift(
        trace.samples, -jitter, trace.sample_rate
    )
    return {
        "trace": trace.with_samples(corrected),
        "jitter": jitter,
        "phase": phi0,
    }


# ---------------------------------------------------------------------------
# window extraction helpers
# ---------------------------------------------------------------------------

def vacuum_quadrature_variance(traces, stride: int = 1) -> float:
    """Pooled per-quadrature variance of the vacuum windows."""
    acc = []
    for tr in traces:
        for w in tr.windows_of("vacuum"):
            x = tr.window_samples(w)[::stride]
            acc.append(x)
    _require(acc, "no vacuum windows found")
    x = np.concatenate(acc)
    return 0.5 * float(np.var(x.real) + np.var(x.imag))


def transform_frame_pairs(a_window: np.ndarray, r_window: np.ndarray) -> np.ndarray:
    """Mirror-paired (I_A, Q_A, I_R, Q_R) tuples with R read in the transform frame."""
    _require(a_window.size == r_window.size, "windows must have equal length")
    r_mirror = np.conj(r_window[::-1])
    return np.column_stack([
        a_window.real, a_window.imag, r_mirror.real, r_mirror.imag,
    ])


# ---------------------------------------------------------------------------
# correlations
# ---------------------------------------------------------------------------

def _fwhm_of(lags: np.ndarray, mags: np.ndarray) -> float:
    ipk = int(np.argmax(mags))
    half = mags[ipk] / 2.0

    def crossing(idx_range) -> float:
        prev = ipk
        for i in idx_range:
            if mags[i] < half:
                f = (half - mags[i]) / (mags[prev] - mags[i] + 1e-30)
                return lags[i] + f * (lags[prev] - lags[i])
            prev = i
        return lags[idx_range[-1]] if len(idx_range) else lags[ipk]

    left = crossing(range(ipk - 1, -1, -1))
    right = crossing(range(ipk + 1, len(mags)))
    return float(abs(right - left))


def _ensemble(windows, other, mode: str, sample_rate: float, kind: str,
              max_lag_fraction: float = 0.5) -> CorrelationResult:
    _require(len(windows) >= 2, "need >= 2 shots for ensemble statistics")
    dt = 1.0 / sample_rate
    acc = None
    for a, b in zip(windows, other):
        if mode == "convolve":
            c = fftconvolve(a, b, mode="full") * dt
        else:  # correlate: sum_t a(t) conj(b(t - tau))
            c = fftconvolve(a, np.conj(b[::-1]), mode="full") * dt
        acc = c if acc is None else acc + c
    acc /= len(windows)
    n = windows[0].size
    lag_idx = np.arange(acc.size) - (n - 1)
    # unbiased overlap normalization so the shape is the process correlation,
    # with the lag-0 amplitude convention (window integral) unchanged
    acc *= n / (n - np.abs(lag_idx))
    keep = np.abs(lag_idx) <= max(int(max_lag_fraction * n), 1)
    lags = lag_idx[keep] * dt
    acc = acc[keep]
    return CorrelationResult(lags=lags, values=acc, kind=kind,
                             fwhm=_fwhm_of(lags, np.abs(acc)))


def autocorrelate(windows, sample_rate: float, kind: str = "auto_A") -> CorrelationResult:
    """Ensemble autocorrelation C(tau) = <int A(t) conj(A(t - tau)) dt>."""
    return _ensemble(windows, windows, "correlate", sample_rate, kind)


def correlate(a_windows, r_windows, sample_rate: float,
              kind: str = "cross") -> CorrelationResult:
    """Ensemble ASE-RASE cross-correlation.

    The windows are convolved, C_X(tau) = <int A(t) R(tau - t) dt>, which pairs
    each ASE sample with its time-reversed RASE partner; for mirror-placed
    windows the peak sits at tau = 0 and C_X = sqrt(eta) C_A e^{i theta}.
    """
    return _ensemble(a_windows, r_windows, "convolve", sample_rate, kind)


def subtract_vacuum_autocorr(auto: CorrelationResult,
                             vacuum_auto: CorrelationResult) -> CorrelationResult:
    """Remove the filter-broadened vacuum peak from an autocorrelation.

    Jointly fits a Gaussian (vacuum peak) plus a Voigt profile (signal) to
    |auto| and returns the data minus the fitted Gaussian.
    """
    _require(auto.lags.shape == vacuum_auto.lags.shape
             and np.allclose(auto.lags, vacuum_auto.lags),
             "correlations must share the lag grid")
    lags = auto.lags
    mags = np.abs(auto.values)

    # the vacuum autocorrelation pins the width of the narrow peak; fit it
    # alone first so the joint fit cannot trade it against the signal shape
    vac_mags = np.abs(vacuum_auto.values)
    vac_amp = float(np.max(vac_mags))
    above = vac_mags > vac_amp / 2
    w0 = max((lags[above][-1] - lags[above][0]) / 2.355, 1e-3) if above.any() else 0.1
    vfit = least_squares(
        lambda p: p[0] * np.exp(-0.5 * (lags / p[1]) ** 2) - vac_mags,
        np.array([vac_amp, w0]), bounds=([0, w0 * 0.2], [np.inf, w0 * 5]),
        max_nfev=2000,
    )
    vac_width = float(vfit.x[1])

    sig_amp = float(np.max(mags))
    sig_width = max(auto.fwhm / 2.355, vac_width * 2)

    def model(p, x):
        a_g, s_g, a_v, s_v, g_v = p
        gauss = a_g * np.exp(-0.5 * (x / s_g) ** 2)
        voigt = a_v * voigt_profile(x, abs(s_v), abs(g_v))
        return gauss + voigt

    p0 = np.array([vac_amp, vac_width, sig_amp * sig_width * 2.5, sig_width, sig_width / 2])
    fit = least_squares(lambda p: model(p, lags) - mags, p0,
                        bounds=([0, vac_width * 0.85, 0, vac_width * 1.2, 0],
                                [np.inf, vac_width * 1.2, np.inf, np.inf, np.inf]),
                        max_nfev=4000)
    if not fit.success and np.sqrt(np.mean(fit.fun**2)) > 0.1 * sig_amp:
        raise ValidationError(
            f"vacuum-subtraction fit did not converge (residual rms "
            f"{np.sqrt(np.mean(fit.fun**2)):.3g} vs peak {sig_amp:.3g})"
        )
    a_g, s_g = fit.x[0], fit.x[1]
    gauss = a_g * np.exp(-0.5 * (lags / s_g) ** 2)
    cleaned = mags - gauss
    return CorrelationResult(lags=lags, values=cleaned.astype(complex),
                             kind=auto.kind, fwhm=_fwhm_of(lags, np.abs(cleaned)))


def rase_transform(r_window: np.ndarray, eta: float, T_us: float, theta: float,
                   t_a: float, sample_rate: float) -> np.ndarray:
    """Map a RASE window onto its ASE partner: R'(t) = conj(R(-t))/eta e^{t_a/T} e^{i theta}."""
    _require(0.0 < eta <= 1.0, "eta must be in (0, 1]")
    _require(T_us > 0, "T must be positive")
    return np.conj(r_window[::-1]) / eta * math.exp(t_a / T_us) * np.exp(1j * theta)


def inverse_rase_transform(transformed: np.ndarray, eta: float, T_us: float,
                           theta: float, t_a: float, sample_rate: float) -> np.ndarray:
    """Exact algebraic inverse of :func:`rase_transform`."""
    scaled = transformed * eta * math.exp(-t_a / T_us) * np.exp(-1j * theta)
    return np.conj(scaled[::-1])


# ---------------------------------------------------------------------------
# multiplexing
# ---------------------------------------------------------------------------

def multiplex_analysis(a_mode_windows, r_mode_windows, sample_rate: float,
                       neighbor: bool = True) -> dict:
    """Per-mode correlation amplitudes and the time-bandwidth product.

    ``a_mode_windows[m][shot]`` holds the m-th ASE sub-window of each shot
    (mode 1 nearest the rephasing pulses), ``r_mode_windows`` its mirror
    partners. Each sub-window is integrated to one mode amplitude per shot and
    the correlations are ensemble means of amplitude products. TBP counts
    modes whose cross-correlation amplitude stays at or above 1/e of the first
    mode's; neighbor values pair mode m's ASE with mode (m+1)'s RASE and come
    with shot-scatter standard errors for the zero-consistency check.
    """
    n_modes = len(a_mode_windows)
    _require(n_modes >= 1 and len(r_mode_windows) == n_modes,
             "need matched per-mode window lists")
    _require(len(a_mode_windows[0]) >= 2, "need >= 2 shots for ensemble statistics")
    dt = 1.0 / sample_rate
    a_hat = np.array([[np.sum(w) * dt for w in mode] for mode in a_mode_windows])
    r_hat = np.array([[np.sum(w) * dt for w in mode] for mode in r_mode_windows])
    n_shots = a_hat.shape[1]

    products = a_hat * r_hat  # correlated non-conjugate pairing
    cross = np.abs(products.mean(axis=1))
    cross_sigma = products.std(axis=1) / math.sqrt(n_shots)
    auto_a = np.mean(np.abs(a_hat) ** 2, axis=1)

    neighbor_cross = np.array([])
    neighbor_sigma = np.array([])
    if neighbor and n_modes > 1:
        nb = a_hat[:-1] * r_hat[1:]
        neighbor_cross = np.abs(nb.mean(axis=1))
        neighbor_sigma = np.abs(nb.std(axis=1)) / math.sqrt(n_shots)

    threshold = cross[0] / math.e
    tbp = int(np.sum(cross >= threshold))
    return {
        "n_modes": n_modes,
        "auto_A": auto_a,
        "cross": cross,
        "cross_sigma": cross_sigma,
        "neighbor_cross": neighbor_cross,
        "neighbor_sigma": neighbor_sigma,
        "tbp": tbp,
    }


# ---------------------------------------------------------------------------
# polarization
# ---------------------------------------------------------------------------

def _window_excess_power(traces, kind: str, vacuum_floor: float) -> tuple[float, np.ndarray]:
    per_shot = []
    for tr in traces:
        vals = [np.mean(np.abs(tr.window_samples(w)) ** 2) for w in tr.windows_of(kind)]
        per_shot.append(np.mean(vals) - vacuum_floor)
    arr = np.asarray(per_shot)
    return float(np.mean(arr)), arr


def _pair_product(traces) -> np.ndarray:
    """Per-shot mean non-conjugate product of mirror-paired ASE/RASE samples."""
    out = []
    for tr in traces:
        a = tr.window_samples(tr.windows_of("ASE")[0])
        r = tr.window_samples(tr.windows_of("RASE")[0])
        out.append(np.mean(a * r[::-1]))
    return np.asarray(out)


def polarization_metrics(aligned_traces, orth_traces, n_boot: int = 400,
                         seed: int = 0) -> dict:
    """Suppression, correlated fraction and the polarization mixing bound.

    Inputs are preprocessed (phase-corrected, demodulated, normalized) shots
    with ASE/RASE/reference/vacuum windows. The correlated fraction is the
    normalized squared correlation between the orthogonal ASE and RASE
    signals; the mixing bound is (1 - correlated fraction) times the
    orthogonal RASE power fraction.
    """
    floor_a = 2.0 * vacuum_quadrature_variance(aligned_traces)
    floor_o = 2.0 * vacuum_quadrature_variance(orth_traces)

    p_al_rase, al_rase = _window_excess_power(aligned_traces, "RASE", floor_a)
    p_or_rase, or_rase = _window_excess_power(orth_traces, "RASE", floor_o)
    p_al_ref, al_ref = _window_excess_power(aligned_traces, "reference", floor_a)
    p_or_ref, or_ref = _window_excess_power(orth_traces, "reference", floor_o)
    p_or_ase, or_ase = _window_excess_power(orth_traces, "ASE", floor_o)
    if p_al_rase <= 0 or p_al_ref <= 0:
        raise ValidationError("aligned set has zero window power")

    cross_shots = _pair_product(orth_traces)

    def metrics(idx) -> tuple[float, float, float, float]:
        rase_frac = max(np.mean(or_rase[idx]), 0.0) / np.mean(al_rase[idx])
        supp_rase = 1.0 - rase_frac
        supp_ref = 1.0 - max(np.mean(or_ref[idx]), 0.0) / np.mean(al_ref[idx])
        cx = abs(np.mean(cross_shots[idx]))
        denom = max(np.mean(or_ase[idx]), 1e-30) * max(np.mean(or_rase[idx]), 1e-30)
        corr_frac = min(cx**2 / denom, 1.0)
        mixing = (1.0 - corr_frac) * rase_frac
        return supp_rase, supp_ref, corr_frac, mixing

    all_idx = np.arange(len(or_rase))
    supp_rase, supp_ref, corr_frac, mixing = metrics(all_idx)

    rng = np.random.default_rng(seed)
    boot = np.array([
        metrics(rng.integers(0, len(all_idx), len(all_idx)))
        for _ in range(n_boot)
    ])
    sigmas = boot.std(axis=0)

    return {
        "suppression_rase": supp_rase,
        "suppression_rase_sigma": float(sigmas[0]),
        "suppression_ref": supp_ref,
        "suppression_ref_sigma": float(sigmas[1]),
        "orth_correlated_fraction": corr_frac,
        "orth_correlated_fraction_sigma": float(sigmas[2]),
        "mixing_bound": mixing,
        "mixing_bound_sigma": float(sigmas[3]),
    }


def beat_length(wavelength_nm: float, delta_n: float) -> float:
    """Polarization beat length b_L = lambda / delta_n, in mm."""
    if delta_n <= 0:
        raise ValidationError("delta_n must be positive")
    return wavelength_nm * 1e-6 / delta_n


# ---------------------------------------------------------------------------
# inseparability
# ---------------------------------------------------------------------------

def insep_model(b, eta: float, ell: float, moments: dict) -> np.ndarray:
    """EPR-sum variance model for given ideal second moments.

    lambda(b) = <(Delta u)^2> + <(Delta v)^2> with
    <(Delta u)^2> = b (l <I_A^2> + 1 - l)
                  + (1-b) (l (eta <I_R^2> + 1 - eta) + 1 - l)
                  + 2 sqrt(b (1-b)) l sqrt(eta) <I_A I_R>,
    and the Q analogue for v.
    """
    b = np.asarray(b, dtype=float)
    _require(np.all((b >= 0) & (b <= 1)), "b must lie in [0, 1]")
    root = np.sqrt(b * (1.0 - b))

    def one(v_a, v_r, c):
        return (b * (ell * v_a + 1.0 - ell)
                + (1.0 - b) * (ell * (eta * v_r + 1.0 - eta) + 1.0 - ell)
                + 2.0 * root * ell * math.sqrt(eta) * c)

    u = one(moments["I_A2"], moments["I_R2"], moments["I_AI_R"])
    v = one(moments["Q_A2"], moments["Q_R2"], moments["Q_AQ_R"])
    return u + v


def lambda_curve_from_state(state: GaussianState, b_grid: np.ndarray) -> np.ndarray:
    """Analytic lambda(b) for a detected (A, R) Gaussian state."""
    return insep_model(b_grid, 1.0, 1.0, {
        "I_A2": state.cov[0, 0], "Q_A2": state.cov[1, 1],
        "I_R2": state.cov[2, 2], "Q_R2": state.cov[3, 3],
        "I_AI_R": state.cov[0, 2], "Q_AQ_R": state.cov[1, 3],
    })


def _moments_from_sums(n: float, s: np.ndarray, m: np.ndarray) -> dict:
    mean = s / n
    cov = m / n - np.outer(mean, mean)
    return {
        "I_A2": cov[0, 0], "Q_A2": cov[1, 1],
        "I_R2": cov[2, 2], "Q_R2": cov[3, 3],
        "I_AI_R": cov[0, 2], "Q_AQ_R": cov[1, 3],
    }


def inseparability(shot_tuples, b_step: float = 0.001, n_boot: int = 1000,
                   seed: int = 0, vacuum_tuples: np.ndarray | None = None,
                   vacuum_tolerance: float = 0.05) -> InsepResult:
    """lambda(b) over the EPR weight grid, with a bootstrap error on the minimum.

    ``shot_tuples`` is a sequence of per-shot (n_i, 4) arrays of
    vacuum-normalized (I_A, Q_A, I_R, Q_R) tuples. The bootstrap resamples
    whole shots, so intra-shot sample correlations are handled honestly.
    """
    shot_tuples = [np.asarray(s, dtype=float) for s in shot_tuples]
    _require(len(shot_tuples) >= 100, "need >= 100 shots")
    if vacuum_tuples is not None:
        vvar = float(np.var(np.asarray(vacuum_tuples)))
        if abs(vvar - 1.0) > vacuum_tolerance:
            raise ValidationError(
                f"vacuum quadrature variance {vvar:.3f} differs from 1 by more "
                f"than {vacuum_tolerance:.0%}; recalibrate the normalization"
            )

    counts = np.array([s.shape[0] for s in shot_tuples], dtype=float)
    sums = np.stack([s.sum(axis=0) for s in shot_tuples])
    outer = np.stack([s.T @ s for s in shot_tuples])

    b_grid = np.arange(0.0, 1.0 + b_step / 2, b_step)

    def lam_curve(idx) -> np.ndarray:
        n = counts[idx].sum()
        moments = _moments_from_sums(n, sums[idx].sum(axis=0), outer[idx].sum(axis=0))
        return insep_model(b_grid, 1.0, 1.0, moments)

    all_idx = np.arange(len(shot_tuples))
    lam = lam_curve(all_idx)
    i_min = int(np.argmin(lam))
    lam_min = float(lam[i_min])
    b_min = float(b_grid[i_min])

    rng = np.random.default_rng(seed)
    mins = np.empty(n_boot)
    for k in range(n_boot):
        idx = rng.integers(0, len(shot_tuples), len(shot_tuples))
        mins[k] = np.min(lam_curve(idx))
    sigma = float(np.std(mins))

    return InsepResult(
        b_grid=b_grid,
        lam=lam,
        lambda_min=lam_min,
        b_min=b_min,
        sigma_min=sigma,
        certainty_sigma=(2.0 - lam_min) / sigma if sigma > 0 else math.inf,
    )


def squeezing_db(lambda_min: float) -> float:
    """Two-mode squeezing implied by an inseparability minimum: -10 log10(l/2)."""
    _require(lambda_min > 0, "lambda_min must be positive")
    return -10.0 * math.log10(lambda_min / 2.0)
