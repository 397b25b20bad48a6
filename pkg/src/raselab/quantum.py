"""Gaussian continuous-variable engine and synthetic heterodyne shot records.

Quadrature convention: vacuum variance 1 per quadrature, basis ordering
(I_1, Q_1, I_2, Q_2, ...). The detected (ASE, RASE) pair is built from a
two-mode squeezer of gain G = e^{alpha L}, retrieval of the atomic mode into
the time-reversed detection frame with efficiency eta, and beamsplitter losses
that mix in unit vacuum.

Shot records are synthesized so that the protocol physics survives the full
analysis chain: the ASE interval carries a stationary in-band entangled
process, the RASE interval its time-reversed conjugate partner, references and
vacuum elsewhere, with per-shot interferometer phase and trigger jitter on
top. The in-band signal spectrum is flat over the detection band so the
per-sample statistics inside the analysis low-pass equal the per-mode Gaussian
statistics exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    DetectionConfig,
    LossBudget,
    TimeTrace,
    ValidationError,
    WindowSpec,
    _require,
    shot_rng,
)
from .gain import gain_db_to_alpha_l
from .sequence import PulseSequence

# |sinc(pi W t)| falls to 1/2 at pi W t = 1.89549; a flat two-sided spectrum of
# width W therefore has an autocorrelation FWHM of 2 * 1.89549 / (pi W).
_SINC_HALF = 1.8954942670339809


def bandwidth_for_corr_fwhm(fwhm_us: float) -> float:
    """Two-sided flat signal bandwidth (MHz) giving this correlation FWHM (us)."""
    _require(fwhm_us > 0, "fwhm must be positive")
    return 2.0 * _SINC_HALF / (math.pi * fwhm_us)


# ---------------------------------------------------------------------------
# Gaussian states and channels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianState:
    n_modes: int
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        d = 2 * self.n_modes
        _require(mean.shape == (d,), f"mean must have length {d}")
        _require(cov.shape == (d, d), f"cov must be {d}x{d}")
        _require(np.allclose(cov, cov.T, atol=1e-10), "cov must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    def quadrature_indices(self, mode: int) -> tuple[int, int]:
        return 2 * mode, 2 * mode + 1


def vacuum_state(n_modes: int) -> GaussianState:
    d = 2 * n_modes
    return GaussianState(n_modes=n_modes, mean=np.zeros(d), cov=np.eye(d))


def symplectic_form(n_modes: int) -> np.ndarray:
    omega = np.zeros((2 * n_modes, 2 * n_modes))
    for m in range(n_modes):
        omega[2 * m, 2 * m + 1] = 1.0
        omega[2 * m + 1, 2 * m] = -1.0
    return omega


def physicality_defect(state: GaussianState) -> float:
    """Smallest eigenvalue of cov + i Omega (>= 0 for a physical state)."""
    omega = symplectic_form(state.n_modes)
    eigvals = np.linalg.eigvalsh(state.cov.astype(complex) + 1j * omega)
    return float(np.min(eigvals.real))


@dataclass(frozen=True)
class ChannelOp:
    """A Gaussian channel: two_mode_squeeze(G), loss(l), phase(theta),
    or conjugate_retrieve(eta).

    ``conjugate_retrieve`` maps the stored mode into the time-reversed
    detection frame (quadratures (I, Q) -> (sqrt(eta) I, -sqrt(eta) Q) plus
    vacuum). It is a relabeling into the frame the analysis records, not a
    completely positive map on the original mode, so the cov + i Omega check
    applies to the other three ops only.
    """

    kind: str
    modes: tuple[int, ...]
    param: float

    def __post_init__(self) -> None:
        if self.kind == "two_mode_squeeze":
            _require(len(self.modes) == 2, "two_mode_squeeze acts on two modes")
            _require(self.param >= 1.0, "squeeze gain G must be >= 1")
        elif self.kind in ("loss", "conjugate_retrieve"):
            _require(len(self.modes) == 1, f"{self.kind} acts on one mode")
            _require(0.0 <= self.param <= 1.0, f"{self.kind} parameter must be in [0, 1]")
        elif self.kind == "phase":
            _require(len(self.modes) == 1, "phase acts on one mode")
        else:
            raise ValidationError(f"unknown channel kind {self.kind!r}")


def two_mode_squeeze(G: float, modes: tuple[int, int] = (0, 1)) -> ChannelOp:
    return ChannelOp("two_mode_squeeze", modes, G)


def loss(transmission: float, mode: int) -> ChannelOp:
    return ChannelOp("loss", (mode,), transmission)


def phase(theta: float, mode: int) -> ChannelOp:
    return ChannelOp("phase", (mode,), theta)


def conjugate_retrieve(eta: float, mode: int) -> ChannelOp:
    return ChannelOp("conjugate_retrieve", (mode,), eta)


def apply_channel(state: GaussianState, op: ChannelOp) -> GaussianState:
    d = 2 * state.n_modes
    for m in op.modes:
        _require(0 <= m < state.n_modes, f"mode {m} not present in state")
    T = np.eye(d)
    N = np.zeros((d, d))
    if op.kind == "two_mode_squeeze":
        g = math.sqrt(op.param)
        h = math.sqrt(op.param - 1.0)
        (i1, q1), (i2, q2) = (
            state.quadrature_indices(op.modes[0]),
            state.quadrature_indices(op.modes[1]),
        )
        # squeezing phase chosen so I quadratures anti-correlate; see rase_state
        T[i1, i1] = g
        T[i1, i2] = -h
        T[q1, q1] = g
        T[q1, q2] = h
        T[i2, i2] = g
        T[i2, i1] = -h
        T[q2, q2] = g
        T[q2, q1] = h
    elif op.kind == "loss":
        i, q = state.quadrature_indices(op.modes[0])
        root = math.sqrt(op.param)
        T[i, i] = root
        T[q, q] = root
        N[i, i] = 1.0 - op.param
        N[q, q] = 1.0 - op.param
    elif op.kind == "phase":
        i, q = state.quadrature_indices(op.modes[0])
        ct, st = math.cos(op.param), math.sin(op.param)
        T[i, i] = ct
        T[i, q] = -st
        T[q, i] = st
        T[q, q] = ct
    elif op.kind == "conjugate_retrieve":
        i, q = state.quadrature_indices(op.modes[0])
        root = math.sqrt(op.param)
        T[i, i] = root
        T[q, q] = -root
        N[i, i] = 1.0 - op.param
        N[q, q] = 1.0 - op.param
    return GaussianState(
        n_modes=state.n_modes,
        mean=T @ state.mean,
        cov=T @ state.cov @ T.T + N,
    )


def rase_state(gain_db: float, eta_recall: float,
               losses: LossBudget | float) -> GaussianState:
    """Detected two-mode (A = ASE, R = RASE) Gaussian state.

    Chain: vacuum -> two-mode squeeze with G = e^{alpha L} -> retrieval of the
    atomic mode into the detection frame with efficiency eta -> equal loss on
    both detected modes.
    """
    _require(0.0 <= eta_recall <= 1.0, "eta_recall must be in [0, 1]")
    ell = losses.transmission if isinstance(losses, LossBudget) else float(losses)
    _require(0.0 <= ell <= 1.0, "loss transmission must be in [0, 1]")
    G = math.exp(gain_db_to_alpha_l(gain_db))
    state = vacuum_state(2)
    state = apply_channel(state, two_mode_squeeze(G, (0, 1)))
    state = apply_channel(state, conjugate_retrieve(eta_recall, 1))
    state = apply_channel(state, loss(ell, 0))
    state = apply_channel(state, loss(ell, 1))
    return state


def detected_moments(state: GaussianState) -> dict:
    """Second moments of a detected (A, R) state in analysis-frame labels."""
    c = state.cov
    return {
        "I_A2": c[0, 0], "Q_A2": c[1, 1],
        "I_R2": c[2, 2], "Q_R2": c[3, 3],
        "I_AI_R": c[0, 2], "Q_AQ_R": c[1, 3],
    }


def sample_shots(state: GaussianState, n: int, seed: int) -> np.ndarray:
    """Draw n quadrature tuples from the state; deterministic given seed."""
    _require(n >= 1, "n must be >= 1")
    try:
        chol = np.linalg.cholesky(
            state.cov + 1e-12 * np.eye(state.cov.shape[0])
        )
    except np.linalg.LinAlgError as exc:
        raise ValidationError("covariance is not positive definite") from exc
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, state.cov.shape[0]))
    return state.mean + z @ chol.T


# ---------------------------------------------------------------------------
# protocol timeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Timeline:
    """Absolute schedule of one shot: pulse events, emission intervals, windows."""

    sample_rate: float
    duration: float
    pulses: tuple[tuple[str, float, float], ...]  # (label, start, duration)
    ase_interval: tuple[float, float]
    rase_interval: tuple[float, float]
    ref_pulses: tuple[tuple[float, float, float], ...]  # (freq MHz, start, duration)
    windows: tuple[WindowSpec, ...]

    def interval_slice(self, interval: tuple[float, float]) -> slice:
        i0 = int(round(interval[0] * self.sample_rate))
        i1 = int(round(interval[1] * self.sample_rate))
        return slice(i0, i1)


def build_timeline(seq: PulseSequence, det: DetectionConfig,
                   window_length: float = 13.2, window_offset: float = 10.0,
                   n_mode_windows: int = 0, mode_length: float = 0.5,
                   mode_pitch: float = 2.0,
                   sample_rate: float = 100.0,
                   lead: float = 4.0, ref_duration: float = 4.0,
                   ref_gap: float = 1.0, vacuum_length: float = 15.0) -> Timeline:
    """Lay out one shot of the RASE protocol on an absolute time axis.

    The ASE emission interval is the pi_i -> pi_1 gap of the sequence (length
    t_a); the RASE interval mirrors it after pi_2. Either a single
    analysis-window pair is placed ``window_offset`` inside the intervals, or
    ``n_mode_windows`` multiplexed sub-windows at ``mode_pitch`` spacing.
    """
    pulse_dur = seq.event("pi_1").duration
    # vacuum reference leads the sequence, far from the strong reference tones
    vac_start = 1.0
    pi_i_start = vac_start + vacuum_length + lead
    ase_start = pi_i_start + pulse_dur
    ase_end = ase_start + seq.t_a
    pi_1_start = ase_end
    pi_2_start = pi_1_start + pulse_dur + seq.t_b
    rase_start = pi_2_start + pulse_dur
    rase_end = rase_start + seq.t_a

    pulses = (
        ("pi_i", pi_i_start, pulse_dur),
        ("pi_1", pi_1_start, pulse_dur),
        ("pi_2", pi_2_start, pulse_dur),
    )

    windows: list[WindowSpec] = []
    if n_mode_windows > 0:
        needed = window_offset + n_mode_windows * mode_pitch
        _require(needed <= seq.t_a,
                 f"{n_mode_windows} mode windows at pitch {mode_pitch} need a "
                 f"{needed} us gap, sequence has t_a = {seq.t_a}")
        for m in range(1, n_mode_windows + 1):
            a_start = ase_end - window_offset - m * mode_pitch
            r_start = rase_start + window_offset + m * mode_pitch - mode_length
            windows.append(WindowSpec("ASE", a_start, mode_length))
            windows.append(WindowSpec("RASE", r_start, mode_length))
    else:
        _require(window_offset + window_length <= seq.t_a,
                 f"window {window_length} us at offset {window_offset} does not "
                 f"fit in the {seq.t_a} us emission interval")
        windows.append(WindowSpec("ASE", ase_end - window_offset - window_length,
                                  window_length))
        windows.append(WindowSpec("RASE", rase_start + window_offset, window_length))

    ref_start = rase_end + 2.0
    refs = []
    for k, f in enumerate(det.ref_freqs):
        start = ref_start + k * (ref_duration + ref_gap)
        refs.append((float(f), start, ref_duration))
        windows.append(WindowSpec("reference", start, ref_duration, ref_freq=float(f)))
    refs_end = ref_start + len(refs) * (ref_duration + ref_gap)

    windows.append(WindowSpec("vacuum", vac_start, vacuum_length))
    duration = refs_end + 2.0

    for w in windows:
        for label, start, dur in pulses:
            if w.start < start + dur and start < w.end:
                raise ValidationError(
                    f"{w.kind} window [{w.start:.2f}, {w.end:.2f}] collides with "
                    f"pulse {label} at {start:.2f}"
                )

    return Timeline(
        sample_rate=sample_rate,
        duration=duration,
        pulses=pulses,
        ase_interval=(ase_start, ase_end),
        rase_interval=(rase_start, rase_end),
        ref_pulses=tuple(refs),
        windows=tuple(windows),
    )


# ---------------------------------------------------------------------------
# shot synthesis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthesisSpec:
    """Physical parameters of one synthesized shot set."""

    gain_db: float = 7.0
    eta_recall: float = 0.17
    transmission: float = 0.304  # total detected power transmission
    corr_fwhm_us: float = 1.95  # target ASE autocorrelation FWHM
    protocol_phase: float = math.pi  # ASE-RASE phase; pi is the canonical frame
    write_time_T: float | None = None  # us; None disables write-time decay
    storage_t_b: float = 0.1
    ref_amplitude: float = 12.0
    noise_free: bool = False  # verification mode: no vacuum beyond the pair
    # polarization knobs: None synthesizes the aligned set
    orth_ase_power: float | None = None
    orth_rase_power: float | None = None
    orth_corr_fraction: float | None = None
    orth_ref_power: float | None = None

    def detected_state(self) -> GaussianState:
        return rase_state(self.gain_db, self.eta_recall, self.transmission)


def _flat_band_mask(n: int, sample_rate: float, bandwidth: float) -> np.ndarray:
    freqs = np.fft.fftfreq(n, d=1.0 / sample_rate)
    return (np.abs(freqs) <= bandwidth / 2.0).astype(float)


def _band_filter(x: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return np.fft.ifft(np.fft.fft(x, norm="ortho") * mask, norm="ortho")


def _circular_vacuum(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def fractional_shift(samples: np.ndarray, shift_us: float,
                     sample_rate: float) -> np.ndarray:
    """Circular fractional time shift via an FFT phase ramp (exactly invertible)."""
    n = samples.size
    freqs = np.fft.fftfreq(n, d=1.0 / sample_rate)
    return np.fft.ifft(np.fft.fft(samples) * np.exp(-2j * np.pi * freqs * shift_us))


def _ref_envelope(n: int, sample_rate: float, ramp_us: float = 0.5) -> np.ndarray:
    """Cosine-ramped tone envelope; soft edges keep the spectrum compact."""
    n_ramp = min(int(round(ramp_us * sample_rate)), n // 2)
    env = np.ones(n)
    if n_ramp > 0:
        ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(n_ramp) / n_ramp))
        env[:n_ramp] = ramp
        env[-n_ramp:] = ramp[::-1]
    return env


def synthesize_shot(timeline: Timeline, spec: SynthesisSpec, det: DetectionConfig,
                    base_seed: int, shot_index: int) -> TimeTrace:
    """One full heterodyne shot record for the given timeline and parameters."""
    rng = shot_rng(base_seed, shot_index)
    fs = timeline.sample_rate
    n_total = int(round(timeline.duration * fs))
    trace = (np.zeros(n_total, dtype=complex) if spec.noise_free
             else _circular_vacuum(rng, n_total))

    ase_sl = timeline.interval_slice(timeline.ase_interval)
    rase_sl = timeline.interval_slice(timeline.rase_interval)
    n = ase_sl.stop - ase_sl.start
    _require(rase_sl.stop - rase_sl.start == n, "emission intervals must match")

    state = spec.detected_state()
    c = state.cov
    v_a, v_r, cross = c[0, 0], c[2, 2], c[0, 2]

    # jointly circular pair with conjugate-product cross 2*cross per sample
    z1 = _circular_vacuum(rng, n)
    z2 = _circular_vacuum(rng, n)
    a_w = math.sqrt(v_a) * z1
    resid = max(v_r - cross**2 / v_a, 0.0)
    rho_w = (cross / math.sqrt(v_a)) * z1 + math.sqrt(resid) * z2

    bandwidth = bandwidth_for_corr_fwhm(spec.corr_fwhm_us)
    mask = _flat_band_mask(n, fs, bandwidth)
    out_mask = 1.0 - mask
    a_sig = _band_filter(a_w, mask)
    rho_sig = _band_filter(rho_w, mask)

    a_total = a_sig if spec.noise_free else (
        a_sig + _band_filter(_circular_vacuum(rng, n), out_mask))

    if spec.write_time_T is not None:
        # optical dephasing of the partner recalled at offset tau after pi_2 is
        # 2 tau + t_b; decays the retrieved amplitude only, in recall order
        # (applied after the mirror reversal below)
        tau = (np.arange(n) + 0.5) / fs
        d_amp = np.exp(-(2.0 * tau + spec.storage_t_b) / spec.write_time_T)[::-1]
    else:
        d_amp = np.ones(n)

    if spec.orth_rase_power is not None:
        # orthogonal-polarization set: the RASE mode is suppressed to
        # ``orth_rase_power`` of the aligned one, and only ``orth_corr_fraction``
        # of its power is rephased from the orthogonal ASE mode
        corr_frac = spec.orth_corr_fraction if spec.orth_corr_fraction is not None else 1.0
        amp_corr = math.sqrt(spec.orth_rase_power * corr_frac)
        amp_uncorr = math.sqrt(spec.orth_rase_power * (1.0 - corr_frac))
        rho_indep = ((cross / math.sqrt(v_a)) * _circular_vacuum(rng, n)
                     + math.sqrt(resid) * _circular_vacuum(rng, n))
        rho_scaled = amp_corr * rho_sig + amp_uncorr * _band_filter(rho_indep, mask)
        makeup = max(1.0 - spec.orth_rase_power, 0.0)
        rho_total = (rho_scaled * d_amp
                     + math.sqrt(makeup) * _band_filter(_circular_vacuum(rng, n), mask)
                     + _band_filter(_circular_vacuum(rng, n), out_mask))
        if spec.orth_ase_power is not None:
            a_total = (math.sqrt(spec.orth_ase_power) * a_sig
                       + math.sqrt(max(1.0 - spec.orth_ase_power, 0.0))
                       * _band_filter(_circular_vacuum(rng, n), mask)
                       + _band_filter(_circular_vacuum(rng, n), out_mask))
    elif spec.noise_free:
        rho_total = rho_sig * d_amp
    else:
        makeup_amp = np.sqrt(np.clip(1.0 - d_amp**2, 0.0, None))
        rho_total = (rho_sig * d_amp
                     + makeup_amp * _band_filter(_circular_vacuum(rng, n), mask)
                     + _band_filter(_circular_vacuum(rng, n), out_mask))

    # physical RASE envelope: time-reversed conjugate of the analysis-frame
    # partner, with any protocol phase away from the canonical pi applied
    r_content = np.exp(1j * (spec.protocol_phase - math.pi)) * np.conj(rho_total[::-1])

    t = np.arange(n_total) / fs
    carrier = np.exp(2j * np.pi * det.het_freq * t)
    trace[ase_sl] = a_total * carrier[ase_sl]
    trace[rase_sl] = r_content * carrier[rase_sl]

    ref_amp = spec.ref_amplitude
    if spec.orth_ref_power is not None:
        ref_amp = ref_amp * math.sqrt(spec.orth_ref_power)
    for f_ref, start, dur in timeline.ref_pulses:
        sl = slice(int(round(start * fs)), int(round((start + dur) * fs)))
        env = _ref_envelope(sl.stop - sl.start, fs)
        trace[sl] += ref_amp * env * np.exp(2j * np.pi * f_ref * (t[sl] - start))

    # interferometer phase drift and trigger jitter, undone by phase_correct
    phi0 = rng.normal(0.0, det.interferometer_phase_drift_std)
    jitter = rng.uniform(-det.trigger_jitter_max, det.trigger_jitter_max)
    trace = np.exp(1j * phi0) * trace
    if jitter != 0.0:
        trace = fractional_shift(trace, jitter, fs)

    return TimeTrace(
        sample_rate=fs,
        samples=trace,
        het_freq=det.het_freq,
        windows=timeline.windows,
        seed=shot_index,
    )


def synthesize_trace(seq: PulseSequence, shot_quadratures: np.ndarray,
                     det: DetectionConfig, mode_envelope: SynthesisSpec,
                     seed: int) -> TimeTrace:
    """Spec-level surface: one shot from pre-drawn quadrature tuples.

    ``shot_quadratures`` (n, 4) are analysis-frame (I_A, Q_A, I_R, Q_R) white
    tuples for the emission-interval samples, e.g. from :func:`sample_shots`
    on the detected state; ``mode_envelope`` carries bandwidth/decay/phase.
    """
    quads = np.asarray(shot_quadratures, dtype=float)
    _require(quads.ndim == 2 and quads.shape[1] == 4,
             "shot_quadratures must be (n, 4)")
    timeline = build_timeline(seq, det)
    fs = timeline.sample_rate
    ase_sl = timeline.interval_slice(timeline.ase_interval)
    n = ase_sl.stop - ase_sl.start
    _require(quads.shape[0] >= n,
             f"need at least {n} quadrature tuples for a {seq.t_a} us interval")
    return _synthesize_from_tuples(timeline, quads[:n], det, mode_envelope, seed)


def _synthesize_from_tuples(timeline: Timeline, quads: np.ndarray,
                            det: DetectionConfig, spec: SynthesisSpec,
                            seed: int) -> TimeTrace:
    rng = np.random.default_rng(seed)
    fs = timeline.sample_rate
    n_total = int(round(timeline.duration * fs))
    trace = (np.zeros(n_total, dtype=complex) if spec.noise_free
             else _circular_vacuum(rng, n_total))
    ase_sl = timeline.interval_slice(timeline.ase_interval)
    rase_sl = timeline.interval_slice(timeline.rase_interval)
    n = quads.shape[0]

    a_w = quads[:, 0] + 1j * quads[:, 1]
    rho_w = quads[:, 2] + 1j * quads[:, 3]
    bandwidth = bandwidth_for_corr_fwhm(spec.corr_fwhm_us)
    mask = _flat_band_mask(n, fs, bandwidth)
    out_mask = 1.0 - mask
    a_total = _band_filter(a_w, mask)
    rho_total = _band_filter(rho_w, mask)
    if not spec.noise_free:
        a_total = a_total + _band_filter(_circular_vacuum(rng, n), out_mask)
        rho_total = rho_total + _band_filter(_circular_vacuum(rng, n), out_mask)
    if spec.write_time_T is not None:
        tau = (np.arange(n) + 0.5) / fs
        d_amp = np.exp(-(2.0 * tau + spec.storage_t_b) / spec.write_time_T)[::-1]
        makeup = np.sqrt(np.clip(1.0 - d_amp**2, 0.0, None))
        rho_total = rho_total * d_amp
        if not spec.noise_free:
            rho_total = (rho_total
                         + makeup * _band_filter(_circular_vacuum(rng, n), mask))
    r_content = np.exp(1j * (spec.protocol_phase - math.pi)) * np.conj(rho_total[::-1])

    t = np.arange(n_total) / fs
    carrier = np.exp(2j * np.pi * det.het_freq * t)
    trace[ase_sl] = a_total * carrier[ase_sl]
    trace[rase_sl] = r_content * carrier[rase_sl]
    for f_ref, start, dur in timeline.ref_pulses:
        sl = slice(int(round(start * fs)), int(round((start + dur) * fs)))
        env = _ref_envelope(sl.stop - sl.start, fs)
        trace[sl] += spec.ref_amplitude * env * np.exp(
            2j * np.pi * f_ref * (t[sl] - start))

    phi0 = rng.normal(0.0, det.interferometer_phase_drift_std)
    jitter = rng.uniform(-det.trigger_jitter_max, det.trigger_jitter_max)
    trace = np.exp(1j * phi0) * trace
    if jitter != 0.0:
        trace = fractional_shift(trace, jitter, fs)
    return TimeTrace(sample_rate=fs, samples=trace, het_freq=det.het_freq,
                     windows=timeline.windows, seed=seed)


def synthesize_shot_set(timeline: Timeline, spec: SynthesisSpec,
                        det: DetectionConfig, n_shots: int,
                        base_seed: int):
    """Generator over deterministic shots; shot k depends only on (base_seed, k)."""
    for k in range(n_shots):
        yield synthesize_shot(timeline, spec, det, base_seed, k)


def _embed_mode(samples: np.ndarray, sl: slice, amplitude: complex,
                envelope: np.ndarray) -> None:
    """Write one temporal mode into a window: amplitude on the unit-norm
    envelope, vacuum on the orthogonal complement (the window already holds
    fresh vacuum)."""
    v = samples[sl]
    samples[sl] = v + (amplitude - np.vdot(envelope, v)) * envelope


def synthesize_multiplex_shot(timeline: Timeline, spec: SynthesisSpec,
                              det: DetectionConfig, base_seed: int,
                              shot_index: int) -> TimeTrace:
    """One shot of the temporally multiplexed run.

    Each ASE/RASE sub-window pair carries its own independent entangled mode
    (a raised-cosine temporal envelope), so distinct modes are strictly
    uncorrelated: the neighbor cross-correlation is structurally zero, which
    is the no-mode-mixing physics the multiplexing run demonstrates. The
    recall efficiency of mode m is decayed by the write-time envelope at its
    optical storage delay.
    """
    rng = shot_rng(base_seed, shot_index)
    fs = timeline.sample_rate
    n_total = int(round(timeline.duration * fs))
    trace = _circular_vacuum(rng, n_total)

    ase_windows = [w for w in timeline.windows if w.kind == "ASE"]
    rase_windows = [w for w in timeline.windows if w.kind == "RASE"]
    _require(len(ase_windows) == len(rase_windows) and ase_windows,
             "timeline must define matched mode windows")

    pi_1_start = timeline.ase_interval[1]
    rase_start = timeline.rase_interval[0]

    ell = spec.transmission
    G = math.exp(gain_db_to_alpha_l(spec.gain_db))
    v_a = ell * (2.0 * G - 1.0) + (1.0 - ell)

    for a_win, r_win in zip(ase_windows, rase_windows):
        # optical storage delay of this mode: time before pi_1 plus time after
        # pi_2 at recall (equal by time symmetry) plus the spin storage
        tau = pi_1_start - (a_win.start + a_win.length / 2.0)
        delay = 2.0 * tau + spec.storage_t_b
        if spec.write_time_T is not None:
            d_amp = math.exp(-delay / spec.write_time_T)
        else:
            d_amp = 1.0
        eta_m = spec.eta_recall * d_amp**2
        v_r = ell * (eta_m * (2.0 * G - 1.0) + (1.0 - eta_m)) + (1.0 - ell)
        cross = -ell * math.sqrt(eta_m) * 2.0 * math.sqrt(G * (G - 1.0))

        z1 = complex(*rng.standard_normal(2))
        z2 = complex(*rng.standard_normal(2))
        a_hat = math.sqrt(v_a) * z1
        resid = max(v_r - cross**2 / v_a, 0.0)
        rho_hat = (cross / math.sqrt(v_a)) * z1 + math.sqrt(resid) * z2

        n_a = int(round(a_win.length * fs))
        env = np.sin(np.pi * (np.arange(n_a) + 0.5) / n_a) ** 2
        env = env.astype(complex) / np.linalg.norm(env)
        a_sl = slice(int(round(a_win.start * fs)), int(round(a_win.start * fs)) + n_a)
        r_sl = slice(int(round(r_win.start * fs)), int(round(r_win.start * fs)) + n_a)
        _embed_mode(trace, a_sl, a_hat, env)
        _embed_mode(trace, r_sl,
                    np.exp(1j * (spec.protocol_phase - math.pi)) * np.conj(rho_hat),
                    env)

    t = np.arange(n_total) / fs
    carrier = np.exp(2j * np.pi * det.het_freq * t)
    for w in ase_windows + rase_windows:
        sl = slice(int(round(w.start * fs)), int(round(w.end * fs)))
        trace[sl] = trace[sl] * carrier[sl]

    for f_ref, start, dur in timeline.ref_pulses:
        sl = slice(int(round(start * fs)), int(round((start + dur) * fs)))
        env = _ref_envelope(sl.stop - sl.start, fs)
        trace[sl] += spec.ref_amplitude * env * np.exp(
            2j * np.pi * f_ref * (t[sl] - start))

    phi0 = rng.normal(0.0, det.interferometer_phase_drift_std)
    jitter = rng.uniform(-det.trigger_jitter_max, det.trigger_jitter_max)
    trace = np.exp(1j * phi0) * trace
    if jitter != 0.0:
        trace = fractional_shift(trace, jitter, fs)

    return TimeTrace(sample_rate=fs, samples=trace, het_freq=det.het_freq,
                     windows=timeline.windows, seed=shot_index)
