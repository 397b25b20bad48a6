"""End-to-end runs: synthesize shot streams, apply the measurement chain, and
accumulate the statistics behind each figure-level result.

Shots are processed one at a time (generated, phase-corrected, demodulated,
windowed, then discarded) so multi-thousand-shot runs stay within desk-scale
memory. Each shot is a pure function of (base_seed, shot index); the optional
thread pool changes wall time only.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import analysis
from .core import DetectionConfig, TimeTrace
from .quantum import (SynthesisSpec, build_timeline, synthesize_multiplex_shot,
                      synthesize_shot)
from .sequence import build_rase


def thread_count(requested: int | None = None) -> int:
    if requested is not None and requested >= 1:
        return requested
    env = os.environ.get("RASELAB_THREADS")
    if env:
        try:
            return max(int(env), 1)
        except ValueError:
            pass
    return 1


def preprocess_shot(trace: TimeTrace, cutoff_khz: float) -> TimeTrace:
    """Phase-correct against the reference tones, then beat to baseband."""
    corrected = analysis.phase_correct(trace)["trace"]
    return analysis.demodulate(corrected, corrected.het_freq, cutoff_khz)


def _map_shots(fn, n_shots: int, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(n_shots)))
    return [fn(k) for k in range(n_shots)]


@dataclass(frozen=True)
class InsepRun:
    result: analysis.InsepResult
    vacuum_variance: float
    model_lambda: np.ndarray
    spec: SynthesisSpec


def run_insep_pipeline(spec: SynthesisSpec, det: DetectionConfig | None = None,
                       n_shots: int = 5000, base_seed: int = 7,
                       t_a: float = 40.0, window_length: float = 13.2,
                       cutoff_khz: float = 280.0, stride: int = 16,
                       b_step: float = 0.001, n_boot: int = 1000,
                       threads: int | None = None) -> InsepRun:
    """Fig-10 style run: synthesize shots, extract EPR tuples, compute lambda(b).

    Window quadratures are pooled per shot at ``stride`` sample spacing after
    the low-pass, normalized so the pooled vacuum-window variance is exactly 1.
    """
    det = det or DetectionConfig(lpf_cutoff=cutoff_khz)
    seq = build_rase(t_a=t_a, t_b=spec.storage_t_b)
    timeline = build_timeline(seq, det, window_length=window_length)
    threads = thread_count(threads)

    def one(k: int):
        raw = synthesize_shot(timeline, spec, det, base_seed, k)
        tr = preprocess_shot(raw, cutoff_khz)
        a = tr.window_samples(tr.windows_of("ASE")[0])
        r = tr.window_samples(tr.windows_of("RASE")[0])
        tuples = analysis.transform_frame_pairs(a, r)[::stride]
        vac = tr.window_samples(tr.windows_of("vacuum")[0])[::stride]
        return tuples, vac

    results = _map_shots(one, n_shots, threads)
    vac_all = np.concatenate([v for _, v in results])
    vac_var = 0.5 * float(np.var(vac_all.real) + np.var(vac_all.imag))
    scale = 1.0 / math.sqrt(vac_var)
    shot_tuples = [t * scale for t, _ in results]
    vac_tuples = np.concatenate([
        np.column_stack([v.real, v.imag]).ravel() for _, v in results
    ]) * scale

    result = analysis.inseparability(shot_tuples, b_step=b_step, n_boot=n_boot,
                                     seed=base_seed, vacuum_tuples=vac_tuples)
    model = analysis.lambda_curve_from_state(spec.detected_state(), result.b_grid)
    return InsepRun(result=result, vacuum_variance=vac_var, model_lambda=model,
                    spec=spec)


@dataclass(frozen=True)
class CorrelationRun:
    auto_a: analysis.CorrelationResult
    auto_r: analysis.CorrelationResult
    cross: analysis.CorrelationResult
    vacuum_auto: analysis.CorrelationResult
    expected_cross_peak: float  # sqrt(eta) * |C_A(0)|
    ratio: float  # |C_X(0)| / |C_A(0)|


def run_correlation_pipeline(spec: SynthesisSpec, det: DetectionConfig | None = None,
                             n_shots: int = 500, base_seed: int = 11,
                             t_a: float = 40.0, window_length: float = 26.0,
                             window_offset: float = 8.0,
                             cutoff_khz: float = 1000.0,
                             threads: int | None = None) -> CorrelationRun:
    """Fig-7 style run: ensemble auto- and cross-correlations of the windows."""
    det = det or DetectionConfig(lpf_cutoff=cutoff_khz)
    seq = build_rase(t_a=t_a, t_b=spec.storage_t_b)
    timeline = build_timeline(seq, det, window_length=window_length,
                              window_offset=window_offset,
                              vacuum_length=window_length + 4.0)
    threads = thread_count(threads)

    def one(k: int):
        raw = synthesize_shot(timeline, spec, det, base_seed, k)
        tr = preprocess_shot(raw, cutoff_khz)
        a = tr.window_samples(tr.windows_of("ASE")[0])
        r = tr.window_samples(tr.windows_of("RASE")[0])
        vac = tr.window_samples(tr.windows_of("vacuum")[0])[:a.size]
        return a, r, vac

    shots = _map_shots(one, n_shots, threads)
    vac_all = np.concatenate([v for _, _, v in shots])
    scale = 1.0 / math.sqrt(0.5 * float(np.var(vac_all.real) + np.var(vac_all.imag)))
    a_wins = [a * scale for a, _, _ in shots]
    r_wins = [r * scale for _, r, _ in shots]
    v_wins = [v * scale for _, _, v in shots]

    fs = timeline.sample_rate
    auto_a = analysis.autocorrelate(a_wins, fs, kind="auto_A")
    auto_r = analysis.autocorrelate(r_wins, fs, kind="auto_R")
    cross = analysis.correlate(a_wins, r_wins, fs)
    vacuum_auto = analysis.autocorrelate(v_wins, fs, kind="vacuum")

    clean_a = analysis.subtract_vacuum_autocorr(auto_a, vacuum_auto)
    ratio = cross.peak / clean_a.peak
    expected = math.sqrt(spec.eta_recall) * clean_a.peak
    return CorrelationRun(auto_a=auto_a, auto_r=auto_r, cross=cross,
                          vacuum_auto=vacuum_auto, expected_cross_peak=expected,
                          ratio=ratio)


def run_multiplex_pipeline(spec: SynthesisSpec, det: DetectionConfig | None = None,
                           n_shots: int = 800, base_seed: int = 23,
                           gap: float = 160.0, n_modes: int = 70,
                           mode_length: float = 0.5, mode_pitch: float = 2.0,
                           cutoff_khz: float = 4000.0,
                           threads: int | None = None) -> dict:
    """Fig-9 style run: per-mode correlations across the multiplexed windows.

    Each mode is synthesized as its own temporal mode, so the neighbor
    cross-correlations probe mode mixing directly.
    """
    det = det or DetectionConfig(lpf_cutoff=cutoff_khz)
    seq = build_rase(t_a=gap, t_b=spec.storage_t_b)
    timeline = build_timeline(seq, det, n_mode_windows=n_modes,
                              mode_length=mode_length, mode_pitch=mode_pitch)
    threads = thread_count(threads)

    def one(k: int):
        raw = synthesize_multiplex_shot(timeline, spec, det, base_seed, k)
        tr = preprocess_shot(raw, cutoff_khz)
        a_list = [tr.window_samples(w) for w in tr.windows_of("ASE")]
        r_list = [tr.window_samples(w) for w in tr.windows_of("RASE")]
        return a_list, r_list

    shots = _map_shots(one, n_shots, threads)
    a_modes = [[shot[0][m] for shot in shots] for m in range(n_modes)]
    r_modes = [[shot[1][m] for shot in shots] for m in range(n_modes)]
    out = analysis.multiplex_analysis(a_modes, r_modes, timeline.sample_rate)

    offset = 10.0  # window_offset default used by build_timeline
    out["mode_delays_us"] = np.array(
        [2.0 * (offset + m * mode_pitch) + spec.storage_t_b
         for m in range(1, n_modes + 1)]
    )
    return out


def run_polarization_pipeline(spec: SynthesisSpec,
                              orth_rase_power: float = 0.06,
                              orth_corr_fraction: float = 0.8,
                              orth_ase_power: float = 1.0,
                              orth_ref_power: float = 0.009,
                              det: DetectionConfig | None = None,
                              n_shots: int = 300, base_seed: int = 31,
                              t_a: float = 40.0, window_length: float = 26.0,
                              cutoff_khz: float = 1000.0,
                              threads: int | None = None) -> dict:
    """Aligned vs orthogonal polarization runs and the mixing bound."""
    det = det or DetectionConfig(lpf_cutoff=cutoff_khz)
    seq = build_rase(t_a=t_a, t_b=spec.storage_t_b)
    timeline = build_timeline(seq, det, window_length=window_length,
                              window_offset=8.0)
    orth_spec = replace(spec, orth_rase_power=orth_rase_power,
                        orth_corr_fraction=orth_corr_fraction,
                        orth_ase_power=orth_ase_power,
                        orth_ref_power=orth_ref_power)
    threads = thread_count(threads)

    def make(run_spec: SynthesisSpec, seed_offset: int):
        def one(k: int) -> TimeTrace:
            raw = synthesize_shot(timeline, run_spec, det, base_seed + seed_offset, k)
            return preprocess_shot(raw, cutoff_khz)
        return _map_shots(one, n_shots, threads)

    aligned = make(spec, 0)
    orth = make(orth_spec, 10_000)
    return analysis.polarization_metrics(aligned, orth, seed=base_seed)
