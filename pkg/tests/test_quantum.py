import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from raselab.analysis import demodulate, lambda_curve_from_state
from raselab.core import DetectionConfig, ValidationError
from raselab.quantum import (
    GaussianState,
    SynthesisSpec,
    apply_channel,
    bandwidth_for_corr_fwhm,
    build_timeline,
    detected_moments,
    fractional_shift,
    loss,
    phase,
    physicality_defect,
    rase_state,
    sample_shots,
    synthesize_shot,
    synthesize_trace,
    two_mode_squeeze,
    vacuum_state,
)
from raselab.sequence import build_rase

B_GRID = np.arange(0.0, 1.0001, 0.001)


def test_loss_identity_and_vacuum():
    state = rase_state(7.0, 0.17, 1.0)
    same = apply_channel(state, loss(1.0, 0))
    assert np.allclose(same.cov, state.cov, atol=1e-12)
    dead = apply_channel(state, loss(0.0, 0))
    assert np.allclose(dead.cov[:2, :2], np.eye(2), atol=1e-12)
    assert np.allclose(dead.cov[:2, 2:], 0.0, atol=1e-12)


def test_two_mode_squeeze_variance():
    G = 5.0
    state = apply_channel(vacuum_state(2), two_mode_squeeze(G, (0, 1)))
    for i in range(4):
        assert state.cov[i, i] == pytest.approx(2 * G - 1, abs=1e-12)
    assert state.cov[0, 2] == pytest.approx(-2 * math.sqrt(G * (G - 1)), abs=1e-12)
    assert state.cov[1, 3] == pytest.approx(+2 * math.sqrt(G * (G - 1)), abs=1e-12)


def test_loss_composition_exact():
    state = apply_channel(vacuum_state(2), two_mode_squeeze(4.0, (0, 1)))
    once = apply_channel(state, loss(0.6 * 0.5, 0))
    twice = apply_channel(apply_channel(state, loss(0.6, 0)), loss(0.5, 0))
    assert np.allclose(once.cov, twice.cov, atol=1e-12)
    assert np.allclose(once.mean, twice.mean, atol=1e-12)


@given(
    g=st.floats(1.0, 50.0),
    ell=st.floats(0.0, 1.0),
    theta=st.floats(-math.pi, math.pi),
)
@settings(max_examples=60, deadline=None)
def test_channel_physicality_preserved(g, ell, theta):
    # cov + i Omega >= 0 is preserved by the unitary/CP channels
    state = apply_channel(vacuum_state(2), two_mode_squeeze(g, (0, 1)))
    state = apply_channel(state, loss(ell, 0))
    state = apply_channel(state, phase(theta, 1))
    assert physicality_defect(state) > -1e-9


def test_conjugate_retrieve_is_detection_frame_map():
    # the retrieve map lands in the recorded (transform) frame: the recorded
    # covariance is positive definite but is not a CP image of the state,
    # matching the loss-model term eta <I_R^2> + (1 - eta)
    state = rase_state(7.0, 0.17, 0.304)
    assert np.all(np.linalg.eigvalsh(state.cov) > 0)
    m = detected_moments(state)
    G = 10 ** 0.7
    ell = 0.304
    assert m["I_A2"] == pytest.approx(ell * (2 * G - 1) + (1 - ell), abs=1e-9)
    assert m["I_R2"] == pytest.approx(
        ell * (0.17 * (2 * G - 1) + (1 - 0.17)) + (1 - ell), abs=1e-9)
    assert m["I_AI_R"] == pytest.approx(
        -ell * math.sqrt(0.17) * 2 * math.sqrt(G * (G - 1)), abs=1e-9)
    assert m["Q_AQ_R"] == pytest.approx(m["I_AI_R"], abs=1e-12)


def test_rase_state_lambda_minima():
    lam = lambda_curve_from_state(rase_state(7.0, 0.17, 0.304), B_GRID)
    assert float(np.min(lam)) == pytest.approx(1.8285, abs=5e-4)
    assert B_GRID[int(np.argmin(lam))] == pytest.approx(0.165, abs=2e-3)

    lam_ll = lambda_curve_from_state(rase_state(7.0, 0.17, 1.0), B_GRID)
    assert float(np.min(lam_ll)) == pytest.approx(1.4358, abs=5e-4)


def test_rase_state_eta_zero_separable():
    state = rase_state(7.0, 0.0, 0.304)
    assert np.allclose(state.cov[2:, 2:], np.eye(2), atol=1e-12)
    lam = lambda_curve_from_state(state, B_GRID)
    assert np.all(lam >= 2.0 - 1e-9)


def test_ideal_tms_violation_strict_and_continuous():
    for g_db in (0.5, 3.0, 7.0, 20.0):
        lam = lambda_curve_from_state(rase_state(g_db, 1.0, 1.0), B_GRID)
        assert np.min(lam) < 2.0
    # lambda -> 2 as G -> 1 (the gap closes like sqrt(G - 1))
    barely = lambda_curve_from_state(rase_state(1e-7, 1.0, 1.0), B_GRID)
    assert np.min(barely) < 2.0
    assert np.min(barely) == pytest.approx(2.0, abs=1e-3)


def test_sample_shots_vacuum_normalization():
    shots = sample_shots(vacuum_state(2), 1_000_000, seed=1)
    var = shots.var(axis=0)
    assert np.all(np.abs(var - 1.0) < 0.005)


def test_sample_shots_match_analytic_cov():
    state = rase_state(7.0, 0.17, 0.304)
    shots = sample_shots(state, 1_000_000, seed=2)
    cov = np.cov(shots.T, bias=True)
    scale = np.sqrt(np.outer(np.diag(state.cov), np.diag(state.cov)))
    assert np.max(np.abs(cov - state.cov) / scale) < 0.01


def test_sample_shots_deterministic():
    state = rase_state(7.0, 0.17, 0.304)
    a = sample_shots(state, 100, seed=3)
    b = sample_shots(state, 100, seed=3)
    assert np.array_equal(a, b)


def test_sample_shots_rejects_bad_cov():
    bad = GaussianState(n_modes=1, mean=np.zeros(2),
                        cov=np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ValidationError):
        sample_shots(bad, 10, seed=0)


def test_fractional_shift_invertible():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(256) + 1j * rng.standard_normal(256)
    y = fractional_shift(fractional_shift(x, 0.037, 100.0), -0.037, 100.0)
    assert np.max(np.abs(x - y)) < 1e-12


def test_bandwidth_matches_corr_fwhm():
    # |sinc(pi W tau)| = 1/2 at tau = FWHM / 2
    w = bandwidth_for_corr_fwhm(1.95)
    x = math.pi * w * (1.95 / 2)
    assert math.sin(x) / x == pytest.approx(0.5, abs=1e-12)


def _variance(x):
    return 0.5 * (np.var(x.real) + np.var(x.imag))


def test_zero_gain_windows_indistinguishable_from_vacuum():
    det = DetectionConfig(trigger_jitter_max=0.0, interferometer_phase_drift_std=0.0)
    seq = build_rase(t_a=40.0, t_b=0.1)
    timeline = build_timeline(seq, det, window_length=13.2)
    spec = SynthesisSpec(gain_db=0.0, eta_recall=0.17, transmission=0.304,
                         write_time_T=None)
    acc = {"ASE": [], "RASE": [], "vacuum": []}
    for k in range(60):
        tr = synthesize_shot(timeline, spec, det, 5, k)
        for kind in acc:
            acc[kind].append(_variance(tr.window_samples(tr.windows_of(kind)[0])))
    v_ase = np.mean(acc["ASE"])
    v_rase = np.mean(acc["RASE"])
    v_vac = np.mean(acc["vacuum"])
    assert v_ase / v_vac == pytest.approx(1.0, abs=0.02)
    assert v_rase / v_vac == pytest.approx(1.0, abs=0.02)


def test_synthesize_trace_ideal_transform_overlay():
    # eta = 1, no losses, theta = 0, T -> infinity: after demodulation the
    # RASE window is the time-reversed conjugate of the ASE window
    det = DetectionConfig(trigger_jitter_max=0.0, interferometer_phase_drift_std=0.0)
    seq = build_rase(t_a=30.0, t_b=0.1)
    spec = SynthesisSpec(gain_db=20.0, eta_recall=1.0, transmission=1.0,
                         write_time_T=None, protocol_phase=0.0, noise_free=True,
                         ref_amplitude=0.0)
    rng = np.random.default_rng(9)
    n = int(30.0 * 100)
    z = rng.standard_normal((n, 2))
    amp = math.sqrt(2 * 10.0**2 - 1)
    # analysis-frame partner of a is -a (canonical anti-correlated pair), so a
    # protocol phase of 0 gives RASE = +conj(ASE) at the mirror point
    quads = np.column_stack([amp * z[:, 0], amp * z[:, 1],
                             -amp * z[:, 0], -amp * z[:, 1]])
    trace = synthesize_trace(seq, quads, det, spec, seed=11)
    # keep the filter passband plus its transition inside the signal band so
    # only the correlated in-band content survives
    # cutoff keeps the full signal band but excludes the reference
    # tones (at -5, -25, +2 MHz after demodulation)
    base = demodulate(trace, det.het_freq, cutoff_khz=1000.0)
    timeline = build_timeline(seq, det)
    a_sl = timeline.interval_slice(timeline.ase_interval)
    r_sl = timeline.interval_slice(timeline.rase_interval)
    a = base.samples[a_sl]
    r = base.samples[r_sl]
    overlay = np.conj(r[::-1])
    scale = np.sqrt(np.mean(np.abs(a) ** 2))
    assert np.max(np.abs(a - overlay)) < 1e-9 * scale


def test_synthesize_trace_validates_tuple_shape():
    det = DetectionConfig()
    seq = build_rase(t_a=30.0, t_b=0.1)
    with pytest.raises(ValidationError):
        synthesize_trace(seq, np.zeros((10, 3)), det, SynthesisSpec(), seed=0)
    with pytest.raises(ValidationError):
        synthesize_trace(seq, np.zeros((10, 4)), det, SynthesisSpec(), seed=0)


def test_timeline_window_pulse_collision_rejected():
    det = DetectionConfig()
    seq = build_rase(t_a=12.0, t_b=0.1)
    with pytest.raises(ValidationError):
        build_timeline(seq, det, window_length=13.2, window_offset=10.0)
