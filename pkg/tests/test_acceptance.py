"""Acceptance suite: one test per primary criterion, tolerances pinned.

Run with ``pytest -s tests/test_acceptance.py`` to see one PASS/FAIL line per
criterion. Shot counts and seeds are fixed so every number here is
reproducible bit-for-bit.
"""

import math
import time

import numpy as np
import pytest

from raselab import analysis
from raselab.decay import (
    VoigtParams,
    default_field_profile,
    envelope_from_lineshape,
    envelope_t1e,
    fit_decay,
    gradient_lineshape,
    tophat_lineshape,
    total_envelope,
)
from raselab.gain import (
    MbeConfig,
    efficiency_curve,
    gaussian_probe_trace,
    ledingham_efficiency,
    mbe_simulate,
)
from raselab.pipeline import (
    run_correlation_pipeline,
    run_insep_pipeline,
    run_multiplex_pipeline,
    run_polarization_pipeline,
)
from raselab.quantum import SynthesisSpec, rase_state, sample_shots
from raselab.reproduce import WRITE_VOIGT, reproduce_figure
from raselab.sequence import build_i4le

HZ_US = 1e-6


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}", flush=True)
    assert ok, f"{name}: {detail}"


def test_c01_ledingham_identity():
    rng = np.random.default_rng(0)
    alpha = rng.uniform(1e-6, 20.0, 1000)
    t0 = time.perf_counter()
    sinh_form = 8.0 * np.sinh(alpha / 2.0) ** 2 / (2.0 * np.exp(alpha) - 2.0)
    ours = ledingham_efficiency(alpha)
    elapsed = time.perf_counter() - t0
    worst = float(np.max(np.abs(sinh_form - ours)))
    _report("C01 Ledingham identity",
            worst < 1e-12 and elapsed < 1.0,
            f"max |sinh form - simplified| = {worst:.2e}, runtime {elapsed:.3f} s")


def test_c02_mbe_reduction():
    seq = build_i4le(t_a=6.0, t_b=0.1)
    probe = gaussian_probe_trace()
    t0 = time.perf_counter()
    errors = {}
    for alpha_l in (0.5, 1.0, 2.0, 4.0):
        result = mbe_simulate(MbeConfig(alpha_l_gain=alpha_l), seq, probe)
        errors[alpha_l] = abs(result["efficiency"] / ledingham_efficiency(alpha_l) - 1.0)
    elapsed = time.perf_counter() - t0
    worst = max(errors.values())
    _report("C02 MBE reduction to closed form",
            worst < 0.01 and elapsed < 60.0,
            f"worst relative error {worst:.2%} over alpha L = {list(errors)}, "
            f"runtime {elapsed:.1f} s")


def test_c03_efficiency_curve_shape():
    gains = list(np.arange(4.0, 36.0 + 1e-9, 2.0))
    rows = efficiency_curve(gains)
    below = all(r["eff_mbe"] < r["eff_ledingham"] for r in rows)
    peak = max(r["eff_mbe"] for r in rows)
    peak_at_36 = rows[-1]["eff_mbe"]
    _report("C03 efficiency-curve shape",
            below and peak <= 0.81,
            f"MBE below Ledingham at all {len(rows)} gains: {below}; "
            f"peak {peak:.3f} (at 36 dB: {peak_at_36:.3f}) <= 0.81")


@pytest.fixture(scope="module")
def insep_run():
    spec = SynthesisSpec(gain_db=7.0, eta_recall=0.17, transmission=0.304,
                         write_time_T=None)
    t0 = time.perf_counter()
    run = run_insep_pipeline(spec, n_shots=5000, base_seed=7, threads=1)
    run_time = time.perf_counter() - t0
    return run, run_time


def test_c04_inseparability_reproduction(insep_run):
    run, run_time = insep_run
    r = run.result
    ok = (1.76 <= r.lambda_min <= 1.86) and r.certainty_sigma >= 3.0 and run_time < 300.0
    _report("C04 inseparability reproduction",
            ok,
            f"lambda_min = {r.lambda_min:.4f} (band [1.76, 1.86]), b_min = "
            f"{r.b_min:.3f}, certainty {r.certainty_sigma:.1f} sigma, "
            f"5000 shots in {run_time:.0f} s single-threaded")


def test_c05_model_vs_monte_carlo():
    state = rase_state(7.0, 0.17, 0.304)
    shots = sample_shots(state, 2000, seed=1)
    shot_list = [shots[i * 10:(i + 1) * 10] for i in range(200)]
    result = analysis.inseparability(shot_list, n_boot=50, seed=2)
    pooled = np.vstack(shot_list)
    mean = pooled.mean(axis=0)
    cov = (pooled - mean).T @ (pooled - mean) / pooled.shape[0]
    moments = {"I_A2": cov[0, 0], "Q_A2": cov[1, 1], "I_R2": cov[2, 2],
               "Q_R2": cov[3, 3], "I_AI_R": cov[0, 2], "Q_AQ_R": cov[1, 3]}
    identity_err = float(np.max(np.abs(
        analysis.insep_model(result.b_grid, 1.0, 1.0, moments) - result.lam)))

    mc = sample_shots(state, 1_000_000, seed=3)
    mc_cov = np.cov(mc.T, bias=True)
    mc_moments = {"I_A2": mc_cov[0, 0], "Q_A2": mc_cov[1, 1], "I_R2": mc_cov[2, 2],
                  "Q_R2": mc_cov[3, 3], "I_AI_R": mc_cov[0, 2], "Q_AQ_R": mc_cov[1, 3]}
    b = np.arange(0.0, 1.0001, 0.001)
    lam_mc = analysis.insep_model(b, 1.0, 1.0, mc_moments)
    lam_exact = analysis.lambda_curve_from_state(state, b)
    mc_err = float(np.max(np.abs(lam_mc - lam_exact) / lam_exact))
    _report("C05 model vs Monte Carlo",
            identity_err < 1e-12 and mc_err < 0.01,
            f"sample-moment identity {identity_err:.2e} (< 1e-12); "
            f"1e6-sample agreement {mc_err:.2%} (< 1%)")


def test_c06_squeezing_arithmetic():
    rounded = round(analysis.squeezing_db(1.81), 1)
    lam = analysis.lambda_curve_from_state(rase_state(7.0, 0.17, 1.0),
                                           np.arange(0, 1.0001, 0.001))
    lossless_db = analysis.squeezing_db(float(np.min(lam)))
    ok = rounded == 0.4 and abs(lossless_db - 1.5) <= 0.1
    _report("C06 squeezing arithmetic",
            ok,
            f"squeezing_db(1.81) = {analysis.squeezing_db(1.81):.4f} -> {rounded}; "
            f"lossless minimum at eta = 0.17 gives {lossless_db:.3f} dB (1.5 +- 0.1)")


def test_c07_multiplexing():
    spec = SynthesisSpec(gain_db=30.0, eta_recall=0.81, transmission=1.0,
                         write_time_T=157.8)
    mux = run_multiplex_pipeline(spec, n_shots=1600, base_seed=23)
    nb_sig = np.max(mux["neighbor_cross"] / mux["neighbor_sigma"])
    ok = (mux["n_modes"] == 70 and abs(mux["tbp"] - 40) <= 2 and nb_sig <= 3.0)
    _report("C07 temporal multiplexing",
            ok,
            f"{mux['n_modes']} modes defined; TBP = {mux['tbp']} (40 +- 2); "
            f"max neighbor cross at {nb_sig:.2f} sigma (<= 3)")


def test_c08_correlation_scaling():
    worst = 0.0
    details = []
    for eta in (0.17, 0.5, 0.81):
        spec = SynthesisSpec(gain_db=30.0, eta_recall=eta, transmission=1.0,
                             write_time_T=None)
        run = run_correlation_pipeline(spec, n_shots=500, base_seed=11)
        rel = abs(run.ratio / math.sqrt(eta) - 1.0)
        worst = max(worst, rel)
        details.append(f"eta={eta}: {run.ratio:.4f} vs {math.sqrt(eta):.4f}")
    _report("C08 correlation scaling sqrt(eta)",
            worst < 0.02,
            "; ".join(details) + f"; worst deviation {worst:.2%} (< 2%)")


def test_c09_decay_round_trip():
    rng = np.random.default_rng(42)
    voigt = VoigtParams(gaussian_fwhm=3.0, lorentzian_fwhm=2.0)
    t = np.linspace(2.0, 500.0, 30)
    clean = total_envelope(voigt, None, t)
    successes = 0
    for _ in range(100):
        amps = clean * (1.0 + 0.01 * rng.standard_normal(t.size))
        try:
            fit = fit_decay(t, amps)
        except Exception:
            continue
        if (abs(fit.voigt.gaussian_fwhm / 3.0 - 1) < 0.05
                and abs(fit.voigt.lorentzian_fwhm / 2.0 - 1) < 0.05):
            successes += 1

    width = 2000.0
    ls = tophat_lineshape(width)
    times = np.linspace(0.0, 800.0, 200)
    sinc_err = float(np.max(np.abs(
        envelope_from_lineshape(ls, times) - np.abs(np.sinc(width * HZ_US * times)))))
    _report("C09 decay round trip",
            successes >= 95 and sinc_err < 1e-6,
            f"{successes}/100 Voigt recoveries within 5% at 1% noise (>= 95); "
            f"linear-gradient |sinc| envelope error {sinc_err:.1e} (< 1e-6)")


def test_c10a_field_gradient_scale():
    profile = default_field_profile()
    max_detuning = profile.max_detuning_hz()
    _report("C10a field-gradient scale",
            max_detuning <= 300.0,
            f"default <1 mm-offset profile spans {max_detuning:.0f} Hz (<= 300 Hz)")


@pytest.mark.xfail(
    strict=True,
    reason="A <= 300 Hz gradient cannot shift a 165 us 1/e time to 157.8 us: "
           "any spectral density confined to a 300 Hz span has envelope >= "
           "cos(pi * 300 Hz * t) >= 0.989 at t = 165 us, while the target "
           "shift needs a gradient-envelope factor <= 0.985 even for the "
           "flattest admissible dephasing profile. The reference pair (165 "
           "-> 157.8 us with <= 300 Hz maximum detuning) is therefore not "
           "jointly attainable in the product-envelope model; the package's "
           "documented convention instead calibrates the dephasing profile "
           "so the combined 1/e time is 157.8 us.",
)
def test_c10b_field_gradient_t1e_shift():
    profile = default_field_profile()
    grad = gradient_lineshape(profile)
    t_with = envelope_t1e(WRITE_VOIGT, grad)
    t_without = envelope_t1e(WRITE_VOIGT, None)
    ratio = t_with / t_without
    target = 157.8 / 165.0
    ok = abs(ratio / target - 1.0) <= 0.03
    _report("C10b field-gradient 1/e-time shift",
            ok,
            f"t_1e ratio {ratio:.4f} vs 157.8/165 = {target:.4f} (+- 3%)")


def test_c11_phase_correction_and_determinism(tmp_path):
    from raselab.analysis import phase_correct
    from raselab.core import DetectionConfig, TimeTrace, WindowSpec
    from raselab.quantum import _ref_envelope, fractional_shift

    det = DetectionConfig()
    fs = 100.0
    n = int(30.0 * fs)
    t = np.arange(n) / fs
    samples = np.zeros(n, dtype=complex)
    windows = []
    for k, f in enumerate(det.ref_freqs):
        start = 2.0 + 6.0 * k
        sl = slice(int(start * fs), int((start + 4.0) * fs))
        env = _ref_envelope(sl.stop - sl.start, fs, ramp_us=1.6)
        samples[sl] = 10.0 * env * np.exp(2j * np.pi * f * (t[sl] - start))
        windows.append(WindowSpec("reference", start, 4.0, ref_freq=f))
    trace = TimeTrace(sample_rate=fs, samples=samples, het_freq=13.0,
                      windows=tuple(windows))
    jit, phi = 0.031, -0.8
    distorted = trace.with_samples(
        fractional_shift(np.exp(1j * phi) * trace.samples, jit, fs))
    out = phase_correct(distorted)
    residual = float(np.max(np.abs(out["trace"].samples - trace.samples)))

    results = []
    for sub in ("a", "b"):
        out_dir = tmp_path / sub
        out_dir.mkdir()
        reproduce_figure("fig10", out_dir, shots=120, seed=9)
        results.append((out_dir / "fig10_results.json").read_bytes())
    deterministic = results[0] == results[1]
    _report("C11 phase correction and determinism",
            residual < 1e-9 and deterministic,
            f"noiseless recovery residual {residual:.1e} (< 1e-9); identical "
            f"(config, seed) -> byte-identical results JSON: {deterministic}")


def test_c12_polarization_bound():
    spec = SynthesisSpec(gain_db=30.0, eta_recall=0.81, transmission=1.0,
                         write_time_T=None)
    pol = run_polarization_pipeline(spec, orth_rase_power=0.06,
                                    orth_corr_fraction=0.8, n_shots=300,
                                    base_seed=31)
    mixing = pol["mixing_bound"]
    sigma = pol["mixing_bound_sigma"]
    band = max(3.0 * sigma, 0.002)
    ok = abs(mixing - 0.012) <= band and mixing <= 0.012 + 0.006
    _report("C12 polarization mixing bound",
            ok,
            f"mixing bound {mixing:.4f} +- {sigma:.4f} vs 0.012 "
            f"(3-sigma band {band:.4f}; reference value 1.2 +- 0.6%)")
