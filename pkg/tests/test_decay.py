import math

import numpy as np
import pytest

from raselab.core import ValidationError
from raselab.decay import (
    FieldProfile,
    Lineshape,
    VoigtParams,
    default_field_profile,
    envelope_from_lineshape,
    envelope_t1e,
    fit_decay,
    gaussian_lineshape,
    gradient_lineshape,
    lorentzian_lineshape,
    tophat_lineshape,
    total_envelope,
    voigt_time_envelope,
)

KHZ_US = 1e-3
HZ_US = 1e-6


def test_tophat_envelope_is_sinc():
    width = 2000.0  # Hz
    ls = tophat_lineshape(width)
    t = np.linspace(0.0, 800.0, 300)  # us
    expected = np.abs(np.sinc(width * HZ_US * t))  # np.sinc(x) = sin(pi x)/(pi x)
    got = envelope_from_lineshape(ls, t)
    assert np.max(np.abs(got - expected)) < 1e-6


def test_lorentzian_envelope_is_exponential():
    fwhm = 3000.0  # Hz
    ls = lorentzian_lineshape(fwhm)
    t = np.linspace(0.0, 400.0, 200)
    expected = np.exp(-np.pi * fwhm * HZ_US * t)
    got = envelope_from_lineshape(ls, t)
    assert np.max(np.abs(got - expected)) < 1e-6


def test_gaussian_envelope_pair():
    fwhm = 3000.0  # Hz
    ls = gaussian_lineshape(fwhm)
    t = np.linspace(0.0, 400.0, 200)
    expected = np.exp(-((np.pi * fwhm * HZ_US * t) ** 2) / (4.0 * math.log(2)))
    got = envelope_from_lineshape(ls, t)
    assert np.max(np.abs(got - expected)) < 1e-6


def test_envelope_is_one_at_zero_and_bounded():
    rng = np.random.default_rng(1)
    for _ in range(10):
        grid = np.sort(rng.uniform(-5000, 5000, 40))
        grid += np.arange(40) * 1e-6  # strictly increasing
        density = rng.uniform(0.0, 1.0, 40)
        density[0] = density[-1] = 0.1
        ls = Lineshape(grid, density)
        t = np.concatenate([[0.0], rng.uniform(0, 1000, 50)])
        env = envelope_from_lineshape(ls, t)
        assert env[0] == pytest.approx(1.0, abs=1e-12)
        assert np.all(env <= 1.0 + 1e-9)


def test_voigt_time_envelope_components():
    t = np.linspace(0.0, 300.0, 100)
    lor = voigt_time_envelope(VoigtParams(0.0, 2.0), t)
    assert np.allclose(lor, np.exp(-np.pi * 2.0 * KHZ_US * t), atol=1e-14)
    gau = voigt_time_envelope(VoigtParams(3.0, 0.0), t)
    assert np.allclose(gau, np.exp(-((np.pi * 3.0 * KHZ_US * t) ** 2) / (4 * math.log(2))),
                       atol=1e-14)


def test_total_envelope_product():
    t = np.linspace(0.0, 500.0, 120)
    voigt = VoigtParams(0.0, 2.0)
    width = 1000.0
    grad = tophat_lineshape(width)
    combined = total_envelope(voigt, grad, t)
    expected = (np.exp(-np.pi * 2.0 * KHZ_US * t)
                * np.abs(np.sinc(width * HZ_US * t)))
    assert np.max(np.abs(combined - expected)) < 1e-6
    # trivial gradient factor: pure Voigt
    assert np.allclose(total_envelope(voigt, None, t),
                       voigt_time_envelope(voigt, t), atol=1e-15)


def test_gradient_lineshape_linear_is_tophat():
    profile = FieldProfile(a=0.0, b=1e-4, c=6.0, crystal_extent=(-1.5, 1.5),
                           sensitivity_g=1.0)
    ls = gradient_lineshape(profile)
    # uniform density over the span
    inner = ls.density[2:-2]
    assert np.ptp(inner) / np.mean(inner) < 1e-9
    width = profile.max_detuning_hz()
    t = np.linspace(0.0, 5000.0, 200)
    got = envelope_from_lineshape(ls, t)
    expected = np.abs(np.sinc(width * HZ_US * t))
    assert np.max(np.abs(got - expected)) < 1e-6


def test_gradient_lineshape_constant_field():
    profile = FieldProfile(a=0.0, b=0.0, c=6.0, crystal_extent=(-1.5, 1.5),
                           sensitivity_g=1.0)
    ls = gradient_lineshape(profile)
    # the delta-like density occupies one 1 Hz bin; constant envelope on any
    # delay the protocol reaches
    t = np.linspace(0.0, 500.0, 50)
    assert np.all(np.abs(envelope_from_lineshape(ls, t) - 1.0) < 1e-6)


def test_default_profile_detuning_scale():
    profile = default_field_profile()
    assert profile.max_detuning_hz() <= 300.0
    ls = gradient_lineshape(profile)
    # parabola off crystal center: lopsided density with a step on one side
    f, rho = ls.detunings, ls.density
    centroid = np.trapezoid(f * rho, f)
    midpoint = 0.5 * (f[0] + f[-1])
    assert abs(centroid - midpoint) > 0.01 * (f[-1] - f[0])


def test_gradient_area_refinement_invariance():
    profile = default_field_profile()
    t = np.linspace(0.0, 400.0, 60)
    coarse = envelope_from_lineshape(gradient_lineshape(profile, 1024), t)
    fine = envelope_from_lineshape(gradient_lineshape(profile, 2048), t)
    assert np.max(np.abs(coarse - fine)) < 1e-3
    assert gradient_lineshape(profile, 1024).area == pytest.approx(1.0, abs=1e-9)


def test_fit_decay_round_trip_single():
    rng = np.random.default_rng(0)
    voigt = VoigtParams(gaussian_fwhm=3.0, lorentzian_fwhm=2.0)
    t = np.linspace(2.0, 500.0, 30)
    amps = total_envelope(voigt, None, t) * (1 + 0.01 * rng.standard_normal(t.size))
    fit = fit_decay(t, amps)
    assert fit.voigt.gaussian_fwhm == pytest.approx(3.0, rel=0.05)
    assert fit.voigt.lorentzian_fwhm == pytest.approx(2.0, rel=0.05)


def test_fit_decay_pure_exponential():
    tau = 120.0
    t = np.linspace(5.0, 500.0, 25)
    amps = np.exp(-t / tau)
    fit = fit_decay(t, amps)
    assert fit.voigt.lorentzian_fwhm > 4 * fit.voigt.gaussian_fwhm
    assert fit.t_1e == pytest.approx(tau, rel=0.02)


def test_fit_decay_preconditions():
    with pytest.raises(ValidationError):
        fit_decay(np.array([1.0, 2, 3, 4, 5]), np.ones(5))
    with pytest.raises(ValidationError):
        fit_decay(np.linspace(1, 10, 8), -np.ones(8))


def test_envelope_t1e_matches_definition():
    voigt = VoigtParams(0.0, 2.0)
    t1e = envelope_t1e(voigt, None)
    assert total_envelope(voigt, None, np.array([t1e]))[0] == pytest.approx(
        1.0 / math.e, abs=1e-6)
