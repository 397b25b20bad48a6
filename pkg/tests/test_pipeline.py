import math

import numpy as np
import pytest

from raselab.pipeline import (
    run_correlation_pipeline,
    run_insep_pipeline,
    run_multiplex_pipeline,
    run_polarization_pipeline,
)
from raselab.quantum import SynthesisSpec

QUANTUM_SPEC = SynthesisSpec(gain_db=7.0, eta_recall=0.17, transmission=0.304,
                             write_time_T=None)


def test_insep_pipeline_matches_model_scale():
    run = run_insep_pipeline(QUANTUM_SPEC, n_shots=300, base_seed=7, n_boot=200)
    assert run.result.lambda_min == pytest.approx(1.8285, abs=0.12)
    assert run.result.b_min == pytest.approx(0.165, abs=0.1)
    # vacuum window normalization sits at the analytic filter transmission
    assert run.vacuum_variance == pytest.approx(0.006, rel=0.1)


def test_insep_pipeline_deterministic():
    a = run_insep_pipeline(QUANTUM_SPEC, n_shots=120, base_seed=3, n_boot=50)
    b = run_insep_pipeline(QUANTUM_SPEC, n_shots=120, base_seed=3, n_boot=50)
    assert a.result.lambda_min == b.result.lambda_min
    assert a.result.sigma_min == b.result.sigma_min
    assert np.array_equal(a.result.lam, b.result.lam)


def test_correlation_pipeline_sqrt_eta():
    spec = SynthesisSpec(gain_db=30.0, eta_recall=0.5, transmission=1.0,
                         write_time_T=None)
    run = run_correlation_pipeline(spec, n_shots=150, base_seed=11)
    assert run.ratio == pytest.approx(math.sqrt(0.5), rel=0.02)
    assert run.auto_a.fwhm == pytest.approx(1.95, abs=0.1)
    assert run.cross.fwhm == pytest.approx(1.95, abs=0.1)


def test_multiplex_pipeline_small():
    spec = SynthesisSpec(gain_db=30.0, eta_recall=0.81, transmission=1.0,
                         write_time_T=40.0)
    mux = run_multiplex_pipeline(spec, n_shots=300, base_seed=23, gap=60.0,
                                 n_modes=20)
    assert mux["n_modes"] == 20
    # 1/e point of e^{-2 m pitch / T}: T / (2 pitch) = 10 mode steps
    assert abs(mux["tbp"] - 11) <= 2
    assert np.all(mux["neighbor_cross"] < 4.0 * mux["neighbor_sigma"])


def test_polarization_pipeline_bounds():
    spec = SynthesisSpec(gain_db=30.0, eta_recall=0.81, transmission=1.0,
                         write_time_T=None)
    pol = run_polarization_pipeline(spec, n_shots=150, base_seed=31)
    assert pol["suppression_rase"] == pytest.approx(0.94, abs=0.02)
    assert pol["orth_correlated_fraction"] == pytest.approx(0.8, abs=0.05)
    assert pol["mixing_bound"] == pytest.approx(0.012, abs=0.004)
    assert pol["suppression_ref"] == pytest.approx(0.991, abs=0.01)
