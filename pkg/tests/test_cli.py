import json

import numpy as np
import pytest

from raselab.cli import main
from raselab.core import ExperimentConfig, load_shot_set, save_config
from raselab.decay import VoigtParams, total_envelope


def run_cli(*argv) -> int:
    return main(list(argv))


def test_capacity_output(capsys):
    assert run_cli("capacity") == 0
    out = json.loads(capsys.readouterr().out)
    assert out["bandwidth_mhz"] == pytest.approx(95.42)
    assert out["capacity_modes"] == 7528


def test_sequence_output(capsys):
    assert run_cli("sequence", "--kind", "i4le", "--t-a", "10", "--t-b", "0.1") == 0
    out = json.loads(capsys.readouterr().out)
    assert out["echo_delay"] == pytest.approx(20.1)
    labels = [e["transition"] for e in out["events"]]
    assert labels == ["pi_i", "ASE", "pi_1", "pi_2"]


def test_sequence_rejects_overdrive(capsys):
    assert run_cli("sequence", "--kind", "i4le", "--input-area", "0.5") == 2
    assert "over-drives" in capsys.readouterr().err


def test_unknown_flag_rejected():
    assert run_cli("capacity", "--bogus") == 2


@pytest.fixture(scope="module")
def small_config(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "config.json"
    cfg = ExperimentConfig(t_a=30.0, t_b=0.1, gain_db=7.0, n_shots=6, base_seed=3)
    save_config(cfg, path)
    return path


def test_simulate_writes_shot_set(tmp_path, small_config):
    out = tmp_path / "shots"
    assert run_cli("simulate", "--config", str(small_config), "--out", str(out)) == 0
    traces = load_shot_set(out)
    assert len(traces) == 6
    seeds = [tr.seed for tr in traces]
    assert len(set(seeds)) == 6
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["base_seed"] == 3
    assert len(manifest["config_hash"]) == 64


def test_simulate_rejects_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"t_a": 30.0, "not_a_field": 1}))
    code = run_cli("simulate", "--config", str(bad), "--out", str(tmp_path / "o"))
    assert code == 2
    assert "not_a_field" in capsys.readouterr().err


def test_fit_decay_cli(tmp_path):
    t = np.linspace(2.0, 500.0, 25)
    amps = total_envelope(VoigtParams(0.0, 2.0), None, t)
    data = tmp_path / "decay.csv"
    np.savetxt(data, np.column_stack([t, amps]), delimiter=",",
               header="delay_us,amplitude", comments="")
    out = tmp_path / "fit.json"
    assert run_cli("fit-decay", "--data", str(data), "--out", str(out)) == 0
    fit = json.loads(out.read_text())
    assert fit["lorentzian_fwhm_khz"] == pytest.approx(2.0, rel=0.02)


def test_eff_curve_cli(tmp_path):
    out = tmp_path / "curve.csv"
    assert run_cli("eff-curve", "--gains", "4,10", "--out", str(out)) == 0
    rows = np.loadtxt(out, delimiter=",", skiprows=1, ndmin=2)
    assert rows.shape == (2, 3)
    assert np.all(rows[:, 1] < rows[:, 2])  # MBE below Ledingham


def test_reproduce_results_deterministic(tmp_path):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    for out in (out1, out2):
        code = run_cli("reproduce", "fig10", "--out", str(out),
                       "--shots", "150", "--seed", "5")
        assert code == 0
    r1 = (out1 / "fig10_results.json").read_bytes()
    r2 = (out2 / "fig10_results.json").read_bytes()
    assert r1 == r2
    payload = json.loads(r1)
    assert 1.5 < payload["results"]["lambda_min"] < 2.1
    manifest = json.loads((out1 / "run_manifest.json").read_text())
    assert "fig10_results.json" in manifest["outputs"]
    assert "fig10_inseparability.csv" in manifest["outputs"]


def test_analyze_corr_on_simulated_set(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    save_config(ExperimentConfig(t_a=30.0, gain_db=25.0, n_shots=8, base_seed=2),
                cfg_path)
    shots_dir = tmp_path / "shots"
    assert run_cli("simulate", "--config", str(cfg_path), "--out", str(shots_dir)) == 0
    out_dir = tmp_path / "results"
    assert run_cli("analyze", "corr", "--in", str(shots_dir), "--out", str(out_dir),
                   "--cutoff", "1000") == 0
    payload = json.loads((out_dir / "corr_results.json").read_text())
    assert payload["ratio_cross_over_auto"] > 0
    assert (out_dir / "correlations.csv").exists()


def test_analyze_insep_on_simulated_set(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    save_config(ExperimentConfig(t_a=30.0, gain_db=7.0, n_shots=110, base_seed=9),
                cfg_path)
    shots_dir = tmp_path / "shots"
    assert run_cli("simulate", "--config", str(cfg_path), "--out", str(shots_dir)) == 0
    out_dir = tmp_path / "results"
    assert run_cli("analyze", "insep", "--in", str(shots_dir),
                   "--out", str(out_dir)) == 0
    payload = json.loads((out_dir / "insep_results.json").read_text())
    assert 0.0 < payload["lambda_min"] < 2.5
    assert (out_dir / "inseparability.csv").exists()
