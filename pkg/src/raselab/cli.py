"""Command-line entry point wiring configs, simulation, analysis and figure
reproduction. Exit codes: 0 success, 2 validation error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from dataclasses import replace as dc_replace
from pathlib import Path

import numpy as np

from . import __version__, analysis
from .core import (
    ExperimentConfig,
    ValidationError,
    config_to_dict,
    load_config,
    load_shot_set,
    save_shot_set,
)
from .decay import FieldProfile, fit_decay, gradient_lineshape
from .gain import efficiency_curve, gain_db_to_alpha_l, ledingham_efficiency
from .pipeline import preprocess_shot, thread_count
from .quantum import SynthesisSpec, build_timeline, synthesize_shot
from .reproduce import FIGURES, reproduce_figure
from .sequence import (
    build_i4le,
    build_rase,
    memory_bandwidth,
    sequence_timeline,
    spectro_temporal_capacity,
    to_nlpe,
)


@dataclass
class RunManifest:
    """Provenance record written next to every command's outputs."""

    command: str
    config_hash: str
    base_seed: int
    tool_version: str = __version__
    outputs: list[str] = field(default_factory=list)

    def write(self, directory: Path) -> Path:
        path = directory / "run_manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True))
        return path


def config_hash(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def derived_recall_efficiency(gain_db: float, bg: float = 0.02,
                              rephasing_efficiency: float = 0.82) -> float:
    """Recall efficiency implied by the gain and the default loss model."""
    alpha_l = gain_db_to_alpha_l(gain_db)
    return rephasing_efficiency * math.exp(-bg) * ledingham_efficiency(alpha_l)


def _cmd_sequence(args) -> int:
    if args.kind == "rase":
        seq = build_rase(args.t_a, args.t_b, args.inversion_area)
    elif args.kind == "i4le":
        seq = build_i4le(args.t_a, args.t_b, args.inversion_area, args.input_area)
    else:
        seq = to_nlpe(build_i4le(args.t_a, args.t_b, args.inversion_area,
                                 args.input_area))
    events = [
        {"transition": e.transition, "start": e.start, "duration": e.duration,
         "area": e.area, "phase": e.phase}
        for e in seq.events
    ]
    print(json.dumps({"kind": seq.kind, "t_a": seq.t_a, "t_b": seq.t_b,
                      "echo_delay": seq.echo_delay, "events": events},
                     indent=2, sort_keys=True))
    print(sequence_timeline(seq), file=sys.stderr)
    return 0


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.shots is not None:
        cfg = dc_replace(cfg, n_shots=args.shots)
    if args.seed is not None:
        cfg = dc_replace(cfg, base_seed=args.seed)
    out = Path(args.out)
    seq = build_rase(t_a=cfg.t_a, t_b=cfg.t_b)
    spec = SynthesisSpec(
        gain_db=cfg.gain_db,
        eta_recall=derived_recall_efficiency(cfg.gain_db),
        transmission=cfg.losses.transmission,
        write_time_T=cfg.write_time_T,
        storage_t_b=cfg.t_b,
    )
    window = min(13.2, cfg.t_a / 2.0)
    offset = max(min(10.0, cfg.t_a - window - 1.0), 0.5)
    timeline = build_timeline(seq, cfg.detection, window_length=window,
                              window_offset=offset)
    traces = (synthesize_shot(timeline, spec, cfg.detection, cfg.base_seed, k)
              for k in range(cfg.n_shots))
    manifest_meta = {"base_seed": cfg.base_seed,
                     "config_hash": config_hash(config_to_dict(cfg))}
    save_shot_set(traces, out, extra_meta=manifest_meta)
    manifest = RunManifest(command="simulate",
                           config_hash=manifest_meta["config_hash"],
                           base_seed=cfg.base_seed,
                           outputs=sorted(p.name for p in out.glob("*.csv")))
    manifest.write(out)
    print(f"wrote {cfg.n_shots} shots to {out}")
    return 0


def _parse_gains(spec: str) -> list[float]:
    if ":" in spec:
        parts = [float(x) for x in spec.split(":")]
        if len(parts) != 3:
            raise ValidationError("gain range must be start:stop:step")
        start, stop, step = parts
        return list(np.arange(start, stop + step / 2, step))
    return [float(x) for x in spec.split(",")]


def _cmd_eff_curve(args) -> int:
    gains = _parse_gains(args.gains)
    rows = efficiency_curve(gains, bg=args.bg, rephasing_efficiency=args.rephase,
                            threads=thread_count(args.threads))
    out = Path(args.out)
    data = np.array([[r["gain_db"], r["eff_mbe"], r["eff_ledingham"]] for r in rows])
    np.savetxt(out, data, delimiter=",", header="gain_db,eff_mbe,eff_ledingham",
               comments="", fmt="%.17g")
    manifest = RunManifest(
        command="eff-curve",
        config_hash=config_hash({"gains": gains, "bg": args.bg,
                                 "rephase": args.rephase}),
        base_seed=0, outputs=[out.name])
    manifest.write(out.parent if out.parent != Path("") else Path("."))
    print(f"wrote {out}")
    return 0


def _cmd_fit_decay(args) -> int:
    data = np.loadtxt(args.data, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 2:
        raise ValidationError("decay CSV must have columns delay_us,amplitude")
    gradient = None
    if args.field:
        raw = json.loads(Path(args.field).read_text())
        profile = FieldProfile(
            a=float(raw["a"]), b=float(raw["b"]), c=float(raw["c"]),
            crystal_extent=tuple(raw["crystal_extent"]),
            sensitivity_g=float(raw["sensitivity_g"]),
        )
        gradient = gradient_lineshape(profile)
    fit = fit_decay(data[:, 0], data[:, 1], gradient=gradient)
    payload = {
        "t_1e_us": fit.t_1e,
        "gaussian_fwhm_khz": fit.voigt.gaussian_fwhm,
        "lorentzian_fwhm_khz": fit.voigt.lorentzian_fwhm,
        "gradient_rms_hz": fit.gradient_contribution,
        "residual_rms": fit.residual_rms,
    }
    Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True))
    print(f"wrote {args.out}")
    return 0


def _load_and_preprocess(directory: str, cutoff_khz: float):
    traces = load_shot_set(directory)
    return [preprocess_shot(tr, cutoff_khz) for tr in traces]


def _cmd_analyze(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs: list[str] = []

    if args.what == "insep":
        shots = _load_and_preprocess(args.indir, args.cutoff)
        tuples = []
        vac_all = []
        for tr in shots:
            a = tr.window_samples(tr.windows_of("ASE")[0])
            r = tr.window_samples(tr.windows_of("RASE")[0])
            tuples.append(analysis.transform_frame_pairs(a, r)[::args.stride])
            vac_all.append(tr.window_samples(tr.windows_of("vacuum")[0])[::args.stride])
        vac = np.concatenate(vac_all)
        scale = 1.0 / math.sqrt(0.5 * float(np.var(vac.real) + np.var(vac.imag)))
        tuples = [t * scale for t in tuples]
        result = analysis.inseparability(tuples, seed=args.seed)
        payload = {
            "lambda_min": result.lambda_min, "b_min": result.b_min,
            "sigma": result.sigma_min, "certainty_sigma": result.certainty_sigma,
            "squeezing_db": analysis.squeezing_db(result.lambda_min),
        }
        np.savetxt(out / "inseparability.csv",
                   np.column_stack([result.b_grid, result.lam]),
                   delimiter=",", header="b,lambda", comments="", fmt="%.17g")
        outputs.append("inseparability.csv")
    elif args.what == "corr":
        shots = _load_and_preprocess(args.indir, args.cutoff)
        a_wins = [tr.window_samples(tr.windows_of("ASE")[0]) for tr in shots]
        r_wins = [tr.window_samples(tr.windows_of("RASE")[0]) for tr in shots]
        fs = shots[0].sample_rate
        auto_a = analysis.autocorrelate(a_wins, fs, kind="auto_A")
        cross = analysis.correlate(a_wins, r_wins, fs)
        payload = {
            "auto_A_fwhm_us": auto_a.fwhm,
            "cross_fwhm_us": cross.fwhm,
            "ratio_cross_over_auto": cross.peak / auto_a.peak,
        }
        np.savetxt(out / "correlations.csv",
                   np.column_stack([auto_a.lags, np.abs(auto_a.values),
                                    np.abs(cross.values)]),
                   delimiter=",", header="lag_us,auto_A,cross", comments="",
                   fmt="%.17g")
        outputs.append("correlations.csv")
    elif args.what == "multiplex":
        shots = _load_and_preprocess(args.indir, args.cutoff)
        n_modes = len(shots[0].windows_of("ASE"))
        a_modes = [[tr.window_samples(tr.windows_of("ASE")[m]) for tr in shots]
                   for m in range(n_modes)]
        r_modes = [[tr.window_samples(tr.windows_of("RASE")[m]) for tr in shots]
                   for m in range(n_modes)]
        mux = analysis.multiplex_analysis(a_modes, r_modes, shots[0].sample_rate)
        payload = {"n_modes": mux["n_modes"], "tbp": mux["tbp"]}
        nb = np.concatenate([mux["neighbor_cross"], [np.nan]])
        np.savetxt(out / "multiplex.csv",
                   np.column_stack([np.arange(1, n_modes + 1), mux["auto_A"],
                                    mux["cross"], nb]),
                   delimiter=",", header="mode,auto_A,cross,neighbor_cross",
                   comments="", fmt="%.17g")
        outputs.append("multiplex.csv")
    else:  # polarization
        if not args.orth:
            raise ValidationError("analyze polarization needs --orth <shot-set>")
        aligned = _load_and_preprocess(args.indir, args.cutoff)
        orth = _load_and_preprocess(args.orth, args.cutoff)
        payload = analysis.polarization_metrics(aligned, orth, seed=args.seed)

    results_path = out / f"{args.what}_results.json"
    results_path.write_text(json.dumps(payload, indent=2, sort_keys=True))
    outputs.append(results_path.name)
    RunManifest(command=f"analyze {args.what}",
                config_hash=config_hash({"in": str(args.indir),
                                         "cutoff": args.cutoff}),
                base_seed=args.seed, outputs=sorted(outputs)).write(out)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _cmd_capacity(args) -> int:
    from .core import default_level_scheme

    scheme = default_level_scheme()
    bandwidth = memory_bandwidth(scheme)
    capacity = spectro_temporal_capacity(bandwidth, args.write_time)
    print(json.dumps({"bandwidth_mhz": bandwidth,
                      "write_time_us": args.write_time,
                      "capacity_modes": capacity}, indent=2, sort_keys=True))
    return 0


def _cmd_reproduce(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = reproduce_figure(args.figure, out, shots=args.shots, seed=args.seed,
                              threads=thread_count(args.threads))
    manifest = RunManifest(
        command=f"reproduce {args.figure}",
        config_hash=config_hash({"figure": args.figure, "shots": args.shots,
                                 "seed": args.seed}),
        base_seed=args.seed if args.seed is not None else 7,
        outputs=sorted(p.name for p in out.glob(f"{args.figure}*")))
    manifest.write(out)
    print(json.dumps({"figure": args.figure, "results": result},
                     indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="raselab",
        description="Simulator and analysis workbench for the four-level "
                    "rephased-ASE quantum memory protocol.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    sq = sub.add_parser("sequence", help="print a pulse sequence")
    sq.add_argument("--kind", choices=["rase", "i4le", "nlpe"], default="rase")
    sq.add_argument("--t-a", dest="t_a", type=float, default=10.0)
    sq.add_argument("--t-b", dest="t_b", type=float, default=0.1)
    sq.add_argument("--inversion-area", type=float, default=1.0)
    sq.add_argument("--input-area", type=float, default=1e-3)
    sq.set_defaults(fn=_cmd_sequence)

    sim = sub.add_parser("simulate", help="synthesize a shot-set directory")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--shots", type=int, default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--threads", type=int, default=None)
    sim.set_defaults(fn=_cmd_simulate)

    eff = sub.add_parser("eff-curve", help="MBE + Ledingham efficiency scan")
    eff.add_argument("--gains", default="4:36:2", help="start:stop:step or list")
    eff.add_argument("--bg", type=float, default=0.02)
    eff.add_argument("--rephase", type=float, default=0.82)
    eff.add_argument("--out", required=True)
    eff.add_argument("--threads", type=int, default=None)
    eff.set_defaults(fn=_cmd_eff_curve)

    fd = sub.add_parser("fit-decay", help="fit a decay curve")
    fd.add_argument("--data", required=True, help="CSV: delay_us,amplitude")
    fd.add_argument("--field", default=None, help="field profile JSON")
    fd.add_argument("--out", required=True)
    fd.set_defaults(fn=_cmd_fit_decay)

    an = sub.add_parser("analyze", help="analyze a shot-set directory")
    an.add_argument("what", choices=["corr", "insep", "multiplex", "polarization"])
    an.add_argument("--in", dest="indir", required=True)
    an.add_argument("--orth", default=None, help="orthogonal set (polarization)")
    an.add_argument("--out", required=True)
    an.add_argument("--cutoff", type=float, default=280.0, help="LPF kHz")
    an.add_argument("--stride", type=int, default=16)
    an.add_argument("--seed", type=int, default=0)
    an.set_defaults(fn=_cmd_analyze)

    cap = sub.add_parser("capacity", help="memory bandwidth and mode capacity")
    cap.add_argument("--write-time", type=float, default=157.8)
    cap.set_defaults(fn=_cmd_capacity)

    rep = sub.add_parser("reproduce", help="reproduce a figure-level result")
    rep.add_argument("figure", choices=list(FIGURES))
    rep.add_argument("--out", required=True)
    rep.add_argument("--shots", type=int, default=None)
    rep.add_argument("--seed", type=int, default=None)
    rep.add_argument("--threads", type=int, default=None)
    rep.set_defaults(fn=_cmd_reproduce)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (ValidationError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
