"""Domain types, configuration and trace persistence shared by all modules.

Units follow the lab conventions used throughout the package: times in
microseconds, frequencies in MHz (detunings in the decay module are in Hz/kHz
where noted), quadratures dimensionless with vacuum variance 1 per quadrature
after demodulation and calibration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

TRANSITION_LABELS = ("pi_i", "ASE", "pi_1", "pi_2", "RASE")
WINDOW_KINDS = ("ASE", "RASE", "vacuum", "reference", "input", "echo")

DEFAULT_SAMPLE_RATE = 100.0  # samples per microsecond


class ValidationError(ValueError):
    """Raised when a domain object violates one of its invariants."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValidationError(msg)


@dataclass(frozen=True)
class Transition:
    """One optical transition of the level scheme.

    ``rel_oscillator_strength`` is the strength as a fraction of the strongest
    (ASE) transition; ``freq_offset`` is in MHz relative to the 194918 GHz
    reference.
    """

    label: str
    rel_oscillator_strength: float
    freq_offset: float

    def __post_init__(self) -> None:
        _require(self.label in TRANSITION_LABELS, f"unknown transition label {self.label!r}")
        _require(
            0.0 < self.rel_oscillator_strength <= 1.0,
            f"rel_oscillator_strength must be in (0, 1], got {self.rel_oscillator_strength}",
        )
        _require(np.isfinite(self.freq_offset), "freq_offset must be finite")


@dataclass(frozen=True)
class LevelScheme:
    """The five transitions used by the protocol plus the optical linewidth."""

    transitions: tuple[Transition, ...]
    optical_inhomogeneous_linewidth: float = 150.0  # MHz

    def __post_init__(self) -> None:
        labels = [t.label for t in self.transitions]
        _require(len(self.transitions) == 5, "scheme needs exactly 5 transitions")
        _require(sorted(labels) == sorted(TRANSITION_LABELS), "scheme needs one of each label")
        offsets = np.array([t.freq_offset for t in self.transitions])
        diffs = np.abs(offsets[:, None] - offsets[None, :])
        _require(float(np.min(diffs[diffs > 0], initial=np.inf)) > 0.0 and
                 len(set(offsets.tolist())) == 5, "freq offsets must be pairwise distinct")
        strengths = [t.rel_oscillator_strength for t in self.transitions]
        strongest = self.transitions[int(np.argmax(strengths))]
        _require(strongest.label == "ASE" and strongest.rel_oscillator_strength == 1.0,
                 "ASE must be the unique strongest transition, normalized to 1.0")
        _require(self.optical_inhomogeneous_linewidth > 0, "linewidth must be positive")

    def transition(self, label: str) -> Transition:
        for t in self.transitions:
            if t.label == label:
                return t
        raise KeyError(label)


def default_level_scheme() -> LevelScheme:
    """Level scheme of the erbium site used here (strengths normalized to ASE).

    Raw relative strengths in percent are 3.2 (pi_i), 89.6 (ASE), 7.3 (pi_1),
    7.0 (pi_2) and 81.7 (RASE); offsets in MHz from the 194918 GHz reference.
    """
    raw = {
        "pi_i": (3.2, -430.36),
        "ASE": (89.6, 363.75),
        "pi_1": (7.3, -538.14),
        "pi_2": (7.0, 974.97),
        "RASE": (81.7, 268.33),
    }
    ase_strength = raw["ASE"][0]
    transitions = tuple(
        Transition(label, strength / ase_strength, offset)
        for label, (strength, offset) in raw.items()
    )
    return LevelScheme(transitions=transitions)


@dataclass(frozen=True)
class WindowSpec:
    """An annotated analysis window on a time trace (times in microseconds)."""

    kind: str
    start: float
    length: float
    ref_freq: float | None = None  # MHz, reference windows only

    def __post_init__(self) -> None:
        _require(self.kind in WINDOW_KINDS, f"unknown window kind {self.kind!r}")
        _require(self.length > 0, "window length must be positive")
        if self.kind == "reference":
            _require(self.ref_freq is not None, "reference windows need a ref_freq")
        else:
            _require(self.ref_freq is None, f"{self.kind} windows must not carry a ref_freq")

    @property
    def end(self) -> float:
        return self.start + self.length


@dataclass(frozen=True)
class TimeTrace:
    """A complex-envelope IQ record at fixed sample rate.

    ``samples`` hold the complex envelope relative to the heterodyne carrier
    ``het_freq`` (MHz); quadrature units are such that the vacuum variance is
    1 per quadrature after demodulation and calibration.
    """

    sample_rate: float  # samples / us
    samples: np.ndarray
    het_freq: float = 13.0
    windows: tuple[WindowSpec, ...] = ()
    seed: int = 0

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.complex128)
        object.__setattr__(self, "samples", samples)
        _require(self.sample_rate > 0, "sample_rate must be positive")
        _require(samples.ndim == 1 and samples.size > 0, "samples must be a non-empty 1-d array")
        for w in self.windows:
            _require(
                w.start >= 0 and w.end <= self.duration + 1e-9,
                f"window {w.kind} [{w.start}, {w.end}] exceeds trace duration {self.duration}",
            )

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate

    def window_slice(self, window: WindowSpec) -> slice:
        i0 = int(round(window.start * self.sample_rate))
        i1 = int(round(window.end * self.sample_rate))
        return slice(i0, i1)

    def window_samples(self, window: WindowSpec) -> np.ndarray:
        return self.samples[self.window_slice(window)]

    def windows_of(self, kind: str) -> tuple[WindowSpec, ...]:
        return tuple(w for w in self.windows if w.kind == kind)

    def with_samples(self, samples: np.ndarray, **changes) -> "TimeTrace":
        return replace(self, samples=np.asarray(samples, dtype=np.complex128), **changes)


@dataclass(frozen=True)
class LossBudget:
    """Passive losses between crystal and detector, as power loss fractions."""

    cryostat_window_loss: float = 0.24
    heterodyne_bs_loss: float = 0.50
    detector_qe_loss: float = 0.20

    def __post_init__(self) -> None:
        for name in ("cryostat_window_loss", "heterodyne_bs_loss", "detector_qe_loss"):
            value = getattr(self, name)
            _require(0.0 <= value < 1.0, f"{name} must be in [0, 1), got {value}")

    @property
    def transmission(self) -> float:
        """Total power transmission l = prod(1 - loss_i)."""
        return (
            (1.0 - self.cryostat_window_loss)
            * (1.0 - self.heterodyne_bs_loss)
            * (1.0 - self.detector_qe_loss)
        )


@dataclass(frozen=True)
class DetectionConfig:
    """Heterodyne detection and phase-reference settings."""

    het_freq: float = 13.0  # MHz
    ref_freqs: tuple[float, ...] = (8.0, -12.0, 15.0)  # MHz
    lpf_cutoff: float = 280.0  # kHz
    trigger_jitter_max: float = 0.05  # us
    interferometer_phase_drift_std: float = 0.5  # rad / shot

    def __post_init__(self) -> None:
        freqs = (self.het_freq, *self.ref_freqs)
        _require(len(set(freqs)) == len(freqs), "het_freq and ref_freqs must be distinct")
        _require(len(self.ref_freqs) >= 2, "need >= 2 reference freqs to solve jitter + phase")
        _require(self.lpf_cutoff > 0, "lpf_cutoff must be positive")
        _require(self.trigger_jitter_max >= 0, "trigger_jitter_max must be >= 0")
        _require(self.interferometer_phase_drift_std >= 0, "phase drift std must be >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one simulated run."""

    scheme: LevelScheme = field(default_factory=default_level_scheme)
    t_a: float = 10.0  # us
    t_b: float = 0.1  # us
    gain_db: float = 7.0  # power dB on the ASE transition
    write_time_T: float = 157.8  # us
    storage_envelope: object | None = None  # DecayFit, optional
    losses: LossBudget = field(default_factory=LossBudget)
    detection: DetectionConfig = field(default_factory=DetectionConfig)
    n_shots: int = 500
    base_seed: int = 0

    def __post_init__(self) -> None:
        _require(self.t_a > 0, "t_a must be positive")
        _require(self.t_b >= 0, "t_b must be >= 0")
        _require(self.gain_db >= 0, "gain_db must be >= 0")
        _require(self.write_time_T > 0, "write_time_T must be positive")
        _require(self.n_shots >= 1, "n_shots must be >= 1")


def shot_seed(base_seed: int, shot_index: int) -> np.random.SeedSequence:
    """Deterministic per-shot seed so any shot is reproducible in isolation."""
    return np.random.SeedSequence(entropy=base_seed, spawn_key=(shot_index,))


def shot_rng(base_seed: int, shot_index: int) -> np.random.Generator:
    return np.random.default_rng(shot_seed(base_seed, shot_index))


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def _window_to_dict(w: WindowSpec) -> dict:
    d = {"kind": w.kind, "start": w.start, "length": w.length}
    if w.ref_freq is not None:
        d["ref_freq"] = w.ref_freq
    return d


def _window_from_dict(d: dict) -> WindowSpec:
    allowed = {"kind", "start", "length", "ref_freq"}
    unknown = set(d) - allowed
    _require(not unknown, f"unknown window fields: {sorted(unknown)}")
    try:
        return WindowSpec(
            kind=d["kind"],
            start=float(d["start"]),
            length=float(d["length"]),
            ref_freq=float(d["ref_freq"]) if "ref_freq" in d else None,
        )
    except KeyError as exc:
        raise ValidationError(f"window missing field {exc.args[0]!r}") from exc


def save_trace(trace: TimeTrace, path: str | Path) -> None:
    """Write ``path`` (CSV: t_us,i,q) plus a JSON metadata sidecar."""
    path = Path(path)
    t = trace.times
    data = np.column_stack([t, trace.samples.real, trace.samples.imag])
    header = "t_us,i,q"
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")
    meta = {
        "sample_rate": trace.sample_rate,
        "het_freq": trace.het_freq,
        "seed": trace.seed,
        "n_samples": int(trace.samples.size),
        "windows": [_window_to_dict(w) for w in trace.windows],
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True))


def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_suffix(path.suffix + ".json")


def load_trace(path: str | Path) -> TimeTrace:
    """Read a trace written by :func:`save_trace`; bit-exact round trip."""
    path = Path(path)
    meta_path = sidecar_path(path)
    if not meta_path.exists():
        raise ValidationError(f"missing metadata sidecar {meta_path}")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed sidecar {meta_path}: {exc}") from exc
    for key in ("sample_rate", "het_freq", "seed", "n_samples", "windows"):
        if key not in meta:
            raise ValidationError(f"sidecar missing field {key!r}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 3:
        raise ValidationError(f"trace CSV must have columns t_us,i,q, got {data.shape[1]} columns")
    if data.shape[0] != int(meta["n_samples"]):
        raise ValidationError(
            f"n_samples mismatch: sidecar says {meta['n_samples']}, CSV has {data.shape[0]}"
        )
    samples = data[:, 1] + 1j * data[:, 2]
    return TimeTrace(
        sample_rate=float(meta["sample_rate"]),
        samples=samples,
        het_freq=float(meta["het_freq"]),
        windows=tuple(_window_from_dict(w) for w in meta["windows"]),
        seed=int(meta["seed"]),
    )


def save_shot_set(traces: Iterable[TimeTrace], directory: str | Path,
                  extra_meta: dict | None = None) -> Path:
    """Write a directory of shot traces plus a manifest.json listing them."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for k, trace in enumerate(traces):
        name = f"shot_{k:05d}.csv"
        save_trace(trace, directory / name)
        files.append(name)
    manifest = {"shots": files}
    if extra_meta:
        manifest.update(extra_meta)
    manifest_path = directory / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest_path


def load_shot_set(directory: str | Path) -> list[TimeTrace]:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise ValidationError(f"missing manifest.json in {directory}")
    manifest = json.loads(manifest_path.read_text())
    if "shots" not in manifest:
        raise ValidationError("manifest.json missing 'shots' field")
    return [load_trace(directory / name) for name in manifest["shots"]]


# ---------------------------------------------------------------------------
# config (de)serialization
# ---------------------------------------------------------------------------

def config_to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "scheme": {
            "transitions": [
                {
                    "label": t.label,
                    "rel_oscillator_strength": t.rel_oscillator_strength,
                    "freq_offset": t.freq_offset,
                }
                for t in cfg.scheme.transitions
            ],
            "optical_inhomogeneous_linewidth": cfg.scheme.optical_inhomogeneous_linewidth,
        },
        "t_a": cfg.t_a,
        "t_b": cfg.t_b,
        "gain_db": cfg.gain_db,
        "write_time_T": cfg.write_time_T,
        "losses": {
            "cryostat_window_loss": cfg.losses.cryostat_window_loss,
            "heterodyne_bs_loss": cfg.losses.heterodyne_bs_loss,
            "detector_qe_loss": cfg.losses.detector_qe_loss,
        },
        "detection": {
            "het_freq": cfg.detection.het_freq,
            "ref_freqs": list(cfg.detection.ref_freqs),
            "lpf_cutoff": cfg.detection.lpf_cutoff,
            "trigger_jitter_max": cfg.detection.trigger_jitter_max,
            "interferometer_phase_drift_std": cfg.detection.interferometer_phase_drift_std,
        },
        "n_shots": cfg.n_shots,
        "base_seed": cfg.base_seed,
    }


def _check_keys(d: dict, allowed: set[str], ctx: str) -> None:
    unknown = set(d) - allowed
    _require(not unknown, f"unknown {ctx} keys: {sorted(unknown)}")


def config_from_dict(d: dict) -> ExperimentConfig:
    _require(isinstance(d, dict), "config must be a JSON object")
    _check_keys(d, {"scheme", "t_a", "t_b", "gain_db", "write_time_T", "losses",
                    "detection", "n_shots", "base_seed"}, "config")
    scheme = default_level_scheme()
    if "scheme" in d:
        sd = d["scheme"]
        _check_keys(sd, {"transitions", "optical_inhomogeneous_linewidth"}, "scheme")
        transitions = tuple(
            Transition(t["label"], float(t["rel_oscillator_strength"]), float(t["freq_offset"]))
            for t in sd["transitions"]
        )
        scheme = LevelScheme(
            transitions=transitions,
            optical_inhomogeneous_linewidth=float(
                sd.get("optical_inhomogeneous_linewidth", 150.0)
            ),
        )
    losses = LossBudget()
    if "losses" in d:
        ld = d["losses"]
        _check_keys(ld, {"cryostat_window_loss", "heterodyne_bs_loss", "detector_qe_loss"},
                    "losses")
        losses = LossBudget(**{k: float(v) for k, v in ld.items()})
    detection = DetectionConfig()
    if "detection" in d:
        dd = dict(d["detection"])
        _check_keys(dd, {"het_freq", "ref_freqs", "lpf_cutoff", "trigger_jitter_max",
                         "interferometer_phase_drift_std"}, "detection")
        if "ref_freqs" in dd:
            dd["ref_freqs"] = tuple(float(f) for f in dd["ref_freqs"])
        detection = DetectionConfig(**dd)
    kwargs = {}
    for key in ("t_a", "t_b", "gain_db", "write_time_T"):
        if key in d:
            kwargs[key] = float(d[key])
    for key in ("n_shots", "base_seed"):
        if key in d:
            kwargs[key] = int(d[key])
    return ExperimentConfig(scheme=scheme, losses=losses, detection=detection, **kwargs)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed config {path}: {exc}") from exc
    return config_from_dict(raw)


def save_config(cfg: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True))
