"""Protocol pulse sequences, memory bandwidth and mode-capacity figures."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import LevelScheme, ValidationError, _require

DEFAULT_PULSE_DURATION = 1.0  # us, temporally square pulses
WEAK_PROBE_MAX_AREA = 1e-3  # fraction of a pi pulse; probing must stay linear
MIN_T_A = 1.0  # us; >10 us was used experimentally to expose an ASE window


class OverdriveError(ValidationError):
    """Input pulse too strong for the weak-probe (linear) regime."""


@dataclass(frozen=True)
class PulseEvent:
    transition: str  # transition label
    start: float  # us
    duration: float  # us
    area: float  # fraction of pi, (0, 1]
    phase: float = 0.0  # rad

    def __post_init__(self) -> None:
        _require(self.duration > 0, "pulse duration must be positive")
        _require(0.0 < self.area <= 1.0, f"pulse area must be in (0, 1], got {self.area}")

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class PulseSequence:
    events: tuple[PulseEvent, ...]
    t_a: float
    t_b: float
    kind: str  # RASE | I4LE | NLPE

    def __post_init__(self) -> None:
        _require(self.kind in ("RASE", "I4LE", "NLPE"), f"unknown sequence kind {self.kind!r}")
        _require(self.t_b >= 0, "t_b must be >= 0")
        ordered = sorted(self.events, key=lambda e: e.start)
        _require(tuple(ordered) == self.events, "events must be time ordered")
        for a, b in zip(self.events, self.events[1:]):
            _require(a.end <= b.start + 1e-12, f"events overlap: {a.transition} and {b.transition}")
        self._check_kind()

    def _check_kind(self) -> None:
        labels = [e.transition for e in self.events]
        if self.kind == "RASE":
            _require(labels == ["pi_i", "pi_1", "pi_2"], "RASE order must be (pi_i, pi_1, pi_2)")
        elif self.kind == "I4LE":
            _require(labels == ["pi_i", "ASE", "pi_1", "pi_2"],
                     "I4LE order must be (pi_i, input, pi_1, pi_2)")
            inp, pi1 = self.event("ASE"), self.event("pi_1")
            _require(abs((pi1.start - inp.end) - self.t_a) < 1e-9,
                     "pi_1.start - input.end must equal t_a")
        else:  # NLPE
            _require("pi_i" not in labels, "NLPE must not contain pi_i")
            rephasing = [l for l in labels if l in ("pi_1", "pi_2")]
            _require(rephasing == ["pi_1", "pi_2", "pi_2", "pi_1"],
                     "NLPE rephasing order must be (pi_1, pi_2, pi_2, pi_1)")
        if self.kind in ("RASE", "I4LE"):
            pi1, pi2 = self.event("pi_1"), self.event("pi_2")
            _require(abs((pi2.start - pi1.end) - self.t_b) < 1e-9,
                     "pi_2.start - pi_1.end must equal t_b")

    def event(self, transition: str, index: int = 0) -> PulseEvent:
        matches = [e for e in self.events if e.transition == transition]
        if not matches:
            raise KeyError(transition)
        return matches[index]

    @property
    def echo_delay(self) -> float:
        """Delay between input and echo, 2*t_a + t_b."""
        return 2.0 * self.t_a + self.t_b


def build_rase(t_a: float, t_b: float, inversion_area: float = 1.0,
               pulse_duration: float = DEFAULT_PULSE_DURATION) -> PulseSequence:
    """RASE sequence (pi_i, pi_1, pi_2); gain is encoded by ``inversion_area``."""
    _require(t_a > 0, f"t_a must be positive, got {t_a}")
    _require(t_b >= 0, f"t_b must be >= 0, got {t_b}")
    pi_i = PulseEvent("pi_i", 0.0, pulse_duration, inversion_area)
    pi_1 = PulseEvent("pi_1", pi_i.end + t_a, pulse_duration, 1.0)
    pi_2 = PulseEvent("pi_2", pi_1.end + t_b, pulse_duration, 1.0)
    return PulseSequence(events=(pi_i, pi_1, pi_2), t_a=t_a, t_b=t_b, kind="RASE")


def build_i4le(t_a: float, t_b: float, inversion_area: float = 1.0,
               input_area: float = WEAK_PROBE_MAX_AREA,
               pulse_duration: float = DEFAULT_PULSE_DURATION,
               allow_strong_input: bool = False) -> PulseSequence:
    """I4LE sequence: RASE plus a weak coherent input on the ASE transition.

    The input must stay far below a pi pulse for the probe to remain linear;
    exceeding ``WEAK_PROBE_MAX_AREA`` raises unless explicitly overridden.
    """
    _require(t_a > 0, f"t_a must be positive, got {t_a}")
    _require(t_b >= 0, f"t_b must be >= 0, got {t_b}")
    if input_area > WEAK_PROBE_MAX_AREA and not allow_strong_input:
        raise OverdriveError(
            f"input_area {input_area} over-drives the ensemble "
            f"(weak-probe threshold {WEAK_PROBE_MAX_AREA}); "
            "pass allow_strong_input=True to override"
        )
    pi_i = PulseEvent("pi_i", 0.0, pulse_duration, inversion_area)
    inp = PulseEvent("ASE", pi_i.end + 1.0, pulse_duration, input_area)
    pi_1 = PulseEvent("pi_1", inp.end + t_a, pulse_duration, 1.0)
    pi_2 = PulseEvent("pi_2", pi_1.end + t_b, pulse_duration, 1.0)
    return PulseSequence(events=(pi_i, inp, pi_1, pi_2), t_a=t_a, t_b=t_b, kind="I4LE")


def to_nlpe(seq: PulseSequence, rephasing_gap: float = 1.0) -> PulseSequence:
    """Transform a RASE/I4LE sequence into the read-write NLPE variant.

    Removes pi_i, keeps (or adds) the input, and doubles the rephasing pair to
    (pi_1, pi_2, pi_2, pi_1). Idempotent on NLPE sequences.
    """
    if seq.kind == "NLPE":
        return seq
    if seq.kind == "I4LE":
        inp = seq.event("ASE")
        dur = inp.duration
        area = inp.area
    else:
        dur = seq.event("pi_1").duration
        area = WEAK_PROBE_MAX_AREA
    inp = PulseEvent("ASE", 0.0, dur, area)
    pdur = seq.event("pi_1").duration
    pi_1a = PulseEvent("pi_1", inp.end + seq.t_a, pdur, 1.0)
    pi_2a = PulseEvent("pi_2", pi_1a.end + seq.t_b, pdur, 1.0)
    pi_2b = PulseEvent("pi_2", pi_2a.end + rephasing_gap, pdur, 1.0)
    pi_1b = PulseEvent("pi_1", pi_2b.end + seq.t_b, pdur, 1.0)
    return PulseSequence(events=(inp, pi_1a, pi_2a, pi_2b, pi_1b),
                         t_a=seq.t_a, t_b=seq.t_b, kind="NLPE")


def memory_bandwidth(scheme: LevelScheme) -> float:
    """Smallest transition-frequency split, capped at the inhomogeneous linewidth (MHz)."""
    offsets = [t.freq_offset for t in scheme.transitions]
    min_split = min(
        abs(a - b) for i, a in enumerate(offsets) for b in offsets[i + 1:]
    )
    return min(min_split, scheme.optical_inhomogeneous_linewidth)


def spectro_temporal_capacity(bandwidth: float, write_time: float,
                              strategy: str = "bt_half") -> int:
    """Spectro-temporal mode capacity for a bandwidth (MHz) and write time (us).

    The default ``bt_half`` strategy counts one complex mode per 2/B of
    duration, floor(B*T/2). Exposed as a named strategy so alternative
    counting conventions can be added without an API change.
    """
    _require(bandwidth > 0, f"bandwidth must be positive, got {bandwidth}")
    _require(write_time > 0, f"write_time must be positive, got {write_time}")
    if strategy == "bt_half":
        return int(math.floor(bandwidth * write_time / 2.0))
    raise ValidationError(f"unknown capacity strategy {strategy!r}")


def sequence_timeline(seq: PulseSequence, width: int = 72) -> str:
    """ASCII timeline of a pulse sequence (one char per time bin)."""
    total = max(e.end for e in seq.events)
    symbols = {"pi_i": "I", "pi_1": "1", "pi_2": "2", "ASE": "a", "RASE": "r"}
    line = ["-"] * width
    for e in seq.events:
        lo = int(e.start / total * (width - 1))
        hi = max(lo + 1, int(math.ceil(e.end / total * (width - 1))))
        for i in range(lo, min(hi, width)):
            line[i] = symbols.get(e.transition, "?")
    scale = f"0{'':{width - len(f'{total:.1f}') - 1}}{total:.1f} us"
    return "".join(line) + "\n" + scale
