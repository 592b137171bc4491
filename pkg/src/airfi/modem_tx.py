"""On-off keyed transmit side: bit schedules, ideal envelopes, activity logs."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .codec import Frame

# bit/s presets; 16 bit/s is the faster triggering-mode workstation
BIT_RATE_PRESETS = (1, 10, 16, 100)


def bit_time_ms_for_rate(bit_rate_bps: float) -> float:
    if bit_rate_bps <= 0:
        raise ValueError("bit rate must be positive")
    return 1000.0 / bit_rate_bps


@dataclass(frozen=True)
class BitSchedule:
    bits: tuple[int, ...]
    bit_time_ms: float

    def __post_init__(self) -> None:
        if not self.bit_time_ms > 0:
            raise ValueError("bit_time_ms must be > 0")
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("schedule bits must be 0 or 1")

    @property
    def duration_ms(self) -> float:
        return len(self.bits) * self.bit_time_ms

    @property
    def duration_s(self) -> float:
        return self.duration_ms / 1000.0

    def __len__(self) -> int:
        return len(self.bits)


@dataclass(frozen=True)
class EmissionTimeline:
    sample_rate_hz: float
    envelope: np.ndarray

    @property
    def duration_s(self) -> float:
        return len(self.envelope) / self.sample_rate_hz

    def value_at(self, t_s: np.ndarray | float) -> np.ndarray:
        """Zero-order-hold lookup; times outside the timeline read as OFF."""
        t = np.asarray(t_s, dtype=float)
        idx = np.floor(t * self.sample_rate_hz + 1e-9).astype(np.int64)
        inside = (idx >= 0) & (idx < len(self.envelope))
        out = np.zeros(t.shape, dtype=float)
        out[inside] = self.envelope[idx[inside]]
        return out


def build_schedule(
    frames: Sequence[Frame | Sequence[int]],
    bit_time_ms: float,
    inter_frame_gap_bits: int = 0,
    lead_in_bits: int = 0,
    tail_bits: int = 0,
) -> BitSchedule:
    """Concatenate frames with zero-bit gaps between them.

    ``lead_in_bits``/``tail_bits`` add silence before the first and after the
    last frame; both default to 0.
    """
    if not bit_time_ms > 0:
        raise ValueError("bit_time_ms must be > 0")
    if inter_frame_gap_bits < 0 or lead_in_bits < 0 or tail_bits < 0:
        raise ValueError("gap lengths must be non-negative")
    bits: list[int] = []
    if frames:
        bits.extend([0] * lead_in_bits)
        for i, fr in enumerate(frames):
            if i:
                bits.extend([0] * inter_frame_gap_bits)
            bits.extend(int(b) for b in fr)
        bits.extend([0] * tail_bits)
    return BitSchedule(tuple(bits), bit_time_ms)


def samples_per_bit(bit_time_ms: float, sample_rate_hz: float) -> float:
    return bit_time_ms * sample_rate_hz / 1000.0


def simulate_emission(s: BitSchedule, sample_rate_hz: float) -> EmissionTimeline:
    """Rectangular OOK envelope: 1.0 while a '1' bit is on air, else 0.0.

    Bit k covers samples [round(k*spb), round((k+1)*spb)), so sample counts
    stay exact for integer samples-per-bit and never drift otherwise.
    """
    spb = samples_per_bit(s.bit_time_ms, sample_rate_hz)
    if spb < 2:
        raise ValueError(
            f"sample rate {sample_rate_hz} Hz gives {spb:.3g} samples per bit; need >= 2"
        )
    n_bits = len(s.bits)
    edges = np.round(np.arange(n_bits + 1) * spb).astype(np.int64)
    env = np.zeros(int(edges[-1]) if n_bits else 0, dtype=float)
    for k in np.flatnonzero(np.asarray(s.bits, dtype=np.int8)):
        env[edges[k] : edges[k + 1]] = 1.0
    return EmissionTimeline(float(sample_rate_hz), env)


ON = "ON"
OFF = "OFF"


@dataclass
class ActivityLog:
    """Measured ON/OFF transitions of a transmission, times relative to its start."""

    transitions: list[tuple[int, str]] = field(default_factory=list)
    worker_count: int = 1
    duration_ns: int = 0
    boundary_errors_ns: list[int] = field(default_factory=list)
    timing_violations: list[int] = field(default_factory=list)
    affinity: dict[int, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.worker_count < 1:
            raise ValueError("worker_count must be positive")
        self.check()

    def check(self) -> None:
        prev_t = None
        prev_s = None
        for t, state in self.transitions:
            if state not in (ON, OFF):
                raise ValueError(f"bad state {state!r}")
            if prev_t is not None and t <= prev_t:
                raise ValueError("transition timestamps must be strictly increasing")
            if prev_s is not None and state == prev_s:
                raise ValueError("transition states must alternate")
            prev_t, prev_s = t, state

    def to_jsonl(self) -> str:
        return "".join(json.dumps({"t_ns": int(t), "state": s}) + "\n" for t, s in self.transitions)

    def write_jsonl(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, lines: Iterable[str], worker_count: int = 1) -> "ActivityLog":
        transitions = []
        for line in lines:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            transitions.append((int(rec["t_ns"]), str(rec["state"])))
        duration = transitions[-1][0] if transitions else 0
        return cls(transitions, worker_count=worker_count, duration_ns=duration)

    @classmethod
    def read_jsonl(cls, path: str | Path, worker_count: int = 1) -> "ActivityLog":
        with open(path) as fh:
            return cls.from_jsonl(fh, worker_count=worker_count)


def measure_duty_cycle(
    log: ActivityLog, bit_time_ms: float, n_bits: int | None = None
) -> list[int]:
    """Recover bits from a log: 1 where the slot was ON for more than half its length.

    The state before the first transition is OFF. ``n_bits`` defaults to the
    number of whole slots covered by ``log.duration_ns``.
    """
    log.check()
    slot_ns = bit_time_ms * 1e6
    if n_bits is None:
        n_bits = int(math.floor(log.duration_ns / slot_ns + 0.5))
    if n_bits <= 0:
        return []
    horizon = n_bits * slot_ns
    # ON intervals clipped to the horizon
    intervals = []
    on_start = None
    for t, state in log.transitions:
        if state == ON:
            on_start = t
        elif on_start is not None:
            intervals.append((on_start, t))
            on_start = None
    if on_start is not None:
        intervals.append((on_start, max(horizon, log.duration_ns)))

    on_time = np.zeros(n_bits)
    for a, b in intervals:
        a = max(a, 0.0)
        b = min(b, horizon)
        if b <= a:
            continue
        first = int(a // slot_ns)
        last = min(int(math.ceil(b / slot_ns)), n_bits)
        for k in range(first, last):
            lo = max(a, k * slot_ns)
            hi = min(b, (k + 1) * slot_ns)
            if hi > lo:
                on_time[k] += hi - lo
    return [int(x > 0.5 * slot_ns) for x in on_time]
