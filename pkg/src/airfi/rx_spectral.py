"""Spectral-scan receiver: hunt for a transmission, then lock onto its channel.

Scanning mode sweeps a set of channels and scores each for on-off
activity; once one channel scores high for enough consecutive windows the
receiver switches to triggering mode on that channel. It falls back to
scanning when the demodulator stops seeing enable sequences.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping

import numpy as np

from .channel_sim import FftFrame, FftFrames, as_frames


class Mode(enum.Enum):
    SCANNING = "Scanning"
    TRIGGERING = "Triggering"


@dataclass(frozen=True)
class ReceiverConfig:
    detect_threshold: float = 3.0
    windows_required: int = 2
    loss_timeout_bits: float = 10.0


DEFAULT_RECEIVER = ReceiverConfig()


@dataclass(frozen=True)
class ReceiverState:
    mode: Mode = Mode.SCANNING
    locked_channel: int | None = None
    detection_score: float = 0.0
    streak: int = 0  # consecutive above-threshold scan windows

    def __post_init__(self) -> None:
        if (self.locked_channel is not None) != (self.mode is Mode.TRIGGERING):
            raise ValueError("a channel is locked exactly when triggering")
        if self.detection_score < 0:
            raise ValueError("detection_score must be non-negative")


def activity_score(max_magnitudes: np.ndarray) -> float | None:
    """95th percentile over median of per-frame peak magnitudes."""
    m = np.asarray(max_magnitudes, dtype=float)
    if len(m) == 0:
        return None
    p95 = float(np.percentile(m, 95))
    med = float(np.median(m))
    if med <= 0:
        return math.inf if p95 > 0 else 1.0
    return p95 / med


def scan_for_activity(
    frames: FftFrames | Iterable[FftFrame], window_s: float | None = None
) -> dict[int, float]:
    """Activity score per channel over the first ``window_s`` seconds of frames.

    Channels without frames in the window are left out rather than scored 0.
    """
    frames = as_frames(frames)
    if len(frames) == 0:
        return {}
    if window_s is not None:
        t0 = frames.timestamps_ns.min()
        frames = frames.select(frames.timestamps_ns < t0 + int(round(window_s * 1e9)))
    peaks = frames.max_magnitude
    scores = {}
    for c in np.unique(frames.channel_index):
        s = activity_score(peaks[frames.channel_index == c])
        if s is not None:
            scores[int(c)] = s
    return scores


def scan_windows(frames: FftFrames, window_s: float) -> Iterator[tuple[float, FftFrames]]:
    """Consecutive ``window_s`` slices of a frame run, with their end times."""
    if len(frames) == 0:
        return
    step = int(round(window_s * 1e9))
    t0 = int(frames.timestamps_ns.min())
    idx = (frames.timestamps_ns - t0) // step
    for k in range(int(idx.max()) + 1):
        yield (t0 + (k + 1) * step) / 1e9, frames.select(idx == k)


def step_state(
    state: ReceiverState,
    scores: Mapping[int, float] | None = None,
    signal_lost: bool = False,
    cfg: ReceiverConfig = DEFAULT_RECEIVER,
) -> ReceiverState:
    """Advance the receiver by one scan window or one demodulator report."""
    if state.mode is Mode.TRIGGERING:
        if signal_lost:
            return ReceiverState()
        return state
    if not scores:
        return replace(state, streak=0, detection_score=0.0)
    # highest score wins; lowest channel index breaks ties
    best = min(scores, key=lambda c: (-scores[c], c))
    score = scores[best]
    if not score > cfg.detect_threshold:
        return ReceiverState(detection_score=score)
    streak = state.streak + 1
    if streak >= cfg.windows_required:
        return ReceiverState(Mode.TRIGGERING, best, score, 0)
    return ReceiverState(Mode.SCANNING, None, score, streak)


def signal_lost(
    last_enable_s: float | None,
    now_s: float,
    bit_time_ms: float,
    cfg: ReceiverConfig = DEFAULT_RECEIVER,
) -> bool:
    """True once no enable sequence has been seen for the loss timeout."""
    if last_enable_s is None:
        return False
    return now_s - last_enable_s > cfg.loss_timeout_bits * bit_time_ms / 1000.0


@dataclass
class Transition:
    t_s: float
    old: Mode
    new: Mode
    channel: int | None

    def to_json(self) -> str:
        return json.dumps(
            {"t_s": self.t_s, "old": self.old.value, "new": self.new.value, "channel": self.channel}
        )


@dataclass
class Receiver:
    """State machine plus its transition log."""

    cfg: ReceiverConfig = DEFAULT_RECEIVER
    state: ReceiverState = field(default_factory=ReceiverState)
    transitions: list[Transition] = field(default_factory=list)

    def _record(self, t_s: float, new: ReceiverState) -> None:
        if new.mode is not self.state.mode:
            self.transitions.append(Transition(t_s, self.state.mode, new.mode, new.locked_channel))
        self.state = new

    def on_scan_window(self, t_s: float, scores: Mapping[int, float]) -> ReceiverState:
        self._record(t_s, step_state(self.state, scores, cfg=self.cfg))
        return self.state

    def on_signal_lost(self, t_s: float) -> ReceiverState:
        self._record(t_s, step_state(self.state, signal_lost=True, cfg=self.cfg))
        return self.state

    def transition_log(self) -> str:
        return "".join(t.to_json() + "\n" for t in self.transitions)


def acquire(
    frames: FftFrames | Iterable[FftFrame],
    window_s: float,
    cfg: ReceiverConfig = DEFAULT_RECEIVER,
) -> tuple[Receiver, int | None]:
    """Feed scanning-mode frames window by window until the receiver locks.

    Returns the receiver and the number of windows consumed, or None if it
    never locked.
    """
    rx = Receiver(cfg)
    for n, (t_end, chunk) in enumerate(scan_windows(as_frames(frames), window_s), 1):
        rx.on_scan_window(t_end, scan_for_activity(chunk))
        if rx.state.mode is Mode.TRIGGERING:
            return rx, n
    return rx, None
