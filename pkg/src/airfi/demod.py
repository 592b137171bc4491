"""OOK demodulation over power-vs-time series.

A receiver turns its input into a ``SampleSeries`` of power readings:
IQ streams go through windowed Welch estimates of the tone bin
(``power_series``), spectral-scan frames are read bin-wise
(``fft_bin_series``). From there the path is shared: find the 10101010
enable sequence by normalized correlation, derive a slicing threshold from
it, slice bit slots, and scan the bits for valid frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel_sim import FftFrame, FftFrames, IqStream, N_BINS, as_frames
from .codec import FRAME_BITS, PREAMBLE_BITS, DecodeError, Packet, decode_frame

ENABLE_SEQUENCE = PREAMBLE_BITS
DEFAULT_CORR_THRESH = 0.7
# offsets whose correlation is this close to the best one count as ties
DEFAULT_TIE_TOLERANCE = 0.05


@dataclass(frozen=True)
class DemodConfig:
    sample_rate_hz: float
    bit_time_ms: float
    window_size: int
    buffer_size: int | None = None
    freq_offset_hz: float = 0.0
    corr_thresh: float = DEFAULT_CORR_THRESH
    welch_segment: int | None = None
    welch_overlap: float = 0.5
    tie_tolerance: float = DEFAULT_TIE_TOLERANCE

    def __post_init__(self) -> None:
        if self.window_size < 1:
            raise ValueError("window_size must be positive")
        if self.buffer_size is None:
            object.__setattr__(self, "buffer_size", self.window_size * 64)
        if self.welch_segment is None:
            object.__setattr__(self, "welch_segment", max(1, self.window_size // 8))
        if self.window_size > self.buffer_size:
            raise ValueError("window_size must not exceed buffer_size")
        if self.window_size > self.samples_per_bit / 4 + 1e-9:
            raise ValueError("need at least 4 analysis windows per bit")
        if not 0 < self.corr_thresh < 1:
            raise ValueError("corr_thresh must lie in (0, 1)")
        if not 1 <= self.welch_segment <= self.window_size:
            raise ValueError("welch_segment must be in [1, window_size]")
        if not 0 <= self.welch_overlap < 1:
            raise ValueError("welch_overlap must lie in [0, 1)")

    @property
    def samples_per_bit(self) -> float:
        return self.bit_time_ms * self.sample_rate_hz / 1000.0

    @classmethod
    def for_stream(
        cls,
        stream: IqStream,
        carrier_mhz: float,
        bit_time_ms: float,
        windows_per_bit: int = 4,
        **kw,
    ) -> "DemodConfig":
        spb = bit_time_ms * stream.sample_rate_hz / 1000.0
        window = int(spb // windows_per_bit)
        return cls(
            sample_rate_hz=stream.sample_rate_hz,
            bit_time_ms=bit_time_ms,
            window_size=window,
            freq_offset_hz=(carrier_mhz - stream.center_freq_mhz) * 1e6,
            **kw,
        )


@dataclass(frozen=True)
class SampleSeries:
    """Power readings; ``t`` in seconds, strictly increasing."""

    t: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("t and v must be 1-D and equally long")
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if np.any(v < 0):
            raise ValueError("power values must be non-negative")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "v", v)

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, sl: slice) -> "SampleSeries":
        return SampleSeries(self.t[sl], self.v[sl])

    @property
    def period(self) -> float:
        if len(self.t) < 2:
            return math.inf
        return float(np.median(np.diff(self.t)))

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.t.tolist(), self.v.tolist()))


@dataclass(frozen=True)
class EnableDetection:
    found: bool
    threshold: float | None = None
    offset_index: int = 0
    correlation: float = 0.0

    def __post_init__(self) -> None:
        if self.found != (self.threshold is not None):
            raise ValueError("threshold is defined exactly when the sequence is found")


# --- spectral estimation ----------------------------------------------------

def hann(n: int) -> np.ndarray:
    """Periodic Hann taper."""
    return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)


def welch(
    x: np.ndarray, nperseg: int, overlap: float = 0.5, fs: float = 1.0
) -> np.ndarray:
    """Two-sided averaged periodogram (density scaling, FFT bin order).

    Works on the last axis, so a stack of windows is estimated in one call.
    Segments that do not fit completely are dropped.
    """
    x = np.asarray(x)
    n = x.shape[-1]
    if n < nperseg:
        raise ValueError(f"input of {n} samples is shorter than one {nperseg}-sample segment")
    step = nperseg - int(math.floor(nperseg * overlap))
    w = hann(nperseg)
    segs = np.lib.stride_tricks.sliding_window_view(x, nperseg, axis=-1)[..., ::step, :]
    spec = np.fft.fft(segs * w, axis=-1)
    p = np.mean(spec.real**2 + spec.imag**2, axis=-2)
    return p / (fs * np.sum(w**2))


def welch_psd(window: np.ndarray, cfg: DemodConfig) -> np.ndarray:
    window = np.asarray(window)
    if window.shape[-1] != cfg.window_size:
        raise ValueError(f"window must hold {cfg.window_size} samples")
    return welch(window, cfg.welch_segment, cfg.welch_overlap, cfg.sample_rate_hz)


def power_series(stream: IqStream, cfg: DemodConfig) -> SampleSeries:
    """One reading per analysis window: Welch power at the tone bin.

    The stream is mixed down by ``freq_offset_hz`` first, so the tone sits
    in bin 0. Input is consumed ``buffer_size`` samples at a time; a partial
    trailing window is dropped.
    """
    x = np.asarray(stream.samples)
    fs = stream.sample_rate_hz
    win = cfg.window_size
    per_buffer = max(win, (cfg.buffer_size // win) * win)
    values = []
    for start in range(0, len(x) - win + 1, per_buffer):
        chunk = x[start : start + per_buffer]
        n_win = len(chunk) // win
        idx = start + np.arange(n_win * win)
        mix = np.exp(-2j * np.pi * cfg.freq_offset_hz * idx / fs)
        windows = (chunk[: n_win * win] * mix).reshape(n_win, win)
        values.append(welch_psd(windows, cfg)[:, 0])
    v = np.concatenate(values) if values else np.zeros(0)
    t = np.arange(len(v)) * win / fs
    return SampleSeries(t, v)


def fft_bin_series(frames: FftFrames | Sequence[FftFrame], bin: int) -> SampleSeries:
    if not 0 <= bin < N_BINS:
        raise ValueError(f"bin must be in [0, {N_BINS})")
    frames = as_frames(frames)
    return SampleSeries(frames.timestamps_ns / 1e9, frames.bins[:, bin])


# --- enable-sequence detection ----------------------------------------------

def enable_template(samples_per_bit: float) -> np.ndarray:
    length = int(round(len(ENABLE_SEQUENCE) * samples_per_bit))
    slot = np.minimum(((np.arange(length) + 0.5) / samples_per_bit).astype(int), 7)
    return np.asarray(ENABLE_SEQUENCE, dtype=float)[slot]


def enable_correlation(v: np.ndarray, template: np.ndarray) -> np.ndarray:
    """Pearson correlation of the template against every full-length offset."""
    v = np.asarray(v, dtype=float)
    L = len(template)
    if len(v) < L:
        return np.zeros(0)
    tc = template - template.mean()
    v0 = v - v.mean()
    num = np.correlate(v0, tc, mode="valid")
    c1 = np.concatenate(([0.0], np.cumsum(v0)))
    c2 = np.concatenate(([0.0], np.cumsum(v0 * v0)))
    s1 = c1[L:] - c1[:-L]
    s2 = c2[L:] - c2[:-L]
    ss = np.maximum(s2 - s1 * s1 / L, 0.0)
    den = np.sqrt(ss) * np.linalg.norm(tc)
    scale = max(float(np.max(np.abs(v0))), 1e-300)
    flat = ss <= 1e-18 * L * scale * scale
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=~flat)
    return out


def detect_enable(
    series: SampleSeries,
    bit_time_ms: float,
    corr_thresh: float = DEFAULT_CORR_THRESH,
    tie_tolerance: float = DEFAULT_TIE_TOLERANCE,
) -> EnableDetection:
    """Locate the first 10101010 enable sequence in a power series.

    Mirrors a streaming receiver: the head of the series is tested and
    dropped one sample at a time until its correlation with the ideal
    enable waveform reaches ``corr_thresh``; the best offset is then sought
    within one enable-sequence length of that point, preferring the earliest
    offset among near-ties. A head is only tested while at least two
    enable-sequence lengths of data remain behind it. The threshold is the
    midpoint of the mean ON and mean OFF readings inside the locked span.
    """
    if len(series) < 2:
        return EnableDetection(False)
    spb = bit_time_ms / 1000.0 / series.period
    template = enable_template(spb)
    L = len(template)
    n_heads = testable_heads(len(series), spb)
    if n_heads <= 0 or L < 2:
        return EnableDetection(False)
    corr = enable_correlation(series.v, template)
    hits = np.flatnonzero(corr[:n_heads] >= corr_thresh)
    if len(hits) == 0:
        return EnableDetection(False)
    first = int(hits[0])
    window = corr[first : first + L + 1]
    best = float(window.max())
    offset = first + int(np.flatnonzero(window >= best - tie_tolerance)[0])
    span = series.v[offset : offset + L]
    on = span[template == 1]
    off = span[template == 0]
    thresh = 0.5 * (float(on.mean()) + float(off.mean()))
    return EnableDetection(True, thresh, offset, float(corr[offset]))


def testable_heads(n_samples: int, samples_per_bit: float) -> int:
    """Number of leading offsets with two enable-sequence lengths behind them."""
    need = 2 * len(ENABLE_SEQUENCE) * samples_per_bit
    return max(0, int(math.floor(n_samples - need + 1e-9)) + 1)


@dataclass(frozen=True)
class SlicedBits:
    bits: list[int]
    underrun: int = 0  # requested slots that had no samples

    @property
    def complete(self) -> bool:
        return self.underrun == 0


def slice_bits(
    series: SampleSeries, det: EnableDetection, bit_time_ms: float, n_bits: int
) -> SlicedBits:
    """Decide bit slots from ``det.offset_index`` onward by slot-mean power."""
    if not det.found:
        raise ValueError("cannot slice without a detected enable sequence")
    if n_bits <= 0:
        return SlicedBits([])
    t = series.t[det.offset_index :]
    v = series.v[det.offset_index :]
    if len(t) == 0:
        return SlicedBits([], n_bits)
    dt = series.period if len(series) > 1 else bit_time_ms / 1000.0
    bt = bit_time_ms / 1000.0
    slot = np.floor((t - t[0] + dt / 2) / bt).astype(np.int64)
    # a slot is usable only when the series reaches past its end
    last_full = int(np.floor((t[-1] - t[0] + dt * 1.5) / bt + 1e-9))
    n_ok = min(n_bits, last_full)
    keep = slot < n_ok
    sums = np.bincount(slot[keep], weights=v[keep], minlength=n_ok)
    counts = np.bincount(slot[keep], minlength=n_ok)
    bits = [int(c > 0 and s / c > det.threshold) for s, c in zip(sums, counts)]
    return SlicedBits(bits, n_bits - n_ok)


# --- framing ------------------------------------------------------------------

def recover_packets(bits: Sequence[int]) -> list[Packet | DecodeError]:
    """Scan a bit stream for preambles and decode every aligned candidate.

    Accepted frames are skipped over whole; after a rejected candidate the
    scan resumes one bit later. Candidates cut off by the end of the stream
    are reported as Truncated.
    """
    bits = [int(b) for b in bits]
    out: list[Packet | DecodeError] = []
    pre = list(PREAMBLE_BITS)
    i = 0
    n = len(bits)
    while i + len(pre) <= n:
        if bits[i : i + len(pre)] != pre:
            i += 1
            continue
        try:
            out.append(decode_frame(bits[i : i + FRAME_BITS]))
            i += FRAME_BITS
        except DecodeError as err:
            out.append(err)
            i += 1
    return out


# --- full receive chain -------------------------------------------------------

@dataclass
class Lock:
    """One acquisition: where the enable sequence was found and what followed."""

    t_s: float
    index: int
    threshold: float
    correlation: float
    bits: list[int]


@dataclass
class DemodResult:
    locks: list[Lock] = field(default_factory=list)

    @property
    def bits(self) -> list[int]:
        return [b for lk in self.locks for b in lk.bits]

    @property
    def results(self) -> list[Packet | DecodeError]:
        out: list[Packet | DecodeError] = []
        for lk in self.locks:
            out.extend(recover_packets(lk.bits))
        return out

    @property
    def packets(self) -> list[Packet]:
        return [r for r in self.results if isinstance(r, Packet)]

    @property
    def errors(self) -> list[DecodeError]:
        return [r for r in self.results if isinstance(r, DecodeError)]


def demodulate_series(
    series: SampleSeries,
    bit_time_ms: float,
    frame_bits: int = FRAME_BITS,
    corr_thresh: float = DEFAULT_CORR_THRESH,
    tie_tolerance: float = DEFAULT_TIE_TOLERANCE,
) -> DemodResult:
    """Acquire, slice one frame, and re-acquire until the series runs out.

    Re-acquiring per frame refreshes the slicing threshold for every packet
    instead of trusting the first preamble for the whole capture.
    """
    result = DemodResult()
    dt = series.period
    if not math.isfinite(dt):
        return result
    spb = bit_time_ms / 1000.0 / dt
    frame_len = max(1, int(round(frame_bits * spb)))
    # bounded look-ahead keeps re-acquisition linear in the capture length
    lookahead = int(math.ceil((frame_bits + 6 * len(ENABLE_SEQUENCE)) * spb))
    pos = 0
    while pos < len(series):
        chunk = series[pos : pos + lookahead]
        det = detect_enable(chunk, bit_time_ms, corr_thresh, tie_tolerance)
        if not det.found:
            heads = testable_heads(len(chunk), spb)
            if pos + lookahead >= len(series) or heads == 0:
                break
            pos += heads
            continue
        start = pos + det.offset_index
        sl = slice_bits(series[start:], EnableDetection(True, det.threshold, 0), bit_time_ms, frame_bits)
        result.locks.append(
            Lock(float(series.t[start]), start, det.threshold, det.correlation, sl.bits)
        )
        if not sl.complete:
            break
        pos = start + frame_len
    return result
