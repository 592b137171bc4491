"""Synthetic RF channel for the memory-bus emission.

Two receiver views are produced from one emission timeline:

* an SDR-style complex baseband stream (``synthesize_iq``), where the SNR
  is tone power over noise power inside the signal bandwidth, and
* Atheros-style spectral-scan frames (``synthesize_fft_frames``): 56
  linear magnitudes ``|I|+|Q|`` per 20 MHz channel, where the SNR is tone
  power over noise power in the bin that holds the carrier.

Noise is circular complex AWGN. Everything is a pure function of the seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator, Literal, Sequence

import numpy as np

from .modem_tx import EmissionTimeline
from .wifi import channel as wifi_channel

N_BINS = 56
CHANNEL_SPAN_MHZ = 20.0
BIN_WIDTH_MHZ = CHANNEL_SPAN_MHZ / N_BINS
# receiver passband rolloff across a channel: -12 dB at the channel edge
EDGE_ROLLOFF_DB = 12.0

JAMMER_SNR_6_CORES_DB = 4.8
JAMMER_SNR_8_CORES_DB = 3.1

Mode = Literal["scanning", "triggering"]


@dataclass(frozen=True)
class ChannelModel:
    carrier_freq_mhz: float
    snr_db: float
    signal_bandwidth_hz: float = 1000.0
    jammer_snr_penalty_db: float = 0.0
    noise_seed: int = 0

    def __post_init__(self) -> None:
        if not self.signal_bandwidth_hz > 0:
            raise ValueError("signal_bandwidth_hz must be > 0")
        if self.jammer_snr_penalty_db < 0:
            raise ValueError("jammer penalty cannot raise the SNR")

    @property
    def effective_snr_db(self) -> float:
        return self.snr_db - self.jammer_snr_penalty_db

    @property
    def noiseless(self) -> bool:
        return math.isinf(self.effective_snr_db) and self.effective_snr_db > 0


def apply_jammer(ch: ChannelModel, cores: int) -> ChannelModel:
    """Model a background CPU/memory jamming process bound to ``cores`` cores.

    The effective SNR is clamped to 4.8 dB at 6 cores and 3.1 dB at 8;
    1-5 cores move linearly from the unjammed SNR towards the 6-core value,
    7 cores sits halfway between the 6- and 8-core values. The SNR never
    increases. An infinite base SNR has no finite penalty, so the jammed
    model carries the clamped value as its SNR instead.
    """
    if not 0 <= cores <= 8:
        raise ValueError("jammer cores must be in 0..8")
    base = ch.effective_snr_db
    if cores == 0:
        return ch
    if cores <= 6:
        target = min(base, JAMMER_SNR_6_CORES_DB)
        if math.isinf(base):
            eff = target if cores == 6 else base
        else:
            eff = base + (target - base) * cores / 6
    else:
        cap = JAMMER_SNR_6_CORES_DB + (JAMMER_SNR_8_CORES_DB - JAMMER_SNR_6_CORES_DB) * (cores - 6) / 2
        eff = min(base, cap)
    if math.isinf(base) and not math.isinf(eff):
        return replace(ch, snr_db=eff, jammer_snr_penalty_db=0.0)
    return replace(ch, jammer_snr_penalty_db=ch.jammer_snr_penalty_db + (base - eff))


@dataclass(frozen=True)
class IqStream:
    sample_rate_hz: float
    center_freq_mhz: float
    samples: np.ndarray

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


def default_center_mhz(carrier_mhz: float, sample_rate_hz: float) -> float:
    """Tune so the tone sits at +fs/8, clear of DC and of the band edge."""
    return carrier_mhz - sample_rate_hz / 8 / 1e6


def synthesize_iq(
    tl: EmissionTimeline,
    ch: ChannelModel,
    sample_rate_hz: float,
    duration_s: float | None = None,
    center_freq_mhz: float | None = None,
) -> IqStream:
    if sample_rate_hz < 4 * ch.signal_bandwidth_hz:
        raise ValueError(
            f"sample rate {sample_rate_hz} Hz is below 4x the signal bandwidth"
        )
    if center_freq_mhz is None:
        center_freq_mhz = default_center_mhz(ch.carrier_freq_mhz, sample_rate_hz)
    offset_hz = (ch.carrier_freq_mhz - center_freq_mhz) * 1e6
    if abs(offset_hz) + ch.signal_bandwidth_hz / 2 >= sample_rate_hz / 2:
        raise ValueError(f"tone offset {offset_hz:.1f} Hz is beyond Nyquist")
    if duration_s is None:
        duration_s = tl.duration_s
    n = int(round(duration_s * sample_rate_hz))
    rng = np.random.default_rng(ch.noise_seed)
    phase0 = rng.uniform(0, 2 * np.pi)
    t = np.arange(n) / sample_rate_hz
    env = tl.value_at(t)
    x = env * np.exp(1j * (2 * np.pi * offset_hz * t + phase0))
    if not ch.noiseless:
        snr = 10 ** (ch.effective_snr_db / 10)
        # unit tone power; white noise density set by the in-band SNR
        var = sample_rate_hz / (ch.signal_bandwidth_hz * snr)
        noise = rng.standard_normal((2, n))
        x = x + math.sqrt(var / 2) * (noise[0] + 1j * noise[1])
    return IqStream(float(sample_rate_hz), float(center_freq_mhz), x.astype(np.complex64))


@dataclass(frozen=True, slots=True)
class FftFrame:
    timestamp_ns: int
    channel_index: int
    bins: tuple[float, ...]
    max_bin_index: int
    max_magnitude: float

    def __post_init__(self) -> None:
        if len(self.bins) != N_BINS:
            raise ValueError(f"an FFT frame has {N_BINS} bins, got {len(self.bins)}")
        if min(self.bins) < 0:
            raise ValueError("bin magnitudes must be non-negative")
        if not 0 <= self.max_bin_index < N_BINS or self.bins[self.max_bin_index] != max(self.bins):
            raise ValueError("max_bin_index must point at the largest bin")
        if self.max_magnitude != self.bins[self.max_bin_index]:
            raise ValueError("max_magnitude must equal the largest bin")

    def to_json(self) -> str:
        return json.dumps(
            {
                "timestamp_ns": self.timestamp_ns,
                "channel_index": self.channel_index,
                "bins": list(self.bins),
                "max_bin_index": self.max_bin_index,
                "max_magnitude": self.max_magnitude,
            }
        )


@dataclass
class FftFrames:
    """A run of spectral-scan frames held column-wise."""

    timestamps_ns: np.ndarray
    channel_index: np.ndarray
    bins: np.ndarray  # (n_frames, 56)

    def __post_init__(self) -> None:
        self.timestamps_ns = np.asarray(self.timestamps_ns, dtype=np.int64)
        self.channel_index = np.asarray(self.channel_index, dtype=np.int64)
        self.bins = np.asarray(self.bins, dtype=float).reshape(-1, N_BINS)
        if not len(self.timestamps_ns) == len(self.channel_index) == len(self.bins):
            raise ValueError("frame columns differ in length")

    def __len__(self) -> int:
        return len(self.timestamps_ns)

    @property
    def max_bin_index(self) -> np.ndarray:
        return np.argmax(self.bins, axis=1)

    @property
    def max_magnitude(self) -> np.ndarray:
        return self.bins.max(axis=1) if len(self) else np.zeros(0)

    def frame(self, i: int) -> FftFrame:
        row = self.bins[i]
        k = int(np.argmax(row))
        return FftFrame(
            int(self.timestamps_ns[i]),
            int(self.channel_index[i]),
            tuple(float(v) for v in row),
            k,
            float(row[k]),
        )

    def __iter__(self) -> Iterator[FftFrame]:
        return (self.frame(i) for i in range(len(self)))

    def select(self, mask: np.ndarray) -> "FftFrames":
        return FftFrames(self.timestamps_ns[mask], self.channel_index[mask], self.bins[mask])

    def for_channel(self, index: int) -> "FftFrames":
        return self.select(self.channel_index == index)

    @classmethod
    def from_frames(cls, frames: Iterable[FftFrame]) -> "FftFrames":
        frames = list(frames)
        return cls(
            np.array([f.timestamp_ns for f in frames], dtype=np.int64),
            np.array([f.channel_index for f in frames], dtype=np.int64),
            np.array([f.bins for f in frames], dtype=float).reshape(-1, N_BINS),
        )


def as_frames(frames: FftFrames | Iterable[FftFrame]) -> FftFrames:
    return frames if isinstance(frames, FftFrames) else FftFrames.from_frames(frames)


@dataclass(frozen=True)
class FrameCadence:
    """Spectral-scan frame rates (frames/s).

    Scanning mode shares its rate across every channel in the scan set;
    triggering mode delivers its full rate on one channel.
    """

    scanning_fps: float = 20.0
    triggering_fps: float = 400.0

    def rate(self, mode: Mode) -> float:
        if mode == "scanning":
            return self.scanning_fps
        if mode == "triggering":
            return self.triggering_fps
        raise ValueError(f"unknown receiver mode {mode!r}")


DEFAULT_CADENCE = FrameCadence()


def carrier_bin(carrier_mhz: float, channel_index: int) -> int | None:
    """Index of the bin holding ``carrier_mhz`` in a channel's 56-bin span."""
    low = wifi_channel(channel_index).center_mhz - CHANNEL_SPAN_MHZ / 2
    pos = (carrier_mhz - low) / BIN_WIDTH_MHZ
    if not 0 <= pos < N_BINS:
        return None
    return int(math.floor(pos))


def passband_gain(carrier_mhz: float, channel_index: int) -> float:
    """Linear power gain of the receive filter at the carrier's offset."""
    off = (carrier_mhz - wifi_channel(channel_index).center_mhz) / (CHANNEL_SPAN_MHZ / 2)
    return 10 ** (-EDGE_ROLLOFF_DB * off * off / 10)


def synthesize_fft_frames(
    tl: EmissionTimeline,
    ch: ChannelModel,
    mode: Mode,
    channels: Sequence[int],
    duration_s: float | None = None,
    cadence: FrameCadence = DEFAULT_CADENCE,
) -> FftFrames:
    channels = list(channels)
    if not channels:
        raise ValueError("at least one channel is required")
    if mode == "triggering" and len(channels) != 1:
        raise ValueError("triggering mode samples exactly one channel")
    rate = cadence.rate(mode)
    if duration_s is None:
        duration_s = tl.duration_s
    n = int(math.floor(duration_s * rate + 1e-9))
    k = np.arange(n)
    t = k / rate
    chan = np.asarray(channels, dtype=np.int64)[k % len(channels)]

    rng = np.random.default_rng(ch.noise_seed)
    phase = rng.uniform(0, 2 * np.pi, n)
    field_ = np.zeros((n, N_BINS), dtype=complex)
    if not ch.noiseless:
        sigma2 = 10 ** (-ch.effective_snr_db / 10)
        noise = rng.standard_normal((2, n, N_BINS))
        field_ += math.sqrt(sigma2 / 2) * (noise[0] + 1j * noise[1])
    env = tl.value_at(t)
    for c in channels:
        b = carrier_bin(ch.carrier_freq_mhz, c)
        if b is None:
            continue
        rows = (chan == c) & (env > 0)
        amp = math.sqrt(passband_gain(ch.carrier_freq_mhz, c))
        field_[rows, b] += amp * env[rows] * np.exp(1j * phase[rows])
    mags = np.abs(field_.real) + np.abs(field_.imag)
    ts = np.round(t * 1e9).astype(np.int64)
    return FftFrames(ts, chan, mags)


# --- file formats ----------------------------------------------------------

def iq_sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_iq(stream: IqStream, path: str | Path) -> Path:
    """Write raw interleaved little-endian float32 I/Q plus a JSON sidecar."""
    path = Path(path)
    np.asarray(stream.samples, dtype="<c8").tofile(path)
    header = {
        "sample_rate_hz": stream.sample_rate_hz,
        "center_freq_mhz": stream.center_freq_mhz,
        "format": "cf32le",
    }
    side = iq_sidecar_path(path)
    side.write_text(json.dumps(header, indent=2) + "\n")
    return side


def read_iq(path: str | Path) -> IqStream:
    path = Path(path)
    header = json.loads(iq_sidecar_path(path).read_text())
    if header.get("format") != "cf32le":
        raise ValueError(f"unsupported IQ format {header.get('format')!r}")
    samples = np.fromfile(path, dtype="<c8")
    if not np.all(np.isfinite(samples)):
        raise ValueError(f"{path}: non-finite samples")
    return IqStream(float(header["sample_rate_hz"]), float(header["center_freq_mhz"]), samples)


def write_fft_frames(frames: FftFrames | Iterable[FftFrame], path: str | Path) -> None:
    with open(path, "w") as fh:
        for f in as_frames(frames):
            fh.write(f.to_json() + "\n")


def read_fft_frames(path: str | Path) -> FftFrames:
    frames = []
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            try:
                frames.append(
                    FftFrame(
                        int(rec["timestamp_ns"]),
                        int(rec["channel_index"]),
                        tuple(float(v) for v in rec["bins"]),
                        int(rec["max_bin_index"]),
                        float(rec["max_magnitude"]),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{n}: bad FFT frame: {exc}") from exc
    return FftFrames.from_frames(frames)
