"""BER-vs-SNR experiments over the simulated transmit/receive chain.

Distance is not modelled; SNR is the sweep axis. For orientation, the
reference SDR measurements paired e.g. 120 cm with 18 dB and 210 cm with
3 dB, but that mapping depends on the room and is not reproduced here.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .channel_sim import (
    DEFAULT_CADENCE,
    ChannelModel,
    FrameCadence,
    apply_jammer,
    carrier_bin,
    passband_gain,
    synthesize_fft_frames,
    synthesize_iq,
)
from .codec import FRAME_BITS, Packet, encode_packet
from .demod import (
    DemodConfig,
    DemodResult,
    demodulate_series,
    fft_bin_series,
    power_series,
    recover_packets,
)
from .modem_tx import bit_time_ms_for_rate, build_schedule, simulate_emission
from .wifi import overlapping_channels

log = logging.getLogger(__name__)

ReceiverPath = Literal["iq", "fft_scanning", "fft_triggering"]
RECEIVER_PATHS: tuple[str, ...] = ("iq", "fft_scanning", "fft_triggering")
# bit rate each receiver ran at in the reference measurements
PATH_BIT_RATES = {"iq": 100.0, "fft_scanning": 1.0, "fft_triggering": 10.0}

CSV_COLUMNS = (
    "snr_db",
    "bit_rate_bps",
    "receiver_path",
    "bits_sent",
    "bit_errors",
    "ber",
    "packets_sent",
    "packets_recovered",
    "packets_rejected",
    "seed",
)

# DDR4-2400 workstation emission, ~2423.8 MHz
DEFAULT_CARRIER_MHZ = 2424.0
FFT_TIMELINE_RATE_HZ = 1000.0
IQ_MIN_SAMPLE_RATE_HZ = 8000.0
IQ_SAMPLES_PER_BIT = 320


@dataclass
class ExperimentConfig:
    snr_points_db: list[float] = field(default_factory=lambda: [0, 3, 6, 9, 12, 15, 18])
    bit_rate_bps: float = 100.0
    receiver_path: ReceiverPath = "iq"
    packets_per_point: int = 25
    seed: int = 0
    jammer_cores: int = 0
    carrier_mhz: float = DEFAULT_CARRIER_MHZ
    inter_frame_gap_bits: int = 8
    lead_in_bits: int = 16
    scan_channels: list[int] | None = None
    iq_sample_rate_hz: float | None = None

    def __post_init__(self) -> None:
        self.snr_points_db = [float(s) for s in self.snr_points_db]
        if not self.snr_points_db:
            raise ValueError("snr_points_db must not be empty")
        if self.packets_per_point < 1:
            raise ValueError("packets_per_point must be >= 1")
        if self.receiver_path not in RECEIVER_PATHS:
            raise ValueError(f"receiver_path must be one of {RECEIVER_PATHS}")
        if not self.bit_rate_bps > 0:
            raise ValueError("bit_rate_bps must be positive")
        if not 0 <= self.jammer_cores <= 8:
            raise ValueError("jammer_cores must be in 0..8")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    @property
    def bit_time_ms(self) -> float:
        return bit_time_ms_for_rate(self.bit_rate_bps)


@dataclass
class BerReport:
    snr_db: float
    bit_rate_bps: float
    receiver_path: str
    bits_sent: int
    bit_errors: int
    ber: float
    packets_sent: int
    packets_recovered: int
    packets_rejected: int
    seed: int
    false_packets: int = 0
    effective_snr_db: float = math.nan
    diagnostic: str | None = None


def primary_channel(carrier_mhz: float) -> int:
    """Channel whose receive filter passes the carrier best."""
    chans = overlapping_channels(carrier_mhz).strict
    if not chans:
        raise ValueError(f"carrier {carrier_mhz} MHz is outside the 2.4 GHz channel plan")
    return max(chans, key=lambda c: passband_gain(carrier_mhz, c.index)).index


def point_seeds(seed: int, n_points: int) -> tuple[int, list[int]]:
    """Payload seed shared by every point, and one noise seed per point."""
    ss = np.random.SeedSequence(seed)
    payload, *noise = ss.spawn(n_points + 1)
    as_int = lambda s: int(s.generate_state(1, dtype=np.uint32)[0])
    return as_int(payload), [as_int(s) for s in noise]


def random_packets(n: int, seed: int) -> list[Packet]:
    rng = np.random.default_rng(seed)
    return [Packet(int(p)) for p in rng.integers(0, 1 << 32, n, dtype=np.uint64)]


def iq_sample_rate(cfg: ExperimentConfig) -> float:
    if cfg.iq_sample_rate_hz:
        return float(cfg.iq_sample_rate_hz)
    return max(IQ_MIN_SAMPLE_RATE_HZ, IQ_SAMPLES_PER_BIT * cfg.bit_rate_bps)


@dataclass
class PointRun:
    packets: list[Packet]
    frame_starts_s: list[float]
    demod: DemodResult
    channel: ChannelModel


def run_point(cfg: ExperimentConfig, snr_db: float, payload_seed: int, noise_seed: int) -> PointRun:
    """Transmit one batch of packets through the configured path and demodulate."""
    packets = random_packets(cfg.packets_per_point, payload_seed)
    frames = [encode_packet(p) for p in packets]
    bt_ms = cfg.bit_time_ms
    sched = build_schedule(
        frames, bt_ms, cfg.inter_frame_gap_bits, cfg.lead_in_bits, tail_bits=cfg.lead_in_bits
    )
    stride = FRAME_BITS + cfg.inter_frame_gap_bits
    starts = [(cfg.lead_in_bits + k * stride) * bt_ms / 1000.0 for k in range(len(frames))]
    ch = apply_jammer(ChannelModel(cfg.carrier_mhz, snr_db, noise_seed=noise_seed), cfg.jammer_cores)

    if cfg.receiver_path == "iq":
        fs = iq_sample_rate(cfg)
        tl = simulate_emission(sched, fs)
        stream = synthesize_iq(tl, ch, fs)
        dcfg = DemodConfig.for_stream(stream, cfg.carrier_mhz, bt_ms)
        series = power_series(stream, dcfg)
    else:
        mode = "scanning" if cfg.receiver_path == "fft_scanning" else "triggering"
        chan = primary_channel(cfg.carrier_mhz)
        if mode == "scanning":
            scan = list(cfg.scan_channels) if cfg.scan_channels else [chan]
            if chan not in scan:
                raise ValueError(f"scan set {scan} misses channel {chan} carrying the signal")
        else:
            scan = [chan]
        tl = simulate_emission(sched, FFT_TIMELINE_RATE_HZ)
        frames_out = synthesize_fft_frames(tl, ch, mode, scan)
        b = carrier_bin(cfg.carrier_mhz, chan)
        series = fft_bin_series(frames_out.for_channel(chan), b)
    return PointRun(packets, starts, demodulate_series(series, bt_ms), ch)


def score_point(run: PointRun, bit_time_ms: float) -> tuple[int, int, int, int, int]:
    """Compare received frames with the known schedule.

    A lock counts for the frame whose scheduled start lies within half a bit
    of it. Frames without a lock are scored as all-zero reception (no
    carrier seen). A matched frame is recovered if its first decoded packet
    is the one sent and rejected if nothing decodes. Returns (bits_sent, bit_errors, recovered, rejected,
    false_packets).
    """
    half_bit = bit_time_ms / 2000.0
    locks = list(run.demod.locks)
    starts = np.asarray(run.frame_starts_s)
    matched: dict[int, list[int]] = {}
    unmatched_locks = []
    for lk in locks:
        k = int(np.argmin(np.abs(starts - lk.t_s))) if len(starts) else -1
        if k >= 0 and abs(starts[k] - lk.t_s) <= half_bit and k not in matched:
            matched[k] = lk.bits
        else:
            unmatched_locks.append(lk)

    bits_sent = errors = recovered = 0
    for k, p in enumerate(run.packets):
        sent = encode_packet(p).bits
        got = matched.get(k, [])
        got = list(got[:FRAME_BITS]) + [0] * (FRAME_BITS - len(got))
        bits_sent += FRAME_BITS
        errors += sum(a != b for a, b in zip(sent, got))

    # one outcome per scheduled frame; locks on noise only count if they pass CRC
    rejected = false_packets = 0
    for k, bits in matched.items():
        got = [r for r in recover_packets(bits) if isinstance(r, Packet)]
        if not got:
            rejected += 1
        elif got[0] == run.packets[k]:
            recovered += 1
            false_packets += len(got) - 1
        else:
            false_packets += len(got)
    for lk in unmatched_locks:
        false_packets += sum(isinstance(r, Packet) for r in recover_packets(lk.bits))
    return bits_sent, errors, recovered, rejected, false_packets


def run_ber_sweep(cfg: ExperimentConfig) -> list[BerReport]:
    """One report row per SNR point, in the configured order.

    The same payloads are sent at every point; only the noise changes. A
    point that fails is reported with a diagnostic and NaN BER and the sweep
    continues.
    """
    payload_seed, noise_seeds = point_seeds(cfg.seed, len(cfg.snr_points_db))
    reports = []
    for snr, nseed in zip(cfg.snr_points_db, noise_seeds):
        try:
            run = run_point(cfg, snr, payload_seed, nseed)
            bits, errs, rec, rej, fp = score_point(run, cfg.bit_time_ms)
            reports.append(
                BerReport(
                    snr_db=snr,
                    bit_rate_bps=cfg.bit_rate_bps,
                    receiver_path=cfg.receiver_path,
                    bits_sent=bits,
                    bit_errors=errs,
                    ber=errs / bits,
                    packets_sent=len(run.packets),
                    packets_recovered=rec,
                    packets_rejected=rej,
                    seed=cfg.seed,
                    false_packets=fp,
                    effective_snr_db=run.channel.effective_snr_db,
                )
            )
        except Exception as exc:  # noqa: BLE001 - one bad point must not sink the sweep
            log.error("SNR point %s dB failed: %s", snr, exc)
            reports.append(
                BerReport(
                    snr_db=snr,
                    bit_rate_bps=cfg.bit_rate_bps,
                    receiver_path=cfg.receiver_path,
                    bits_sent=0,
                    bit_errors=0,
                    ber=math.nan,
                    packets_sent=cfg.packets_per_point,
                    packets_recovered=0,
                    packets_rejected=0,
                    seed=cfg.seed,
                    diagnostic=f"{type(exc).__name__}: {exc}",
                )
            )
    return reports


@dataclass
class ModeRow:
    mode: str
    duration_s: float
    frames: int
    frames_per_s: float
    achievable_bit_rate_bps: float
    bit_rate_bps: float
    snr_db: float
    ber: float


MIN_FRAMES_PER_BIT = 4


def compare_modes(
    snr_db: float = 12.0,
    duration_s: float = 5.0,
    packets: int = 5,
    seed: int = 0,
    carrier_mhz: float = DEFAULT_CARRIER_MHZ,
    cadence: FrameCadence = DEFAULT_CADENCE,
    bit_rates: dict[str, float] | None = None,
) -> list[ModeRow]:
    """Frame throughput and BER of the scanning and triggering receivers.

    Throughput is counted over ``duration_s`` of received frames on the
    carrier's channel; the achievable bit rate assumes at least four frames
    per bit. BER comes from a short sweep at each mode's bit rate.
    """
    rates = {"scanning": PATH_BIT_RATES["fft_scanning"], "triggering": PATH_BIT_RATES["fft_triggering"]}
    if bit_rates:
        rates.update(bit_rates)
    chan = primary_channel(carrier_mhz)
    rows = []
    for mode in ("scanning", "triggering"):
        probe = simulate_emission(build_schedule([], 1000.0), FFT_TIMELINE_RATE_HZ)
        fr = synthesize_fft_frames(
            probe, ChannelModel(carrier_mhz, snr_db, noise_seed=seed), mode, [chan],
            duration_s=duration_s, cadence=cadence,
        )
        fps = len(fr) / duration_s
        cfg = ExperimentConfig(
            snr_points_db=[snr_db],
            bit_rate_bps=rates[mode],
            receiver_path=f"fft_{mode}",
            packets_per_point=packets,
            seed=seed,
            carrier_mhz=carrier_mhz,
        )
        rep = run_ber_sweep(cfg)[0]
        rows.append(
            ModeRow(mode, duration_s, len(fr), fps, fps / MIN_FRAMES_PER_BIT, rates[mode], snr_db, rep.ber)
        )
    return rows


def _num(x: float) -> float | str | None:
    if isinstance(x, float):
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
    return x


def reports_to_csv(reports: Sequence[BerReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow([getattr(r, c) for c in CSV_COLUMNS])
    return buf.getvalue()


def reports_to_json(reports: Sequence[BerReport]) -> str:
    rows = [{k: _num(v) for k, v in dataclasses.asdict(r).items()} for r in reports]
    return json.dumps(rows, indent=2) + "\n"


def emit_report(
    reports: Sequence[BerReport], path: str | Path, format: Literal["csv", "json"] = "csv"
) -> Path:
    if not reports:
        raise ValueError("no reports to write")
    if format == "csv":
        text = reports_to_csv(reports)
    elif format == "json":
        text = reports_to_json(reports)
    else:
        raise ValueError(f"unknown report format {format!r}")
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror or exc}") from exc
    return path
