"""Command-line entry point: ``airfi <subcommand> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .channel_sim import (
    ChannelModel,
    apply_jammer,
    carrier_bin,
    read_fft_frames,
    read_iq,
    synthesize_fft_frames,
    synthesize_iq,
    write_fft_frames,
    write_iq,
)
from .codec import FRAME_BITS, Packet, encode_packet, join_packets, segment_message
from .demod import DemodConfig, demodulate_series, fft_bin_series, power_series
from .harness import (
    DEFAULT_CARRIER_MHZ,
    FFT_TIMELINE_RATE_HZ,
    PATH_BIT_RATES,
    RECEIVER_PATHS,
    ExperimentConfig,
    PointRun,
    compare_modes,
    emit_report,
    iq_sample_rate,
    primary_channel,
    random_packets,
    run_ber_sweep,
    score_point,
)
from .modem_tx import bit_time_ms_for_rate, build_schedule, measure_duty_cycle, simulate_emission
from .rx_spectral import scan_for_activity
from .wifi import CHANNELS, DdrConfig, ddr_emission_frequency, overlapping_channels

log = logging.getLogger("airfi")


class CliError(Exception):
    pass


def _snr(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    return float(t)


def _snr_list(text: str) -> list[float]:
    return [_snr(x) for x in text.split(",") if x.strip()]


def _payload_packets(args) -> tuple[list[Packet], int | None]:
    """Packets to send and, for --message, the message length in bytes."""
    if args.message is not None:
        data = args.message.encode()
        return segment_message(data), len(data)
    if args.payload:
        return [Packet(int(p, 16)) for p in args.payload], None
    return random_packets(args.random, args.seed), None


def _add_payload_args(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--payload", nargs="+", metavar="HEX", help="32-bit payloads in hex")
    g.add_argument("--message", help="text message, split into 4-byte packets")
    g.add_argument("--random", type=int, default=4, metavar="N", help="N random payloads (default 4)")


def cmd_tx_sim(args) -> int:
    packets, msg_len = _payload_packets(args)
    bt = bit_time_ms_for_rate(args.bit_rate)
    sched = build_schedule([encode_packet(p) for p in packets], bt, args.gap, args.lead_in, args.lead_in)
    ch = apply_jammer(ChannelModel(args.carrier, args.snr, noise_seed=args.seed), args.jammer)
    out = Path(args.out)
    if args.path == "iq":
        fs = args.sample_rate or iq_sample_rate(ExperimentConfig([args.snr], args.bit_rate))
        stream = synthesize_iq(simulate_emission(sched, fs), ch, fs)
        write_iq(stream, out)
    else:
        mode = args.path.removeprefix("fft_")
        chan = primary_channel(args.carrier)
        chans = args.channels or [chan]
        if mode == "triggering":
            chans = chans[:1]
        frames = synthesize_fft_frames(simulate_emission(sched, FFT_TIMELINE_RATE_HZ), ch, mode, chans)
        write_fft_frames(frames, out)
    truth = {
        "bit_rate_bps": args.bit_rate,
        "carrier_mhz": args.carrier,
        "path": args.path,
        "bits": "".join(map(str, sched.bits)),
        "payloads": [f"{p.payload:08x}" for p in packets],
        "frame_starts_s": [
            (args.lead_in + k * (FRAME_BITS + args.gap)) * bt / 1000.0 for k in range(len(packets))
        ],
        "message_length": msg_len,
    }
    truth_path = out.with_name(out.name + ".truth.json")
    truth_path.write_text(json.dumps(truth, indent=2) + "\n")
    print(f"wrote {out} ({len(packets)} packets, {len(sched)} bits, {sched.duration_s:g} s)")
    return 0


def _series_from_file(path: Path, carrier: float, bit_time_ms: float, channel: int | None):
    if path.suffix == ".jsonl":
        frames = read_fft_frames(path)
        if channel is None:
            scores = scan_for_activity(frames)
            if not scores:
                raise CliError(f"{path}: no FFT frames")
            channel = max(scores, key=scores.get)
        b = carrier_bin(carrier, channel)
        if b is None:
            raise CliError(f"carrier {carrier} MHz is outside channel {channel}")
        return fft_bin_series(frames.for_channel(channel), b)
    stream = read_iq(path)
    cfg = DemodConfig.for_stream(stream, carrier, bit_time_ms)
    return power_series(stream, cfg)


def cmd_rx(args) -> int:
    path = Path(args.file)
    if not path.exists():
        raise CliError(f"{path}: no such file")
    bt = bit_time_ms_for_rate(args.bit_rate)
    series = _series_from_file(path, args.carrier, bt, args.channel)
    res = demodulate_series(series, bt)
    packets = res.packets
    for p in packets:
        print(f"{p.payload:08x}")
    result = {
        "bits": "".join(map(str, res.bits)),
        "packets": [f"{p.payload:08x}" for p in packets],
        "errors": [e.kind.value for e in res.errors],
        "ber_if_known": None,
    }
    if args.truth:
        truth = json.loads(Path(args.truth).read_text())
        sent = [Packet(int(h, 16)) for h in truth["payloads"]]
        run = PointRun(sent, truth["frame_starts_s"], res, None)
        total, errors, *_ = score_point(run, bt)
        result["ber_if_known"] = errors / total if total else None
        if truth.get("message_length") is not None:
            result["message"] = join_packets(packets, truth["message_length"]).decode(errors="replace")
    if args.out:
        Path(args.out).write_text(json.dumps(result, indent=2) + "\n")
    return 0


def cmd_tx_stress(args) -> int:
    from .stress import run_stress_transmitter

    packets, _ = _payload_packets(args)
    bt = bit_time_ms_for_rate(args.bit_rate)
    sched = build_schedule([encode_packet(p) for p in packets], bt, args.gap)
    log.info("transmitting %d bits at %g bit/s on %d workers", len(sched), args.bit_rate, args.workers)
    act = run_stress_transmitter(sched, args.workers, bind_cores=not args.no_affinity)
    if args.out:
        act.write_jsonl(args.out)
    recovered = measure_duty_cycle(act, bt, len(sched))
    mismatches = sum(a != b for a, b in zip(recovered, sched.bits))
    worst = max((abs(e) for e in act.boundary_errors_ns), default=0) / 1e6
    print(
        f"sent {len(sched)} bits, self-check mismatches {mismatches}, "
        f"worst boundary error {worst:.2f} ms, timing violations {len(act.timing_violations)}"
    )
    return 0 if mismatches == 0 else 3


def _experiment_config(args) -> ExperimentConfig:
    base: dict = {}
    if args.config:
        base = json.loads(Path(args.config).read_text())
    overrides = {
        "snr_points_db": args.snr,
        "bit_rate_bps": args.bit_rate,
        "receiver_path": args.path,
        "packets_per_point": args.packets,
        "seed": args.seed,
        "jammer_cores": args.jammer,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    if "bit_rate_bps" not in base:
        base["bit_rate_bps"] = PATH_BIT_RATES[base.get("receiver_path", "iq")]
    return ExperimentConfig.from_dict(base)


def cmd_sweep(args) -> int:
    cfg = _experiment_config(args)
    reports = run_ber_sweep(cfg)
    fmt = args.format or ("json" if args.out and args.out.endswith(".json") else "csv")
    if args.out:
        emit_report(reports, args.out, fmt)
    for r in reports:
        note = f"  [{r.diagnostic}]" if r.diagnostic else ""
        print(
            f"snr={r.snr_db:>6} dB  bits={r.bits_sent}  errors={r.bit_errors}  "
            f"ber={r.ber:.4f}  packets={r.packets_recovered}/{r.packets_sent}{note}"
        )
    return 1 if any(r.diagnostic for r in reports) else 0


def cmd_modes(args) -> int:
    rows = compare_modes(
        snr_db=args.snr[0] if args.snr else 12.0,
        duration_s=args.duration,
        packets=args.packets or 5,
        seed=args.seed or 0,
    )
    lines = ["mode,duration_s,frames,frames_per_s,achievable_bit_rate_bps,bit_rate_bps,snr_db,ber"]
    for r in rows:
        lines.append(",".join(str(v) for v in dataclasses.astuple(r)))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_channels(args) -> int:
    if args.table:
        print("channel,center_mhz,low_mhz,high_mhz,north_america,japan,others")
        for c in CHANNELS:
            print(f"{c.index},{c.center_mhz},{c.low_mhz},{c.high_mhz},{c.north_america},{c.japan},{c.others}")
        return 0
    if args.ddr_clock is not None:
        carrier = ddr_emission_frequency(DdrConfig(args.ddr_clock, harmonic=args.harmonic))
    elif args.carrier is not None:
        carrier = args.carrier
    else:
        raise CliError("give --carrier or --ddr-clock (or --table)")
    ov = overlapping_channels(carrier, args.bandwidth, args.margin)
    print(f"carrier {carrier:g} MHz, bandwidth {args.bandwidth:g} Hz")
    print("overlap:      " + (" ".join(map(str, ov.strict_indices)) or "-"))
    print("interference: " + (" ".join(map(str, ov.interference_indices)) or "-"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="airfi", description="Memory-bus OOK covert channel simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, snr_list=False, path_default="iq"):
        if snr_list:
            sp.add_argument("--snr", type=_snr_list, help="comma-separated SNR points in dB ('inf' allowed)")
        else:
            sp.add_argument("--snr", type=_snr, default=20.0, help="SNR in dB ('inf' for no noise)")
        sp.add_argument("--bit-rate", type=float, help="bit/s")
        sp.add_argument("--path", choices=RECEIVER_PATHS, default=path_default)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        sp.add_argument("--config", help="JSON file with ExperimentConfig keys")

    sp = sub.add_parser("tx-sim", help="simulate a transmission into an IQ or FFT-frame file")
    common(sp)
    _add_payload_args(sp)
    sp.add_argument("--carrier", type=float, default=DEFAULT_CARRIER_MHZ, help="carrier MHz")
    sp.add_argument("--gap", type=int, default=8, help="zero bits between frames")
    sp.add_argument("--lead-in", type=int, default=16, help="silent bits before/after the burst")
    sp.add_argument("--jammer", type=int, default=0, help="jamming cores 0..8")
    sp.add_argument("--channels", type=int, nargs="+", help="scan set for fft_scanning")
    sp.add_argument("--sample-rate", type=float, help="IQ sample rate in Hz")
    sp.set_defaults(func=cmd_tx_sim)

    sp = sub.add_parser("tx-stress", help="run the memory-copy workload and log its activity")
    common(sp)
    _add_payload_args(sp)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--gap", type=int, default=8)
    sp.add_argument("--no-affinity", action="store_true", help="do not pin workers to cores")
    sp.set_defaults(func=cmd_tx_stress)

    sp = sub.add_parser("rx", help="demodulate an IQ (.cf32) or FFT-frame (.jsonl) file")
    common(sp)
    sp.add_argument("file")
    sp.add_argument("--carrier", type=float, default=DEFAULT_CARRIER_MHZ)
    sp.add_argument("--channel", type=int, help="channel to read from an FFT-frame file")
    sp.add_argument("--truth", help="truth JSON written by tx-sim, for BER")
    sp.set_defaults(func=cmd_rx)

    sp = sub.add_parser("sweep", help="BER vs SNR sweep to CSV/JSON")
    common(sp, snr_list=True, path_default=None)
    sp.add_argument("--packets", type=int)
    sp.add_argument("--jammer", type=int)
    sp.add_argument("--format", choices=("csv", "json"))
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("modes", help="scanning vs triggering throughput and BER")
    common(sp, snr_list=True)
    sp.add_argument("--duration", type=float, default=5.0)
    sp.add_argument("--packets", type=int)
    sp.set_defaults(func=cmd_modes)

    sp = sub.add_parser("channels", help="Wi-Fi channels hit by an emission")
    sp.add_argument("--carrier", type=float, help="emission frequency in MHz")
    sp.add_argument("--ddr-clock", type=float, help="memory clock in MHz")
    sp.add_argument("--harmonic", type=int, default=1)
    sp.add_argument("--bandwidth", type=float, default=1000.0, help="signal bandwidth in Hz")
    sp.add_argument("--margin", type=float, default=10.0, help="interference margin in MHz")
    sp.add_argument("--table", action="store_true", help="print the channel plan")
    sp.set_defaults(func=cmd_channels)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s %(levelname)s %(message)s",
    )
    if args.command in ("tx-sim", "tx-stress", "rx"):
        if args.config:
            cfg = json.loads(Path(args.config).read_text())
            args.bit_rate = args.bit_rate or cfg.get("bit_rate_bps")
            args.seed = args.seed if args.seed is not None else cfg.get("seed")
        if args.bit_rate is None:
            # the stress workload defaults to the rate it can hold on a busy host
            args.bit_rate = 10.0 if args.command == "tx-stress" else PATH_BIT_RATES[args.path]
        if args.seed is None:
            args.seed = 0
    try:
        return args.func(args)
    except (CliError, ValueError, OSError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"airfi: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
