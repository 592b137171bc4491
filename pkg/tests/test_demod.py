from __future__ import annotations

import numpy as np
import pytest

from airfi.channel_sim import ChannelModel, carrier_bin, synthesize_fft_frames
from airfi.codec import DecodeError, DecodeErrorKind, Packet, encode_packet
from airfi.demod import (
    EnableDetection,
    SampleSeries,
    demodulate_series,
    detect_enable,
    enable_correlation,
    enable_template,
    fft_bin_series,
    recover_packets,
    slice_bits,
    testable_heads as heads_available,
)
from airfi.modem_tx import BitSchedule, build_schedule, simulate_emission
from helpers import CARRIER, iq_series


def frame_bits(payload):
    return list(encode_packet(Packet(payload)).bits)


# --- power series -------------------------------------------------------------

def test_all_on_series_is_tight():
    ser, _ = iq_series([1] * 20, snr_db=20, seed=1)
    assert ser.v.std() / ser.v.mean() < 0.5


def test_all_off_series_is_noise_floor():
    on, _ = iq_series([1] * 20, snr_db=20, seed=1)
    off, _ = iq_series([0] * 20, snr_db=20, seed=1)
    assert off.v.mean() < on.v.mean() / 10


def test_ook_clusters_separate():
    ser, _ = iq_series([1, 0] * 10, snr_db=20, seed=2)
    v = ser.v.reshape(20, 4)[:, 1:3].ravel()  # interior windows of each bit
    hi = v.reshape(20, 2)[0::2].ravel()
    lo = v.reshape(20, 2)[1::2].ravel()
    spread = max(hi.std(), lo.std())
    assert hi.mean() - lo.mean() > 3 * spread


def test_series_timestamps_are_window_starts():
    ser, cfg = iq_series([1, 0, 1], snr_db=20)
    assert np.allclose(np.diff(ser.t), cfg.window_size / cfg.sample_rate_hz)
    assert ser.t[0] == 0.0


def test_series_validation():
    with pytest.raises(ValueError):
        SampleSeries([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        SampleSeries([0.0, 1.0], [1.0, -1.0])
    assert SampleSeries([0.0, 1.0], [2.0, 3.0]).points == [(0.0, 2.0), (1.0, 3.0)]


# --- FFT-frame series -----------------------------------------------------------

def test_fft_bin_series_shows_ook():
    s = build_schedule([frame_bits(0x0F0F0F0F)], 100.0, lead_in_bits=4, tail_bits=4)
    fr = synthesize_fft_frames(simulate_emission(s, 1000), ChannelModel(CARRIER, 15, noise_seed=1), "triggering", [3])
    ser = fft_bin_series(fr, carrier_bin(CARRIER, 3))
    res = demodulate_series(ser, 100.0)
    assert [p.payload for p in res.packets] == [0x0F0F0F0F]


def test_fft_bin_series_constant_and_max():
    fr = synthesize_fft_frames(simulate_emission(BitSchedule((1,) * 4, 100.0), 1000),
                               ChannelModel(CARRIER, 20, noise_seed=2), "triggering", [3])
    b = int(fr.max_bin_index[0])
    assert fft_bin_series(fr, b).v[0] == fr.max_magnitude[0]
    flat = type(fr)(fr.timestamps_ns, fr.channel_index, np.ones_like(fr.bins))
    assert np.all(fft_bin_series(flat, 7).v == 1.0)
    with pytest.raises(ValueError):
        fft_bin_series(fr, 56)


# --- enable detection ---------------------------------------------------------------

def test_clean_sequence_after_silence():
    bits = [0] * 6 + frame_bits(0x12345678)
    ser, cfg = iq_series(bits, snr_db=30, pad_samples=37)
    det = detect_enable(ser, 10.0)
    truth = (6 * 320 + 37) / cfg.window_size
    assert det.found and abs(det.offset_index - truth) <= 1
    assert det.correlation >= 0.7


def test_offset_within_one_window_at_10db():
    hits = 0
    for seed in range(60):
        rng = np.random.default_rng(seed)
        lead, pad = int(rng.integers(2, 20)), int(rng.integers(0, 320))
        bits = [0] * lead + frame_bits(int(rng.integers(0, 2**32))) + [0] * 8
        ser, cfg = iq_series(bits, snr_db=10, seed=seed, pad_samples=pad)
        det = detect_enable(ser, 10.0)
        hits += det.found and abs(det.offset_index - (lead * 320 + pad) / cfg.window_size) <= 1
    assert hits >= 0.95 * 60


def test_noise_rarely_correlates():
    ser, _ = iq_series([0] * 2500, snr_db=10, seed=11)  # 10^4 windows
    corr = enable_correlation(ser.v, enable_template(4.0))
    assert np.mean(corr >= 0.7) < 0.01


def test_constant_power_not_found():
    ser = SampleSeries(np.arange(200) * 0.0025, np.full(200, 5.0))
    assert not detect_enable(ser, 10.0).found


def test_short_series_not_found():
    # fewer than 16 bits of samples
    ser = SampleSeries(np.arange(60) * 0.0025, np.tile([1.0] * 4 + [0.0] * 4, 8)[:60])
    assert not detect_enable(ser, 10.0).found
    assert heads_available(60, 4.0) == 0


def test_earliest_offset_among_ties():
    v = np.tile([1.0] * 4 + [0.0] * 4, 12)  # endless 1010 pattern
    ser = SampleSeries(np.arange(len(v)) * 0.0025, v)
    det = detect_enable(ser, 10.0)
    assert det.found and det.offset_index == 0


def test_threshold_is_midpoint():
    v = np.concatenate([np.tile([9.0] * 4 + [1.0] * 4, 4), np.zeros(64)])
    det = detect_enable(SampleSeries(np.arange(len(v)) * 0.0025, v), 10.0)
    assert det.threshold == pytest.approx(5.0)


def test_detection_invariant():
    with pytest.raises(ValueError):
        EnableDetection(True)
    with pytest.raises(ValueError):
        EnableDetection(False, 1.0)


# --- slicing ------------------------------------------------------------------------

def test_slice_packet_at_20db():
    bits = frame_bits(0x12345678)
    ser, _ = iq_series([0] * 4 + bits + [0] * 4, snr_db=20, seed=3)
    det = detect_enable(ser, 10.0)
    assert slice_bits(ser, det, 10.0, 48).bits == bits


def test_slice_threshold_extremes():
    ser, _ = iq_series([1, 0, 1, 1], snr_db=20, seed=4)
    assert slice_bits(ser, EnableDetection(True, 1e9, 0), 10.0, 4).bits == [0, 0, 0, 0]
    assert slice_bits(ser, EnableDetection(True, -1.0, 0), 10.0, 4).bits == [1, 1, 1, 1]


def test_slice_underrun():
    ser, _ = iq_series([1, 0, 1], snr_db=20, seed=4)
    out = slice_bits(ser, EnableDetection(True, 0.5, 0), 10.0, 5)
    assert len(out.bits) == 3 and out.underrun == 2 and not out.complete
    with pytest.raises(ValueError):
        slice_bits(ser, EnableDetection(False), 10.0, 3)


# --- packet recovery -------------------------------------------------------------

def test_back_to_back_frames():
    bits = frame_bits(1) + frame_bits(2)
    assert recover_packets(bits) == [Packet(1), Packet(2)]


def test_frames_with_gap():
    bits = frame_bits(0xAAAAAAAA) + [0] * 8 + frame_bits(0x55555555)
    assert [r for r in recover_packets(bits) if isinstance(r, Packet)] == [Packet(0xAAAAAAAA), Packet(0x55555555)]


def test_corrupted_frame_reported_inline():
    bad = frame_bits(3)
    bad[20] ^= 1
    out = recover_packets(bad + frame_bits(4))
    assert out[0] == DecodeError(DecodeErrorKind.CRC_MISMATCH)
    assert out[-1] == Packet(4)


def test_truncated_tail():
    out = recover_packets(frame_bits(5)[:30])
    assert out == [DecodeError(DecodeErrorKind.TRUNCATED)]


def test_random_noise_false_packets():
    rng = np.random.default_rng(0)
    bits = rng.integers(0, 2, 10_000).tolist()
    found = [r for r in recover_packets(bits) if isinstance(r, Packet)]
    assert len(found) < 5


# --- full chain ----------------------------------------------------------------------

def test_end_to_end_iq_20db():
    rng = np.random.default_rng(5)
    payloads = [int(p) for p in rng.integers(0, 2**32, 30, dtype=np.uint64)]
    s = build_schedule([encode_packet(Packet(p)) for p in payloads], 10.0, 8, 16, 16)
    ser, _ = iq_series(s.bits, snr_db=20, seed=5)
    res = demodulate_series(ser, 10.0)
    assert [p.payload for p in res.packets] == payloads
    assert res.errors == []
    assert [b for lk in res.locks for b in lk.bits] == [b for p in payloads for b in frame_bits(p)]


def test_noise_only_capture_yields_nothing():
    ser, _ = iq_series([0] * 3000, snr_db=10, seed=6)
    assert demodulate_series(ser, 10.0).packets == []
