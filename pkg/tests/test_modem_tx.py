from __future__ import annotations

import numpy as np
import pytest

from airfi.codec import Packet, encode_packet
from airfi.modem_tx import (
    OFF,
    ON,
    ActivityLog,
    BitSchedule,
    bit_time_ms_for_rate,
    build_schedule,
    measure_duty_cycle,
    simulate_emission,
)


def test_single_frame_duration():
    s = build_schedule([encode_packet(Packet(1))], 100.0)
    assert len(s) == 48
    assert s.duration_s == pytest.approx(4.8)


def test_two_frames_with_gap():
    f = encode_packet(Packet(7))
    s = build_schedule([f, f], 10.0, inter_frame_gap_bits=8)
    assert len(s) == 104
    assert s.bits[48:56] == (0,) * 8


def test_empty_frame_list():
    assert len(build_schedule([], 10.0, 8)) == 0


@pytest.mark.parametrize("rate,ms", [(1, 1000), (10, 100), (100, 10), (16, 62.5)])
def test_bit_rate_presets(rate, ms):
    assert bit_time_ms_for_rate(rate) == pytest.approx(ms)


def test_bad_bit_time():
    with pytest.raises(ValueError):
        BitSchedule((1, 0), 0)
    with pytest.raises(ValueError):
        build_schedule([], -1)


def test_alternating_envelope():
    tl = simulate_emission(BitSchedule((1, 0) * 4, 100.0), 1000)
    assert len(tl.envelope) == 800
    blocks = tl.envelope.reshape(8, 100)
    assert np.all(blocks[0::2] == 1) and np.all(blocks[1::2] == 0)


def test_all_zero_and_contiguous_on():
    assert not simulate_emission(BitSchedule((0,) * 5, 10.0), 1000).envelope.any()
    env = simulate_emission(BitSchedule((1, 1), 10.0), 1000).envelope
    assert env.tolist() == [1.0] * 20


def test_envelope_is_indicator_of_ones():
    rng = np.random.default_rng(0)
    for fs in (1000, 1234.5, 8000):
        bits = tuple(rng.integers(0, 2, 200))
        s = BitSchedule(bits, 10.0)
        tl = simulate_emission(s, fs)
        spb = s.bit_time_ms * fs / 1000
        assert abs(tl.duration_s - s.duration_s) <= 1 / fs
        if float(spb).is_integer():
            assert tl.envelope.sum() == sum(bits) * spb


def test_undersampled_rate_rejected():
    with pytest.raises(ValueError):
        simulate_emission(BitSchedule((1, 0), 10.0), 150)


def test_value_at_outside_is_off():
    tl = simulate_emission(BitSchedule((1,), 10.0), 1000)
    assert tl.value_at([-0.001, 0.0, 0.005, 0.02]).tolist() == [0, 1, 1, 0]


def test_duty_cycle_empty_log():
    assert measure_duty_cycle(ActivityLog([]), 100.0, 3) == [0, 0, 0]


def test_duty_cycle_sixty_percent():
    log = ActivityLog([(40_000_000, ON), (100_000_000, OFF)])
    assert measure_duty_cycle(log, 100.0, 2) == [1, 0]
    log = ActivityLog([(60_000_000, ON), (100_000_000, OFF)])
    assert measure_duty_cycle(log, 100.0, 1) == [0]


def test_duty_cycle_synthetic_log():
    bits = [1, 0, 1, 1, 0, 0, 1, 0]
    trans, prev = [], 0
    for k, b in enumerate(bits):
        if b != prev:
            trans.append((k * 10_000_000 + 137, ON if b else OFF))
            prev = b
    log = ActivityLog(trans, duration_ns=80_000_000)
    assert measure_duty_cycle(log, 10.0) == bits


def test_log_invariants():
    with pytest.raises(ValueError):
        ActivityLog([(0, ON), (5, ON)])
    with pytest.raises(ValueError):
        ActivityLog([(10, ON), (10, OFF)])


def test_log_jsonl_round_trip(tmp_path):
    log = ActivityLog([(5, ON), (100, OFF), (250, ON), (300, OFF)])
    p = tmp_path / "act.jsonl"
    log.write_jsonl(p)
    assert p.read_text().splitlines()[0] == '{"t_ns": 5, "state": "ON"}'
    back = ActivityLog.read_jsonl(p)
    assert back.transitions == log.transitions
