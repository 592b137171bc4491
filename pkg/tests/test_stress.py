"""Wall-clock tests of the memory-stress transmitter.

They need an otherwise idle machine and are skipped when CI is set.
"""

from __future__ import annotations

import os
import threading

import numpy as np
import pytest

from airfi.codec import Packet, encode_packet
from airfi.modem_tx import OFF, ON, BitSchedule, build_schedule, measure_duty_cycle
from airfi.stress import run_stress_transmitter

timing = pytest.mark.skipif(bool(os.environ.get("CI")), reason="timing test; shared runner")
MS = 1_000_000


def test_empty_schedule():
    log = run_stress_transmitter(BitSchedule((), 100.0))
    assert log.transitions == []


def test_bad_worker_count():
    with pytest.raises(ValueError):
        run_stress_transmitter(BitSchedule((1,), 10.0), workers=0)


@pytest.mark.timing
@timing
def test_one_zero_at_100ms():
    log = run_stress_transmitter(BitSchedule((1, 0), 100.0))
    (t_on, s_on), (t_off, s_off) = log.transitions
    assert (s_on, s_off) == (ON, OFF)
    assert abs(t_on) < 5 * MS
    assert abs(t_off - 100 * MS) < 5 * MS
    assert abs(log.duration_ns - 200 * MS) < 5 * MS
    assert max(abs(e) for e in log.boundary_errors_ns) < 5 * MS
    assert log.affinity  # outcome of the binding request is recorded


@pytest.mark.timing
@timing
def test_closed_loop_alternating():
    s = BitSchedule((1, 0) * 4, 100.0)
    log = run_stress_transmitter(s)
    assert measure_duty_cycle(log, 100.0, len(s)) == list(s.bits)


@pytest.mark.timing
@timing
def test_no_drift_across_frame():
    s = build_schedule([encode_packet(Packet(0xC0FFEE11))], 50.0)
    log = run_stress_transmitter(s)
    err = np.abs(np.asarray(log.boundary_errors_ns, dtype=float))
    half = len(err) // 2
    # late boundaries are not systematically worse than early ones; medians
    # ignore the odd preemption spike from the host
    assert np.median(err[half:]) - np.median(err[:half]) < 0.5 * MS


@pytest.mark.timing
@timing
@pytest.mark.skipif((os.cpu_count() or 1) < 4, reason="needs 4 cores for 4 busy workers")
def test_four_workers_align_with_one():
    s = BitSchedule((1, 0, 1, 1, 0), 100.0)
    one = run_stress_transmitter(s, workers=1)
    four = run_stress_transmitter(s, workers=4)
    assert len(one.transitions) == len(four.transitions)
    for (a, _), (b, _) in zip(one.transitions, four.transitions):
        assert abs(a - b) < 10 * MS


def test_four_workers_decode_even_when_oversubscribed():
    # with more workers than cores boundaries slip, but the bits survive
    s = BitSchedule((1, 0, 1, 1, 0, 0), 100.0)
    log = run_stress_transmitter(s, workers=4, bind_cores=False)
    assert log.worker_count == 4
    assert measure_duty_cycle(log, 100.0, len(s)) == list(s.bits)


def test_one_transmission_per_process():
    s = BitSchedule((1,) * 3, 100.0)
    errors = []

    def second():
        try:
            run_stress_transmitter(BitSchedule((1,), 10.0))
        except RuntimeError as exc:
            errors.append(exc)

    t = threading.Timer(0.05, second)
    t.start()
    run_stress_transmitter(s)
    t.join()
    assert len(errors) == 1
