"""Memory-bus stress transmitter.

Each worker owns two 1 MB buffers and, during a '1' bit, copies them back
and forth until the bit deadline; during a '0' bit it sleeps. A governor
(the calling thread) owns the clock origin and timestamps every boundary.
All parties meet at a barrier at every bit boundary, so a slow worker delays
the boundary instead of bleeding into the next bit. Deadlines are accumulated (end += bit_time) rather than slept
relative to "now", so timing error does not build up over a long frame.
"""

from __future__ import annotations

import logging
import os
import sys
import threading
import time

import numpy as np

from .modem_tx import OFF, ON, ActivityLog, BitSchedule

log = logging.getLogger(__name__)

BUFFER_BYTES = 1 << 20
SPIN_TAIL_NS = 1_000_000
VIOLATION_FRACTION = 0.10

_transmit_lock = threading.Lock()


def _wait_until(deadline_ns: int) -> None:
    """Coarse sleep, then spin through the last millisecond."""
    while True:
        remaining = deadline_ns - time.perf_counter_ns()
        if remaining <= 0:
            return
        if remaining > SPIN_TAIL_NS:
            time.sleep((remaining - SPIN_TAIL_NS) / 1e9)


def _bind_to_core(index: int) -> str:
    if not hasattr(os, "sched_setaffinity"):
        return "unbound: platform has no sched_setaffinity"
    try:
        cpus = sorted(os.sched_getaffinity(0))
        cpu = cpus[index % len(cpus)]
        os.sched_setaffinity(0, {cpu})
        return f"cpu{cpu}"
    except OSError as exc:
        return f"unbound: {exc}"


class _Transmission:
    def __init__(self, bits: tuple[int, ...], bit_ns: int, workers: int, bind_cores: bool):
        self.bits = bits
        self.bit_ns = bit_ns
        self.workers = workers
        self.bind_cores = bind_cores
        self.barrier = threading.Barrier(workers + 1)
        self.t0 = 0
        self.affinity: dict[int, str] = {}
        self.copies = [0] * workers

    def worker(self, index: int) -> None:
        if self.bind_cores:
            self.affinity[index] = _bind_to_core(index)
        else:
            self.affinity[index] = "unbound: disabled"
        a = np.ones(BUFFER_BYTES, dtype=np.uint8)
        b = np.zeros(BUFFER_BYTES, dtype=np.uint8)
        copies = 0
        try:
            self.barrier.wait()  # ready; the governor sets t0 before the next wait
            for k, bit in enumerate(self.bits):
                self.barrier.wait()  # bit start
                deadline = self.t0 + (k + 1) * self.bit_ns
                if bit:
                    # an in-flight copy pair is finished before stopping
                    while time.perf_counter_ns() < deadline:
                        np.copyto(b, a)
                        np.copyto(a, b)
                        copies += 2
                else:
                    _wait_until(deadline)
            self.barrier.wait()  # end of the last bit
        except threading.BrokenBarrierError:
            pass
        self.copies[index] = copies


def run_stress_transmitter(
    s: BitSchedule, workers: int = 1, bind_cores: bool = True
) -> ActivityLog:
    """Transmit ``s`` by modulating memory traffic and return the measured log.

    Only one transmission may run per process at a time; a concurrent call
    raises RuntimeError.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if not s.bits:
        return ActivityLog([], worker_count=workers, duration_ns=0)
    if not _transmit_lock.acquire(blocking=False):
        raise RuntimeError("a stress transmission is already running in this process")

    old_switch = sys.getswitchinterval()
    bit_ns = int(round(s.bit_time_ms * 1e6))
    tx = _Transmission(s.bits, bit_ns, workers, bind_cores)
    threads = [
        threading.Thread(target=tx.worker, args=(i,), name=f"airfi-worker-{i}", daemon=True)
        for i in range(workers)
    ]
    transitions: list[tuple[int, str]] = []
    errors: list[int] = []
    violations: list[int] = []
    try:
        sys.setswitchinterval(0.0005)
        for t in threads:
            t.start()
        tx.barrier.wait()  # all workers allocated and ready
        t0 = tx.t0 = time.perf_counter_ns()

        # The governor only timestamps boundaries. It blocks in the barrier,
        # which opens when the last worker reaches the bit deadline, so it
        # never competes with the workers for CPU.
        state = OFF
        for k, bit in enumerate(s.bits):
            tx.barrier.wait()
            now = time.perf_counter_ns() - t0
            err = now - k * bit_ns
            errors.append(err)
            if abs(err) > VIOLATION_FRACTION * bit_ns:
                violations.append(k)
            new_state = ON if bit else OFF
            if new_state != state:
                transitions.append((now, new_state))
                state = new_state

        tx.barrier.wait()
        end = time.perf_counter_ns() - t0
        err = end - len(s.bits) * bit_ns
        errors.append(err)
        if abs(err) > VIOLATION_FRACTION * bit_ns:
            violations.append(len(s.bits))
        if state == ON:
            transitions.append((end, OFF))
        for t in threads:
            t.join()
    except BaseException:
        tx.barrier.abort()
        raise
    finally:
        sys.setswitchinterval(old_switch)
        _transmit_lock.release()

    if violations:
        log.warning("%d bit boundaries missed by more than 10%% of bit time", len(violations))
    return ActivityLog(
        transitions,
        worker_count=workers,
        duration_ns=end,
        boundary_errors_ns=errors,
        timing_violations=violations,
        affinity=dict(tx.affinity),
    )
