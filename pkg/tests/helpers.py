"""Small builders shared by the test modules."""

from __future__ import annotations

import numpy as np

from airfi.channel_sim import ChannelModel, synthesize_iq
from airfi.demod import DemodConfig, power_series
from airfi.modem_tx import BitSchedule, EmissionTimeline, simulate_emission

CARRIER = 2424.0


def iq_series(bits, bit_time_ms=10.0, snr_db=20.0, seed=0, fs=32000.0, pad_samples=0):
    """Power series of an IQ capture; ``pad_samples`` of silence are prepended."""
    tl = simulate_emission(BitSchedule(tuple(bits), bit_time_ms), fs)
    if pad_samples:
        tl = EmissionTimeline(fs, np.concatenate([np.zeros(pad_samples), tl.envelope]))
    stream = synthesize_iq(tl, ChannelModel(CARRIER, snr_db, noise_seed=seed), fs)
    cfg = DemodConfig.for_stream(stream, CARRIER, bit_time_ms)
    return power_series(stream, cfg), cfg
