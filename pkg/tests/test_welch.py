from __future__ import annotations

import numpy as np
import pytest
from scipy import signal

from airfi.demod import DemodConfig, hann, welch, welch_psd
from oracles import hann_periodogram_loop


def tapered_mean_square(x, nperseg):
    """Taper-weighted mean square sum(|x w|^2) / sum(w^2), averaged over segments."""
    w = hann(nperseg)
    step = nperseg - nperseg // 2
    vals = [
        np.sum(np.abs(x[s : s + nperseg] * w) ** 2) / np.sum(w**2)
        for s in range(0, len(x) - nperseg + 1, step)
    ]
    return float(np.mean(vals))


def test_matches_loop_oracle():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(640) + 1j * rng.standard_normal(640)
    assert np.allclose(welch(x, 64, 0.5, 8000.0), hann_periodogram_loop(x, 64, 8000.0), rtol=1e-9)


def test_matches_scipy():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(1000) + 1j * rng.standard_normal(1000)
    _, ref = signal.welch(
        x, fs=500.0, window="hann", nperseg=40, noverlap=20, detrend=False,
        return_onesided=False, scaling="density",
    )
    assert np.allclose(welch(x, 40, 0.5, 500.0), ref, rtol=1e-9)


@pytest.mark.parametrize("k", range(56))
def test_tone_argmax_is_its_bin(k):
    n = np.arange(560)
    x = np.exp(2j * np.pi * k * n / 56)
    assert int(np.argmax(welch(x, 56))) == k


def test_zero_input():
    assert not welch(np.zeros(128), 16).any()


def test_parseval_random_inputs():
    rng = np.random.default_rng(3)
    fs = 1000.0
    for _ in range(50):
        seg = int(rng.integers(8, 128))
        x = rng.standard_normal(seg * 10) * rng.uniform(0.1, 10) + 1j * rng.standard_normal(seg * 10)
        psd = welch(x, seg, 0.5, fs)
        total = psd.sum() * fs / seg
        assert total == pytest.approx(tapered_mean_square(x, seg), rel=0.01)


def test_variance_reduction_64_segments():
    nperseg = 32
    n = nperseg * 65 // 2  # 64 half-overlapping segments
    avg, single = [], []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        avg.append(welch(x, nperseg))
        single.append(welch(x[:nperseg], nperseg))
    ratio = np.var(single, axis=0).mean() / np.var(avg, axis=0).mean()
    assert ratio >= 32


def test_short_window_rejected():
    with pytest.raises(ValueError):
        welch(np.zeros(10), 16)
    cfg = DemodConfig(8000, 10.0, 20)
    with pytest.raises(ValueError):
        welch_psd(np.zeros(19), cfg)


def test_welch_psd_bin_count():
    cfg = DemodConfig(32000, 10.0, 80)
    assert len(welch_psd(np.ones(80, complex), cfg)) == cfg.welch_segment == 10


def test_config_validation():
    with pytest.raises(ValueError):
        DemodConfig(8000, 10.0, 21)  # fewer than 4 windows per bit
    with pytest.raises(ValueError):
        DemodConfig(8000, 10.0, 20, corr_thresh=1.0)
    with pytest.raises(ValueError):
        DemodConfig(8000, 10.0, 20, buffer_size=10)
    assert DemodConfig(8000, 10.0, 20).buffer_size == 1280
