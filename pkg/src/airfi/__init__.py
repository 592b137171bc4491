"""Simulated memory-bus OOK covert channel received through Wi-Fi spectral data."""

from __future__ import annotations

__version__ = "0.1.0"

from .codec import DecodeError, DecodeErrorKind, Frame, Packet, crc8, decode_frame, encode_packet
from .harness import BerReport, ExperimentConfig, run_ber_sweep

__all__ = [
    "BerReport",
    "DecodeError",
    "DecodeErrorKind",
    "ExperimentConfig",
    "Frame",
    "Packet",
    "crc8",
    "decode_frame",
    "encode_packet",
    "run_ber_sweep",
]
