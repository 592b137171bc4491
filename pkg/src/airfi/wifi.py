"""2.4 GHz 802.11b/g/n channel plan and DDR emission placement."""

from __future__ import annotations

from dataclasses import dataclass

BAND_LOW_MHZ = 2300.0
BAND_HIGH_MHZ = 2600.0
INTERFERENCE_MARGIN_MHZ = 10.0


@dataclass(frozen=True, slots=True)
class WifiChannel:
    index: int
    center_mhz: int
    low_mhz: int
    high_mhz: int
    allowed_north_america: bool
    allowed_japan: bool
    # regulatory column text as printed in the channel plan
    north_america: str = "Yes"
    japan: str = "Yes"
    others: str = "Yes"

    def contains(self, freq_mhz: float) -> bool:
        return self.low_mhz <= freq_mhz <= self.high_mhz


def _row(index, center, low, high, na, jp, others):
    return WifiChannel(
        index=index,
        center_mhz=center,
        low_mhz=low,
        high_mhz=high,
        allowed_north_america=na == "Yes",
        allowed_japan=jp != "No",
        north_america=na,
        japan=jp,
        others=others,
    )


CHANNELS: tuple[WifiChannel, ...] = (
    _row(1, 2412, 2401, 2423, "Yes", "Yes", "Yes"),
    _row(2, 2417, 2406, 2428, "Yes", "Yes", "Yes"),
    _row(3, 2422, 2411, 2433, "Yes", "Yes", "Yes"),
    _row(4, 2427, 2416, 2438, "Yes", "Yes", "Yes"),
    _row(5, 2432, 2421, 2443, "Yes", "Yes", "Yes"),
    _row(6, 2437, 2426, 2448, "Yes", "Yes", "Yes"),
    _row(7, 2442, 2431, 2453, "Yes", "Yes", "Yes"),
    _row(8, 2447, 2436, 2458, "Yes", "Yes", "Yes"),
    _row(9, 2452, 2441, 2463, "Yes", "Yes", "Yes"),
    _row(10, 2457, 2446, 2468, "Yes", "Yes", "Yes"),
    _row(11, 2462, 2451, 2473, "Yes", "Yes", "Yes"),
    _row(12, 2467, 2456, 2478, "Canada only", "Yes", "Yes"),
    _row(13, 2472, 2461, 2483, "No", "Yes", "Yes"),
    _row(14, 2484, 2473, 2495, "No", "11b only", "No"),
)


def channel(index: int) -> WifiChannel:
    if not 1 <= index <= len(CHANNELS):
        raise ValueError(f"no 2.4 GHz channel {index}")
    return CHANNELS[index - 1]


@dataclass(frozen=True)
class Overlap:
    """Channels touched by a narrowband emission.

    ``strict``: the channel's range intersects the emission band.
    ``interference``: the channel's center lies within the interference
    margin of the emission band (a proxy for adjacent-channel pickup).
    """

    strict: list[WifiChannel]
    interference: list[WifiChannel]

    @property
    def strict_indices(self) -> list[int]:
        return [c.index for c in self.strict]

    @property
    def interference_indices(self) -> list[int]:
        return [c.index for c in self.interference]


def overlapping_channels(
    carrier_mhz: float,
    bandwidth_hz: float = 1000.0,
    margin_mhz: float = INTERFERENCE_MARGIN_MHZ,
) -> Overlap:
    if bandwidth_hz < 0:
        raise ValueError("bandwidth must be non-negative")
    if not BAND_LOW_MHZ <= carrier_mhz <= BAND_HIGH_MHZ:
        return Overlap([], [])
    half = bandwidth_hz / 2e6
    lo, hi = carrier_mhz - half, carrier_mhz + half
    strict = [c for c in CHANNELS if c.low_mhz <= hi and c.high_mhz >= lo]
    reach = margin_mhz + half
    interference = [c for c in CHANNELS if abs(c.center_mhz - carrier_mhz) <= reach]
    return Overlap(strict, interference)


@dataclass(frozen=True, slots=True)
class DdrConfig:
    clock_rate_mhz: float
    line_width_bits: int = 64
    harmonic: int = 1

    def __post_init__(self) -> None:
        if self.clock_rate_mhz < 0:
            raise ValueError("clock_rate_mhz must be non-negative")
        if self.line_width_bits not in (16, 32, 64):
            raise ValueError("line_width_bits must be 16, 32 or 64")
        if self.harmonic < 1:
            raise ValueError("harmonic must be >= 1")

    def reclocked(self, clock_rate_mhz: float) -> "DdrConfig":
        """Same module run at a different bus clock (over/underclocking)."""
        return DdrConfig(clock_rate_mhz, self.line_width_bits, self.harmonic)


def ddr_bandwidth(cfg: DdrConfig) -> float:
    """Bus bandwidth f*2*l/8 for clock f (MHz) and line width l (bits)."""
    return cfg.clock_rate_mhz * 2 * cfg.line_width_bits / 8


def ddr_emission_frequency(cfg: DdrConfig) -> float:
    return cfg.clock_rate_mhz * cfg.harmonic
