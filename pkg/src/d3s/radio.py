"""Free-space channel gain, SINR and Shannon-rate computations.

All functions here are stateless and safe to call from any thread.
Positions are 3-D (x, y, z) in meters, powers in watts, frequencies in Hz,
rates in bit/s.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

SPEED_OF_LIGHT = 299_792_458.0  # m/s

DEFAULT_CARRIER_HZ = 2.0e9
DEFAULT_NOISE_DENSITY_DBM_HZ = -174.0  # thermal noise floor


class RadioError(ValueError):
    """Invalid radio geometry or configuration."""


class SpectrumMode(enum.Enum):
    SHARED = "shared"
    OFDMA = "ofdma"


@dataclass(frozen=True)
class RadioConfig:
    carrier_frequency_hz: float = DEFAULT_CARRIER_HZ
    noise_density_dbm_hz: float = DEFAULT_NOISE_DENSITY_DBM_HZ
    pathloss_model: str = "free_space"

    def __post_init__(self):
        if self.carrier_frequency_hz <= 0:
            raise RadioError("carrier_frequency_hz must be > 0")
        if self.noise_density_dbm_hz >= 0:
            raise RadioError("noise_density_dbm_hz must be < 0 dBm/Hz")
        if self.pathloss_model != "free_space":
            raise RadioError(f"unknown pathloss_model {self.pathloss_model!r}")

    @property
    def noise_density_w_hz(self) -> float:
        return 10.0 ** ((self.noise_density_dbm_hz - 30.0) / 10.0)


@dataclass(frozen=True)
class Link:
    """One directed transmission: tx -> rx at tx_power_w on a channel id."""

    tx_position: tuple[float, float, float]
    rx_position: tuple[float, float, float]
    tx_power_w: float
    channel: int = 0

    def __post_init__(self):
        if self.tx_power_w < 0:
            raise RadioError("tx_power_w must be >= 0")
        if tuple(self.tx_position) == tuple(self.rx_position):
            raise RadioError("tx and rx positions must be distinct")


def distance(a, b) -> float:
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2)


def channel_gain(tx, rx, config: RadioConfig) -> float:
    """Linear free-space power gain (c / 4 pi d f)^2; always <= 1 beyond ~2 cm."""
    d = distance(tx, rx)
    if d <= 0.0:
        raise RadioError("zero tx-rx distance: channel gain is singular")
    amp = SPEED_OF_LIGHT / (4.0 * math.pi * d * config.carrier_frequency_hz)
    return amp * amp


def sinr(
    target: Link,
    interferers: list[Link],
    config: RadioConfig,
    mode: SpectrumMode,
    bandwidth_hz: float,
) -> float:
    """Linear SINR at the target receiver.

    Interference is summed over co-channel links only; under OFDMA channel
    assignments are orthogonal so the interference term is zero by definition.
    """
    if bandwidth_hz <= 0:
        raise RadioError("bandwidth_hz must be > 0")
    signal = target.tx_power_w * channel_gain(target.tx_position, target.rx_position, config)
    noise = config.noise_density_w_hz * bandwidth_hz
    interference = 0.0
    if mode is SpectrumMode.SHARED:
        for link in interferers:
            if link.channel != target.channel:
                continue
            interference += link.tx_power_w * channel_gain(
                link.tx_position, target.rx_position, config
            )
    return signal / (noise + interference)


def achievable_rate(bandwidth_hz: float, sinr_linear: float) -> float:
    """Shannon capacity B * log2(1 + SINR) in bit/s."""
    if bandwidth_hz <= 0:
        raise RadioError("bandwidth_hz must be > 0")
    if sinr_linear < 0:
        raise RadioError("sinr must be >= 0")
    return bandwidth_hz * math.log2(1.0 + sinr_linear)


def invert_rate(rate_bps: float, bandwidth_hz: float) -> float:
    """SINR required for a target Shannon rate on a channel of given width."""
    if bandwidth_hz <= 0:
        raise RadioError("bandwidth_hz must be > 0")
    if rate_bps <= 0:
        return 0.0
    return 2.0 ** (rate_bps / bandwidth_hz) - 1.0
