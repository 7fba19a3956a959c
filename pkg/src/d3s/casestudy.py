"""Bundled self-healing scenario: one failed small cell in a 400 m x 400 m net.

Four corner ground base stations each host a standby rotary drone; the
central GBS serves ten randomly placed UEs and is the one that fails.  A
tethered helikite (300 m altitude, 2.25 W budget, 45 min setup) covers
long-term outages.  UE placement is seed-controlled; everything else is
deterministic.
"""
from __future__ import annotations

import math

import numpy as np

from .fleet import Uav, drone_spec, helikite_spec
from .radio import RadioConfig, SpectrumMode
from .scenario import (
    Channel,
    ChannelSet,
    ChargingStation,
    Continuity,
    Geography,
    GroundBaseStation,
    RequestType,
    Scenario,
    ServiceRequest,
    StationaryDevice,
)

AREA = (0.0, 0.0, 400.0, 400.0)
CENTER = (200.0, 200.0)
UE_COUNT = 10
UE_DISC_RADIUS_M = 150.0
UE_MIN_RATE_BPS = 16e6
CHANNEL_COUNT = 12
CHANNEL_WIDTH_HZ = 1e6
CORNERS = ((40.0, 40.0), (360.0, 40.0), (40.0, 360.0), (360.0, 360.0))
FAILED_GBS_ID = "gbs5"


def case_study_scenario(
    seed: int,
    n_drones: int = 4,
    drone_power_w: float = 2.0,
    include_helikite: bool = True,
    spectrum: SpectrumMode = SpectrumMode.OFDMA,
    window_s: tuple[float, float] = (0.0, 14400.0),
) -> Scenario:
    """Seeded instance of the self-healing case study (before failure injection)."""
    rng = np.random.default_rng(seed)
    radii = UE_DISC_RADIUS_M * np.sqrt(rng.uniform(0.0, 1.0, UE_COUNT))
    angles = rng.uniform(0.0, 2.0 * math.pi, UE_COUNT)
    devices = tuple(
        StationaryDevice(
            id=f"ue{i + 1}",
            position=(
                float(CENTER[0] + radii[i] * math.cos(angles[i])),
                float(CENTER[1] + radii[i] * math.sin(angles[i])),
            ),
            min_rate_bps=UE_MIN_RATE_BPS,
        )
        for i in range(UE_COUNT)
    )
    channels = ChannelSet(
        channels=tuple(
            Channel(center_hz=2.0e9 + k * 1.2 * CHANNEL_WIDTH_HZ, width_hz=CHANNEL_WIDTH_HZ)
            for k in range(CHANNEL_COUNT)
        ),
        mode=spectrum,
    )
    gbs = tuple(
        GroundBaseStation(id=f"gbs{i + 1}", position=c, coverage_radius_m=60.0)
        for i, c in enumerate(CORNERS)
    ) + (
        GroundBaseStation(id=FAILED_GBS_ID, position=CENTER, coverage_radius_m=160.0),
    )
    stations = (
        ChargingStation(position=CORNERS[0], capacity=2, recharge_rate_w=50.0),
        ChargingStation(position=CORNERS[1], capacity=2, recharge_rate_w=50.0),
    )
    drones = tuple(
        Uav(
            id=f"dbs{i + 1}",
            spec=drone_spec(
                battery_energy_j=150e3,
                hover_power_w=10.0,
                travel_power_w=15.0,
                speed_max_ms=10.0,
                comm_power_max_w=drone_power_w,
            ),
            start_position=(CORNERS[i][0], CORNERS[i][1], 0.0),
        )
        for i in range(n_drones)
    )
    fleet = drones
    if include_helikite:
        fleet = fleet + (
            Uav(id="hel1", spec=helikite_spec(), start_position=(CENTER[0], CENTER[1], 0.0)),
        )
    request = ServiceRequest(
        request_type=RequestType.SELF_HEALING,
        epicenter=CENTER,
        coverage_radius_m=160.0,
        required_bandwidth_hz=channels.total_width_hz,
        window_s=window_s,
        continuity=Continuity.CONTINUOUS,
    )
    return Scenario(
        request=request,
        devices=devices,
        mobiles=(),
        channels=channels,
        geography=Geography(
            area=AREA, charging_stations=stations, restricted_zones=(), gbs=gbs
        ),
        fleet=fleet,
        radio=RadioConfig(),
        seed=seed,
    )
