"""UAV platform descriptions shared by the scenario and dimensioning layers."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class FleetError(ValueError):
    pass


class UavKind(enum.Enum):
    ROTARY_DRONE = "rotary_drone"
    HELIKITE = "helikite"
    AIRSHIP = "airship"
    BALLOON = "balloon"


class Term(enum.Enum):
    SHORT = "short"
    LONG = "long"


HELIKITE_DEPLOY_DELAY_S = 2700.0  # setup takes up to 45 minutes


@dataclass(frozen=True)
class UavSpec:
    """Physical, energy and radio parameters of one UAV type.

    battery_energy_j is math.inf for tethered platforms (helikite), which are
    powered continuously through the tether.
    """

    kind: UavKind
    battery_energy_j: float
    hover_power_w: float
    travel_power_w: float
    speed_max_ms: float
    altitude_min_m: float
    altitude_max_m: float
    comm_power_max_w: float
    deploy_delay_s: float
    term: Term

    def __post_init__(self):
        if self.comm_power_max_w <= 0:
            raise FleetError("comm_power_max_w must be > 0")
        if self.term is Term.SHORT and not math.isfinite(self.battery_energy_j):
            raise FleetError("short-term platforms need a finite battery_energy_j")
        if self.battery_energy_j <= 0:
            raise FleetError("battery_energy_j must be > 0")
        if self.hover_power_w < 0 or self.travel_power_w < 0:
            raise FleetError("hover/travel power must be >= 0")
        if self.speed_max_ms < 0:
            raise FleetError("speed_max_ms must be >= 0")
        if not 0 <= self.altitude_min_m <= self.altitude_max_m:
            raise FleetError("altitude range must satisfy 0 <= min <= max")
        if self.deploy_delay_s < 0:
            raise FleetError("deploy_delay_s must be >= 0")

    @property
    def tethered(self) -> bool:
        return not math.isfinite(self.battery_energy_j)


@dataclass(frozen=True)
class Uav:
    """A concrete fleet member: spec plus standby (start) position."""

    id: str
    spec: UavSpec
    start_position: tuple[float, float, float]


def drone_spec(
    battery_energy_j: float = 900e3,
    hover_power_w: float = 150.0,
    travel_power_w: float = 200.0,
    speed_max_ms: float = 10.0,
    altitude_min_m: float = 50.0,
    altitude_max_m: float = 200.0,
    comm_power_max_w: float = 2.0,
    deploy_delay_s: float = 0.0,
) -> UavSpec:
    """Rotary-wing drone defaults used by the bundled scenarios."""
    return UavSpec(
        kind=UavKind.ROTARY_DRONE,
        battery_energy_j=battery_energy_j,
        hover_power_w=hover_power_w,
        travel_power_w=travel_power_w,
        speed_max_ms=speed_max_ms,
        altitude_min_m=altitude_min_m,
        altitude_max_m=altitude_max_m,
        comm_power_max_w=comm_power_max_w,
        deploy_delay_s=deploy_delay_s,
        term=Term.SHORT,
    )


def helikite_spec(
    hover_power_w: float = 0.0,
    altitude_m: float = 300.0,
    comm_power_max_w: float = 2.25,
    deploy_delay_s: float = HELIKITE_DEPLOY_DELAY_S,
) -> UavSpec:
    """Tethered helikite defaults: unbounded energy, slow to deploy."""
    return UavSpec(
        kind=UavKind.HELIKITE,
        battery_energy_j=math.inf,
        hover_power_w=hover_power_w,
        travel_power_w=0.0,
        speed_max_ms=0.0,
        altitude_min_m=altitude_m,
        altitude_max_m=altitude_m,
        comm_power_max_w=comm_power_max_w,
        deploy_delay_s=deploy_delay_s,
        term=Term.LONG,
    )
