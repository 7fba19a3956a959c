"""Demand-phase model: service requests, device sets, channels and geography.

Scenario files are strict YAML (unknown keys are errors) with top-level
sections ``request``, ``devices``, ``mobiles``, ``channels``, ``geography``,
``fleet``, ``radio`` and ``seed``.  Units: meters, bit/s, watts, Hz, seconds.
All types are frozen; every operation returns new values.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import yaml
from shapely.geometry import Polygon

from .fleet import Term, Uav, UavKind, UavSpec
from .radio import RadioConfig, SpectrumMode

_REL_EPS = 1e-9


class ScenarioError(ValueError):
    pass


class ParseError(ScenarioError):
    def __init__(self, message: str, path: str = "", line: int | None = None):
        self.path = path
        self.line = line
        where = f" at {path}" if path else ""
        where += f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


class ValidationError(ScenarioError):
    pass


class OutOfWindowError(ScenarioError):
    pass


class RequestType(enum.Enum):
    DISASTER_RECOVERY = "disaster_recovery"
    SELF_HEALING = "self_healing"
    BANDWIDTH_BOOST = "bandwidth_boost"


class Continuity(enum.Enum):
    CONTINUOUS = "continuous"
    INTERMITTENT = "intermittent"


class FailureClass(enum.Enum):
    SHORT_TERM = "short_term"
    LONG_TERM = "long_term"


@dataclass(frozen=True)
class ServiceRequest:
    request_type: RequestType
    epicenter: tuple[float, float]
    coverage_radius_m: float
    required_bandwidth_hz: float
    window_s: tuple[float, float]
    continuity: Continuity

    def __post_init__(self):
        if self.coverage_radius_m <= 0:
            raise ValidationError("coverage_radius_m must be > 0")
        if self.required_bandwidth_hz <= 0:
            raise ValidationError("required_bandwidth_hz must be > 0")
        if self.window_s[1] <= self.window_s[0]:
            raise ValidationError("service window end must be after start")


@dataclass(frozen=True)
class StationaryDevice:
    id: str
    position: tuple[float, float]
    min_rate_bps: float
    group_id: str | None = None

    def __post_init__(self):
        if self.min_rate_bps <= 0:
            raise ValidationError(f"device {self.id}: min_rate_bps must be > 0")


@dataclass(frozen=True)
class MobileDevice:
    id: str
    waypoints: tuple[tuple[float, tuple[float, float]], ...]
    speed_max_ms: float
    min_rate_bps: float

    def __post_init__(self):
        if self.min_rate_bps <= 0:
            raise ValidationError(f"mobile {self.id}: min_rate_bps must be > 0")
        if self.speed_max_ms < 0:
            raise ValidationError(f"mobile {self.id}: speed_max_ms must be >= 0")
        if not self.waypoints:
            raise ValidationError(f"mobile {self.id}: needs at least one waypoint")
        for (t0, p0), (t1, p1) in zip(self.waypoints, self.waypoints[1:]):
            dt = t1 - t0
            if dt <= 0:
                raise ValidationError(f"mobile {self.id}: waypoint times must increase")
            step = math.dist(p0, p1)
            if step > self.speed_max_ms * dt * (1.0 + _REL_EPS):
                raise ValidationError(
                    f"mobile {self.id}: displacement {step:.3f} m over {dt:.3f} s "
                    f"exceeds speed_max {self.speed_max_ms} m/s"
                )


@dataclass(frozen=True)
class Channel:
    center_hz: float
    width_hz: float

    def __post_init__(self):
        if self.width_hz <= 0:
            raise ValidationError("channel width_hz must be > 0")
        if self.center_hz <= 0:
            raise ValidationError("channel center_hz must be > 0")


@dataclass(frozen=True)
class ChannelSet:
    channels: tuple[Channel, ...]
    mode: SpectrumMode

    def __post_init__(self):
        if not self.channels:
            raise ValidationError("channel set must not be empty")
        if self.mode is SpectrumMode.OFDMA:
            spans = sorted(
                (c.center_hz - c.width_hz / 2, c.center_hz + c.width_hz / 2)
                for c in self.channels
            )
            for (lo0, hi0), (lo1, hi1) in zip(spans, spans[1:]):
                if lo1 < hi0 - _REL_EPS * hi0:
                    raise ValidationError("OFDMA channels must be disjoint in frequency")

    @property
    def total_width_hz(self) -> float:
        return sum(c.width_hz for c in self.channels)


@dataclass(frozen=True)
class ChargingStation:
    position: tuple[float, float]
    capacity: int
    recharge_rate_w: float

    def __post_init__(self):
        if self.capacity < 1:
            raise ValidationError("charging station capacity must be >= 1")
        if self.recharge_rate_w <= 0:
            raise ValidationError("recharge_rate_w must be > 0")


@dataclass(frozen=True)
class GroundBaseStation:
    id: str
    position: tuple[float, float]
    coverage_radius_m: float
    operational: bool = True
    outage_s: tuple[float, float] | None = None  # runtime failure window

    def __post_init__(self):
        if self.coverage_radius_m <= 0:
            raise ValidationError(f"gbs {self.id}: coverage_radius_m must be > 0")

    def operational_at(self, t: float) -> bool:
        if not self.operational:
            return False
        if self.outage_s is not None and self.outage_s[0] <= t < self.outage_s[1]:
            return False
        return True


@dataclass(frozen=True)
class Geography:
    area: tuple[float, float, float, float]  # x_min, y_min, x_max, y_max
    charging_stations: tuple[ChargingStation, ...]
    restricted_zones: tuple[tuple[tuple[float, float], ...], ...]
    gbs: tuple[GroundBaseStation, ...]

    def __post_init__(self):
        x0, y0, x1, y1 = self.area
        if x1 <= x0 or y1 <= y0:
            raise ValidationError("area rectangle must have positive extent")
        for st in self.charging_stations:
            if not self.contains(st.position):
                raise ValidationError(f"charging station at {st.position} outside area")
        for g in self.gbs:
            if not self.contains(g.position):
                raise ValidationError(f"gbs {g.id} outside area")
        for k, zone in enumerate(self.restricted_zones):
            if len(zone) < 3:
                raise ValidationError(f"restricted zone {k} needs >= 3 vertices")
            if not Polygon(zone).is_valid:
                raise ValidationError(f"restricted zone {k} is not a simple polygon")

    def contains(self, p: tuple[float, float]) -> bool:
        x0, y0, x1, y1 = self.area
        return x0 <= p[0] <= x1 and y0 <= p[1] <= y1


@dataclass(frozen=True)
class FailureEvent:
    gbs_id: str
    failure_class: FailureClass
    t_fail_s: float
    duration_s: float
    request: ServiceRequest
    device_ids: tuple[str, ...]


@dataclass(frozen=True)
class Scenario:
    request: ServiceRequest
    devices: tuple[StationaryDevice, ...]
    mobiles: tuple[MobileDevice, ...]
    channels: ChannelSet
    geography: Geography
    fleet: tuple[Uav, ...]
    radio: RadioConfig
    seed: int
    failures: tuple[FailureEvent, ...] = ()

    def __post_init__(self):
        seen: set[str] = set()
        for dev in list(self.devices) + list(self.mobiles) + list(self.fleet):
            if dev.id in seen:
                raise ValidationError(f"duplicate id {dev.id!r}")
            seen.add(dev.id)
        for d in self.devices:
            if not self.geography.contains(d.position):
                raise ValidationError(f"device {d.id} lies outside the area rectangle")
        for m in self.mobiles:
            for _, p in m.waypoints:
                if not self.geography.contains(p):
                    raise ValidationError(f"mobile {m.id} waypoint outside the area rectangle")

    def gbs_by_id(self, gbs_id: str) -> GroundBaseStation:
        for g in self.geography.gbs:
            if g.id == gbs_id:
                return g
        raise ValidationError(f"unknown gbs id {gbs_id!r}")


@dataclass(frozen=True)
class DevicePoint:
    """Snapshot of one device: where it is and what rate it needs."""

    id: str
    position: tuple[float, float]
    min_rate_bps: float


@dataclass(frozen=True)
class DeviceGroup:
    id: str
    member_ids: tuple[str, ...]
    centroid: tuple[float, float]
    total_rate_bps: float


# ---------------------------------------------------------------------------
# strict YAML parsing with line-aware errors
# ---------------------------------------------------------------------------


def _node_line(node) -> int:
    return node.start_mark.line + 1


def _as_mapping(node, path: str) -> dict:
    if not isinstance(node, yaml.MappingNode):
        raise ParseError("expected a mapping", path, _node_line(node))
    out = {}
    for key_node, value_node in node.value:
        key = key_node.value
        if key in out:
            raise ParseError(f"duplicate key {key!r}", path, _node_line(key_node))
        out[key] = (value_node, _node_line(key_node))
    return out


def _as_sequence(node, path: str) -> list:
    if not isinstance(node, yaml.SequenceNode):
        raise ParseError("expected a sequence", path, _node_line(node))
    return node.value


def _scalar(node, path: str):
    if not isinstance(node, yaml.ScalarNode):
        raise ParseError("expected a scalar", path, _node_line(node))
    return yaml.SafeLoader("").construct_object(node)


def _number(node, path: str) -> float:
    v = _scalar(node, path)
    if isinstance(v, str):
        # YAML 1.1 floats need a signed exponent; accept plain "1.0e6" too
        try:
            return float(v)
        except ValueError:
            pass
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ParseError(f"expected a number, got {v!r}", path, _node_line(node))
    return float(v)


def _integer(node, path: str) -> int:
    v = _scalar(node, path)
    if not isinstance(v, int) or isinstance(v, bool):
        raise ParseError(f"expected an integer, got {v!r}", path, _node_line(node))
    return v


def _string(node, path: str) -> str:
    v = _scalar(node, path)
    if not isinstance(v, str):
        raise ParseError(f"expected a string, got {v!r}", path, _node_line(node))
    return v


def _boolean(node, path: str) -> bool:
    v = _scalar(node, path)
    if not isinstance(v, bool):
        raise ParseError(f"expected a boolean, got {v!r}", path, _node_line(node))
    return v


def _point2(node, path: str) -> tuple[float, float]:
    items = _as_sequence(node, path)
    if len(items) != 2:
        raise ParseError("expected [x, y]", path, _node_line(node))
    return (_number(items[0], path), _number(items[1], path))


def _point3(node, path: str) -> tuple[float, float, float]:
    items = _as_sequence(node, path)
    if len(items) != 3:
        raise ParseError("expected [x, y, z]", path, _node_line(node))
    return tuple(_number(n, path) for n in items)  # type: ignore[return-value]


def _enum(node, path: str, enum_cls):
    raw = _string(node, path)
    try:
        return enum_cls(raw)
    except ValueError:
        allowed = ", ".join(e.value for e in enum_cls)
        raise ParseError(f"{raw!r} is not one of: {allowed}", path, _node_line(node)) from None


def _fields(mapping: dict, path: str, required: list[str], optional: list[str] = ()):
    for key, (_, line) in mapping.items():
        if key not in required and key not in optional:
            raise ParseError(f"unknown field {key!r}", path, line)
    for key in required:
        if key not in mapping:
            raise ParseError(f"missing required field {key!r}", path)
    return {k: v[0] for k, v in mapping.items()}


def _parse_request(node, path: str) -> ServiceRequest:
    f = _fields(
        _as_mapping(node, path),
        path,
        required=[
            "type",
            "epicenter",
            "coverage_radius_m",
            "required_bandwidth_hz",
            "window_s",
            "continuity",
        ],
    )
    window = _as_sequence(f["window_s"], path + ".window_s")
    if len(window) != 2:
        raise ParseError("expected [start, end]", path + ".window_s", _node_line(f["window_s"]))
    return ServiceRequest(
        request_type=_enum(f["type"], path + ".type", RequestType),
        epicenter=_point2(f["epicenter"], path + ".epicenter"),
        coverage_radius_m=_number(f["coverage_radius_m"], path + ".coverage_radius_m"),
        required_bandwidth_hz=_number(f["required_bandwidth_hz"], path + ".required_bandwidth_hz"),
        window_s=(_number(window[0], path), _number(window[1], path)),
        continuity=_enum(f["continuity"], path + ".continuity", Continuity),
    )


def _parse_devices(node, path: str) -> tuple[StationaryDevice, ...]:
    out = []
    for i, item in enumerate(_as_sequence(node, path)):
        p = f"{path}[{i}]"
        f = _fields(
            _as_mapping(item, p), p, required=["id", "position", "min_rate_bps"], optional=["group"]
        )
        out.append(
            StationaryDevice(
                id=_string(f["id"], p + ".id"),
                position=_point2(f["position"], p + ".position"),
                min_rate_bps=_number(f["min_rate_bps"], p + ".min_rate_bps"),
                group_id=_string(f["group"], p + ".group") if "group" in f else None,
            )
        )
    return tuple(out)


def _parse_mobiles(node, path: str) -> tuple[MobileDevice, ...]:
    out = []
    for i, item in enumerate(_as_sequence(node, path)):
        p = f"{path}[{i}]"
        f = _fields(
            _as_mapping(item, p), p, required=["id", "track", "speed_max_ms", "min_rate_bps"]
        )
        track = []
        for j, wp in enumerate(_as_sequence(f["track"], p + ".track")):
            wp_items = _as_sequence(wp, f"{p}.track[{j}]")
            if len(wp_items) != 2:
                raise ParseError("expected [t, [x, y]]", f"{p}.track[{j}]", _node_line(wp))
            track.append(
                (_number(wp_items[0], f"{p}.track[{j}]"), _point2(wp_items[1], f"{p}.track[{j}]"))
            )
        out.append(
            MobileDevice(
                id=_string(f["id"], p + ".id"),
                waypoints=tuple(track),
                speed_max_ms=_number(f["speed_max_ms"], p + ".speed_max_ms"),
                min_rate_bps=_number(f["min_rate_bps"], p + ".min_rate_bps"),
            )
        )
    return tuple(out)


def _parse_channels(node, path: str) -> ChannelSet:
    f = _fields(_as_mapping(node, path), path, required=["mode", "list"])
    channels = []
    for i, item in enumerate(_as_sequence(f["list"], path + ".list")):
        p = f"{path}.list[{i}]"
        cf = _fields(_as_mapping(item, p), p, required=["center_hz", "width_hz"])
        channels.append(
            Channel(
                center_hz=_number(cf["center_hz"], p + ".center_hz"),
                width_hz=_number(cf["width_hz"], p + ".width_hz"),
            )
        )
    return ChannelSet(
        channels=tuple(channels), mode=_enum(f["mode"], path + ".mode", SpectrumMode)
    )


def _parse_geography(node, path: str) -> Geography:
    f = _fields(
        _as_mapping(node, path),
        path,
        required=["area"],
        optional=["charging_stations", "restricted_zones", "gbs"],
    )
    area_items = _as_sequence(f["area"], path + ".area")
    if len(area_items) != 4:
        raise ParseError(
            "expected [x_min, y_min, x_max, y_max]", path + ".area", _node_line(f["area"])
        )
    stations = []
    if "charging_stations" in f:
        for i, item in enumerate(_as_sequence(f["charging_stations"], path + ".charging_stations")):
            p = f"{path}.charging_stations[{i}]"
            sf = _fields(
                _as_mapping(item, p), p, required=["position", "capacity", "recharge_rate_w"]
            )
            stations.append(
                ChargingStation(
                    position=_point2(sf["position"], p + ".position"),
                    capacity=_integer(sf["capacity"], p + ".capacity"),
                    recharge_rate_w=_number(sf["recharge_rate_w"], p + ".recharge_rate_w"),
                )
            )
    zones = []
    if "restricted_zones" in f:
        for i, zone in enumerate(_as_sequence(f["restricted_zones"], path + ".restricted_zones")):
            p = f"{path}.restricted_zones[{i}]"
            zones.append(tuple(_point2(v, p) for v in _as_sequence(zone, p)))
    gbs = []
    if "gbs" in f:
        for i, item in enumerate(_as_sequence(f["gbs"], path + ".gbs")):
            p = f"{path}.gbs[{i}]"
            gf = _fields(
                _as_mapping(item, p),
                p,
                required=["id", "position", "coverage_radius_m"],
                optional=["operational"],
            )
            gbs.append(
                GroundBaseStation(
                    id=_string(gf["id"], p + ".id"),
                    position=_point2(gf["position"], p + ".position"),
                    coverage_radius_m=_number(gf["coverage_radius_m"], p + ".coverage_radius_m"),
                    operational=_boolean(gf["operational"], p + ".operational")
                    if "operational" in gf
                    else True,
                )
            )
    return Geography(
        area=tuple(_number(n, path + ".area") for n in area_items),  # type: ignore[arg-type]
        charging_stations=tuple(stations),
        restricted_zones=tuple(zones),
        gbs=tuple(gbs),
    )


def _parse_fleet(node, path: str) -> tuple[Uav, ...]:
    out = []
    for i, item in enumerate(_as_sequence(node, path)):
        p = f"{path}[{i}]"
        f = _fields(
            _as_mapping(item, p),
            p,
            required=[
                "id",
                "kind",
                "start",
                "battery_j",
                "hover_power_w",
                "travel_power_w",
                "speed_max_ms",
                "altitude_range_m",
                "comm_power_max_w",
                "term",
            ],
            optional=["deploy_delay_s"],
        )
        alt = _as_sequence(f["altitude_range_m"], p + ".altitude_range_m")
        if len(alt) != 2:
            raise ParseError(
                "expected [min, max]", p + ".altitude_range_m", _node_line(f["altitude_range_m"])
            )
        kind = _enum(f["kind"], p + ".kind", UavKind)
        term = _enum(f["term"], p + ".term", Term)
        battery = _number(f["battery_j"], p + ".battery_j")
        if "deploy_delay_s" in f:
            deploy_delay = _number(f["deploy_delay_s"], p + ".deploy_delay_s")
        else:
            deploy_delay = 2700.0 if kind is UavKind.HELIKITE else 0.0
        spec = UavSpec(
            kind=kind,
            battery_energy_j=battery,
            hover_power_w=_number(f["hover_power_w"], p + ".hover_power_w"),
            travel_power_w=_number(f["travel_power_w"], p + ".travel_power_w"),
            speed_max_ms=_number(f["speed_max_ms"], p + ".speed_max_ms"),
            altitude_min_m=_number(alt[0], p + ".altitude_range_m"),
            altitude_max_m=_number(alt[1], p + ".altitude_range_m"),
            comm_power_max_w=_number(f["comm_power_max_w"], p + ".comm_power_max_w"),
            deploy_delay_s=deploy_delay,
            term=term,
        )
        out.append(Uav(id=_string(f["id"], p + ".id"), spec=spec, start_position=_point3(f["start"], p + ".start")))
    return tuple(out)


def _parse_radio(node, path: str) -> RadioConfig:
    f = _fields(
        _as_mapping(node, path),
        path,
        required=[],
        optional=["carrier_frequency_hz", "noise_density_dbm_hz", "pathloss_model"],
    )
    kwargs = {}
    if "carrier_frequency_hz" in f:
        kwargs["carrier_frequency_hz"] = _number(f["carrier_frequency_hz"], path)
    if "noise_density_dbm_hz" in f:
        kwargs["noise_density_dbm_hz"] = _number(f["noise_density_dbm_hz"], path)
    if "pathloss_model" in f:
        kwargs["pathloss_model"] = _string(f["pathloss_model"], path)
    return RadioConfig(**kwargs)


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a scenario file; strict about unknown fields."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML: {exc}") from exc
    if root is None:
        raise ParseError("empty scenario file")
    top = _fields(
        _as_mapping(root, ""),
        "scenario",
        required=["request", "devices", "channels", "geography", "fleet", "seed"],
        optional=["mobiles", "radio"],
    )
    return Scenario(
        request=_parse_request(top["request"], "request"),
        devices=_parse_devices(top["devices"], "devices"),
        mobiles=_parse_mobiles(top["mobiles"], "mobiles") if "mobiles" in top else (),
        channels=_parse_channels(top["channels"], "channels"),
        geography=_parse_geography(top["geography"], "geography"),
        fleet=_parse_fleet(top["fleet"], "fleet"),
        radio=_parse_radio(top["radio"], "radio") if "radio" in top else RadioConfig(),
        seed=_integer(top["seed"], "seed"),
    )


def serialize_scenario(scenario: Scenario) -> str:
    """Canonical YAML form; parse(serialize(s)) == s for file-borne state.

    Injected failures are runtime state and not part of the file format.
    """
    doc = {
        "request": {
            "type": scenario.request.request_type.value,
            "epicenter": list(scenario.request.epicenter),
            "coverage_radius_m": scenario.request.coverage_radius_m,
            "required_bandwidth_hz": scenario.request.required_bandwidth_hz,
            "window_s": list(scenario.request.window_s),
            "continuity": scenario.request.continuity.value,
        },
        "devices": [
            {
                "id": d.id,
                "position": list(d.position),
                "min_rate_bps": d.min_rate_bps,
                **({"group": d.group_id} if d.group_id is not None else {}),
            }
            for d in scenario.devices
        ],
        "mobiles": [
            {
                "id": m.id,
                "track": [[t, list(p)] for t, p in m.waypoints],
                "speed_max_ms": m.speed_max_ms,
                "min_rate_bps": m.min_rate_bps,
            }
            for m in scenario.mobiles
        ],
        "channels": {
            "mode": scenario.channels.mode.value,
            "list": [
                {"center_hz": c.center_hz, "width_hz": c.width_hz}
                for c in scenario.channels.channels
            ],
        },
        "geography": {
            "area": list(scenario.geography.area),
            "charging_stations": [
                {
                    "position": list(s.position),
                    "capacity": s.capacity,
                    "recharge_rate_w": s.recharge_rate_w,
                }
                for s in scenario.geography.charging_stations
            ],
            "restricted_zones": [
                [list(v) for v in zone] for zone in scenario.geography.restricted_zones
            ],
            "gbs": [
                {
                    "id": g.id,
                    "position": list(g.position),
                    "coverage_radius_m": g.coverage_radius_m,
                    "operational": g.operational,
                }
                for g in scenario.geography.gbs
            ],
        },
        "fleet": [
            {
                "id": u.id,
                "kind": u.spec.kind.value,
                "start": list(u.start_position),
                "battery_j": u.spec.battery_energy_j,
                "hover_power_w": u.spec.hover_power_w,
                "travel_power_w": u.spec.travel_power_w,
                "speed_max_ms": u.spec.speed_max_ms,
                "altitude_range_m": [u.spec.altitude_min_m, u.spec.altitude_max_m],
                "comm_power_max_w": u.spec.comm_power_max_w,
                "deploy_delay_s": u.spec.deploy_delay_s,
                "term": u.spec.term.value,
            }
            for u in scenario.fleet
        ],
        "radio": {
            "carrier_frequency_hz": scenario.radio.carrier_frequency_hz,
            "noise_density_dbm_hz": scenario.radio.noise_density_dbm_hz,
            "pathloss_model": scenario.radio.pathloss_model,
        },
        "seed": scenario.seed,
    }
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)


# ---------------------------------------------------------------------------
# demand snapshots, failure injection, grouping
# ---------------------------------------------------------------------------


def devices_at(scenario: Scenario, t: float) -> tuple[DevicePoint, ...]:
    """All device positions and min rates at time t (mobiles interpolated)."""
    start, end = scenario.request.window_s
    if not start <= t <= end:
        raise OutOfWindowError(f"t={t} outside service window [{start}, {end}]")
    points = [DevicePoint(d.id, d.position, d.min_rate_bps) for d in scenario.devices]
    for m in scenario.mobiles:
        points.append(DevicePoint(m.id, _interpolate(m.waypoints, t), m.min_rate_bps))
    return tuple(points)


def _interpolate(waypoints, t: float) -> tuple[float, float]:
    # positions are held constant before the first and after the last waypoint
    if t <= waypoints[0][0]:
        return waypoints[0][1]
    for (t0, p0), (t1, p1) in zip(waypoints, waypoints[1:]):
        if t <= t1:
            frac = (t - t0) / (t1 - t0)
            return (p0[0] + frac * (p1[0] - p0[0]), p0[1] + frac * (p1[1] - p0[1]))
    return waypoints[-1][1]


def gbs_associations(scenario: Scenario, t: float | None = None) -> dict[str, tuple[str, ...]]:
    """Device ids served by each GBS: nearest covering GBS, ties to lower id."""
    t0 = scenario.request.window_s[0] if t is None else t
    points = devices_at(scenario, t0)
    out: dict[str, list[str]] = {g.id: [] for g in scenario.geography.gbs}
    for pt in points:
        covering = [
            (math.dist(pt.position, g.position), g.id)
            for g in scenario.geography.gbs
            if math.dist(pt.position, g.position) <= g.coverage_radius_m
        ]
        if covering:
            _, gbs_id = min(covering)
            out[gbs_id].append(pt.id)
    return {k: tuple(v) for k, v in out.items()}


def inject_failure(
    scenario: Scenario,
    gbs_id: str,
    failure_class: FailureClass,
    duration_s: float,
    t_fail_s: float | None = None,
) -> Scenario:
    """Flag a GBS as failed and synthesize the self-healing service request.

    The failed GBS's associated devices (nearest covering GBS at the failure
    instant) become the demand set of the synthesized request.  Devices and
    channels are never modified.
    """
    if duration_s <= 0:
        raise ValidationError("failure duration must be > 0")
    gbs = scenario.gbs_by_id(gbs_id)
    if not gbs.operational or gbs.outage_s is not None:
        raise ValidationError(f"gbs {gbs_id} has already failed")
    t0 = scenario.request.window_s[0] if t_fail_s is None else t_fail_s
    members = gbs_associations(scenario, t0).get(gbs_id, ())
    request = ServiceRequest(
        request_type=RequestType.SELF_HEALING,
        epicenter=gbs.position,
        coverage_radius_m=gbs.coverage_radius_m,
        required_bandwidth_hz=scenario.channels.total_width_hz,
        window_s=(t0, t0 + duration_s),
        continuity=Continuity.CONTINUOUS,
    )
    event = FailureEvent(
        gbs_id=gbs_id,
        failure_class=failure_class,
        t_fail_s=t0,
        duration_s=duration_s,
        request=request,
        device_ids=members,
    )
    new_gbs = tuple(
        replace(g, outage_s=(t0, t0 + duration_s)) if g.id == gbs_id else g
        for g in scenario.geography.gbs
    )
    return replace(
        scenario,
        geography=replace(scenario.geography, gbs=new_gbs),
        failures=scenario.failures + (event,),
    )


def group_devices(scenario: Scenario, max_group_radius_m: float) -> tuple[DeviceGroup, ...]:
    """Greedy grouping of stationary devices into service points.

    Devices are scanned in id order; each joins the first existing group that
    still keeps every member within max_group_radius_m of the recomputed
    centroid, else founds a new group.  Radius 0 yields singleton groups.
    """
    if max_group_radius_m < 0:
        raise ValidationError("max_group_radius_m must be >= 0")
    devices = sorted(scenario.devices, key=lambda d: d.id)
    groups: list[list[StationaryDevice]] = []
    if max_group_radius_m == 0:
        groups = [[d] for d in devices]
    else:
        for dev in devices:
            placed = False
            for members in groups:
                candidate = members + [dev]
                cx = sum(d.position[0] for d in candidate) / len(candidate)
                cy = sum(d.position[1] for d in candidate) / len(candidate)
                if all(
                    math.dist(d.position, (cx, cy)) <= max_group_radius_m for d in candidate
                ):
                    members.append(dev)
                    placed = True
                    break
            if not placed:
                groups.append([dev])
    out = []
    for k, members in enumerate(groups):
        cx = sum(d.position[0] for d in members) / len(members)
        cy = sum(d.position[1] for d in members) / len(members)
        out.append(
            DeviceGroup(
                id=f"g{k}",
                member_ids=tuple(d.id for d in members),
                centroid=(cx, cy),
                total_rate_bps=sum(d.min_rate_bps for d in members),
            )
        )
    return tuple(out)
