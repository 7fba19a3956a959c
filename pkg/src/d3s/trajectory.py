"""Deployment phase: slotted trajectories, charging schedules, validation.

Paths are planned in 2-D on a visibility graph of inflated no-fly polygons
(vertical climbs at the endpoints), then resampled onto the slot grid at the
platform's speed.  A slot-stepped planner inserts return-to-charge legs when
the battery reserve rule fires, books station capacity deterministically, and
resolves same-cell conflicts by holding in place (lower id first).
"""
from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import LineString, Point, Polygon

from .dimensioning import DeploymentPlan
from .fleet import Term, Uav
from .scenario import ChargingStation, Scenario


class TrajectoryError(ValueError):
    pass


class UnreachableError(TrajectoryError):
    pass


class ScheduleInfeasibleError(TrajectoryError):
    def __init__(self, message: str, slot: int):
        self.slot = slot
        super().__init__(f"{message} (slot {slot})")


class EnergyInfeasibleError(TrajectoryError):
    def __init__(self, message: str, slot: int):
        self.slot = slot
        super().__init__(f"{message} (slot {slot})")


MAX_SLOT_LENGTH_S = 60.0  # channel treated as constant within a slot


@dataclass(frozen=True)
class TimeGrid:
    slot_length_s: float
    horizon_slots: int
    max_slot_length_s: float = MAX_SLOT_LENGTH_S

    def __post_init__(self):
        if self.slot_length_s <= 0:
            raise TrajectoryError("slot_length_s must be > 0")
        if self.slot_length_s > self.max_slot_length_s:
            raise TrajectoryError(
                f"slot_length_s {self.slot_length_s} exceeds the {self.max_slot_length_s} s cap"
            )
        if self.horizon_slots < 1:
            raise TrajectoryError("horizon_slots must be >= 1")

    def slot_of(self, t_s: float) -> int:
        return int(t_s // self.slot_length_s)


class Action(enum.Enum):
    TRAVEL = "travel"
    SERVE_HOVER = "serve_hover"
    RETURN_TO_CHARGE = "return_to_charge"
    CHARGING = "charging"


@dataclass
class Trajectory:
    """Per-slot flight record of one UAV, active on [start_slot, end_slot)."""

    uav_id: str
    start_slot: int
    positions: np.ndarray  # (n, 3) position held during each active slot
    actions: list[Action]
    battery_j: np.ndarray  # (n + 1,) level before each slot, then final
    drains_j: np.ndarray  # (n,)
    charges_j: np.ndarray  # (n,)
    comm_power_w: np.ndarray  # (n,)

    @property
    def end_slot(self) -> int:
        return self.start_slot + len(self.actions)

    def active(self, slot: int) -> bool:
        return self.start_slot <= slot < self.end_slot

    def position_at(self, slot: int):
        if not self.active(slot):
            return None
        return tuple(self.positions[slot - self.start_slot])

    def action_at(self, slot: int):
        if not self.active(slot):
            return None
        return self.actions[slot - self.start_slot]

    def first_serve_slot(self) -> int | None:
        for i, a in enumerate(self.actions):
            if a is Action.SERVE_HOVER:
                return self.start_slot + i
        return None

    def rows(self):
        """(uav_id, slot, x, y, z, action, battery_J) export rows."""
        for i, a in enumerate(self.actions):
            x, y, z = self.positions[i]
            yield (
                self.uav_id,
                self.start_slot + i,
                float(x),
                float(y),
                float(z),
                a.value,
                float(self.battery_j[i]),
            )


@dataclass
class ChargingSchedule:
    occupancy: dict[tuple[int, int], tuple[str, ...]] = field(default_factory=dict)

    def add(self, station: int, slot: int, uav_id: str):
        key = (station, slot)
        self.occupancy[key] = self.occupancy.get(key, ()) + (uav_id,)

    def count(self, station: int, slot: int) -> int:
        return len(self.occupancy.get((station, slot), ()))


@dataclass(frozen=True)
class SchedulePolicy:
    min_separation_m: float = 10.0
    reserve_factor: float = 1.2
    zone_margin_m: float = 10.0
    use_replacements: bool = True
    booking_slack_slots: int = 2
    max_hold_slots: int = 12


class ViolationKind(enum.Enum):
    SPEED_LIMIT = "speed_limit"
    ZONE = "zone"
    COLLISION = "collision"
    STATION_CAPACITY = "station_capacity"
    NEGATIVE_BATTERY = "negative_battery"
    ACTION_POSITION = "action_position"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    slot: int
    uav_ids: tuple[str, ...]
    detail: str


# ---------------------------------------------------------------------------
# geometric path planning
# ---------------------------------------------------------------------------


def plan_path(
    start,
    goal,
    zones: tuple[tuple[tuple[float, float], ...], ...],
    speed_max_ms: float,
    margin_m: float = 10.0,
) -> list[tuple[float, float, float]]:
    """Waypoints start -> goal avoiding inflated no-fly polygons.

    The 2-D leg flies at cruise altitude max(z_start, z_goal) with vertical
    climbs at the endpoints; a straight segment is used whenever it clears
    every zone.
    """
    sx, sy, sz = start
    gx, gy, gz = goal
    polys = [Polygon(z) for z in zones]
    for poly in polys:
        if poly.contains(Point(gx, gy)):
            raise UnreachableError("goal lies inside a restricted zone")
        if poly.contains(Point(sx, sy)):
            raise UnreachableError("start lies inside a restricted zone")
    cruise = max(sz, gz)
    path2d = _plan_path_2d((sx, sy), (gx, gy), polys, margin_m)
    waypoints: list[tuple[float, float, float]] = [(sx, sy, sz)]
    for x, y in path2d:
        wp = (x, y, cruise)
        if wp != waypoints[-1]:
            waypoints.append(wp)
    if waypoints[-1] != (gx, gy, cruise):
        waypoints.append((gx, gy, cruise))
    if (gx, gy, gz) != waypoints[-1]:
        waypoints.append((gx, gy, gz))
    return waypoints


def _clear(p, q, blockers) -> bool:
    if p == q:
        return True
    seg = LineString([p, q])
    return not any(seg.intersects(b) for b in blockers)


def _plan_path_2d(start, goal, polys, margin):
    # blockers shrunk a hair so edges along the inflated boundary count as clear
    blockers = [p.buffer(margin * (1 - 1e-9) - 1e-9, join_style=2) for p in polys]
    if _clear(start, goal, blockers):
        return [start, goal]
    nodes = [start, goal]
    for p in polys:
        ring = p.buffer(margin + 1e-6, join_style=2).exterior.coords[:-1]
        nodes.extend((float(x), float(y)) for x, y in ring)
    n = len(nodes)
    adj: dict[int, list[tuple[float, int]]] = {i: [] for i in range(n)}
    for i in range(n):
        for j in range(i + 1, n):
            if _clear(nodes[i], nodes[j], blockers):
                d = math.dist(nodes[i], nodes[j])
                adj[i].append((d, j))
                adj[j].append((d, i))
    dist = {0: 0.0}
    prev: dict[int, int] = {}
    heap = [(0.0, 0)]
    seen = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in seen:
            continue
        seen.add(u)
        if u == 1:
            break
        for w, v in sorted(adj[u]):
            nd = d + w
            if v not in dist or nd < dist[v] - 1e-12:
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    if 1 not in seen:
        raise UnreachableError("no zone-free path between start and goal")
    out = [1]
    while out[-1] != 0:
        out.append(prev[out[-1]])
    return [nodes[i] for i in reversed(out)]


def path_length(waypoints) -> float:
    return sum(
        math.dist(a, b) for a, b in zip(waypoints, waypoints[1:])
    )


def resample_path(waypoints, speed_ms: float, slot_length_s: float):
    """Per-slot positions walking the polyline at full speed; last = goal."""
    if speed_ms <= 0:
        raise TrajectoryError("cannot resample a path at zero speed")
    step = speed_ms * slot_length_s
    points = []
    remaining = step
    cursor = np.asarray(waypoints[0], dtype=float)
    for wp in waypoints[1:]:
        target = np.asarray(wp, dtype=float)
        while True:
            gap = float(np.linalg.norm(target - cursor))
            if gap < remaining - 1e-12:
                remaining -= gap
                cursor = target
                break
            cursor = cursor + (target - cursor) * (remaining / gap) if gap > 0 else cursor
            points.append(tuple(float(v) for v in cursor))
            remaining = step
    goal = tuple(float(v) for v in waypoints[-1])
    if not points or points[-1] != goal:
        points.append(goal)
    return points


# ---------------------------------------------------------------------------
# slot-stepped trajectory planner
# ---------------------------------------------------------------------------


class _UavState:
    def __init__(self, uav: Uav, hover, comm_power_w: float, start_slot: int):
        self.uav = uav
        self.hover = hover
        self.comm_power_w = comm_power_w
        self.start_slot = start_slot
        self.phase = "waiting"  # waiting -> out -> serve -> back -> charge -> ...
        self.position = uav.start_position
        self.battery = uav.spec.battery_energy_j
        self.pending: list[tuple[float, float, float]] = []
        self.station: int | None = None
        self.reserve_cache: float | None = None
        self.hold_count = 0
        self.records: list[tuple[int, tuple, Action, float, float, float, float]] = []
        self.done = False

    def record(self, slot, position, action, battery_before, drain, charge, comm):
        self.records.append((slot, position, action, battery_before, drain, charge, comm))
        self.position = position
        self.battery = battery_before - drain + charge


def _station_position(st: ChargingStation):
    return (st.position[0], st.position[1], 0.0)


def _return_energy(hover, spec, stations, zones, policy, dt) -> float:
    """Slot-billed travel energy from the hover to the nearest station."""
    if not stations:
        return 0.0
    nearest = min(stations, key=lambda sn: math.dist(sn.position, hover[:2]))
    legs = resample_path(
        plan_path(hover, _station_position(nearest), zones, spec.speed_max_ms,
                  policy.zone_margin_m),
        spec.speed_max_ms,
        dt,
    )
    return spec.travel_power_w * len(legs) * dt


def plan_trajectories(
    plan: DeploymentPlan,
    scenario: Scenario,
    grid: TimeGrid,
    policy: SchedulePolicy = SchedulePolicy(),
    activate_slot: int = 0,
    deactivate_slot: int | None = None,
    initial_batteries: dict[str, float] | None = None,
) -> tuple[list[Trajectory], ChargingSchedule]:
    """Execute the deployment: travel out, serve, recharge under capacity.

    Serving UAVs return to charge when the projected battery falls below
    reserve_factor times the energy needed to reach the nearest station; an
    idle same-term fleet UAV (not in the plan) covers the gap when allowed.
    Tethered platforms appear at their hover once their deployment delay has
    elapsed.  Produces per-slot trajectories plus the station occupancy.
    """
    dt = grid.slot_length_s
    stations = scenario.geography.charging_stations
    zones = scenario.geography.restricted_zones
    schedule = ChargingSchedule()
    reservations: dict[tuple[int, int], list[str]] = {}

    states: list[_UavState] = []
    for j, placed in enumerate(plan.placed):
        delay_slots = math.ceil(placed.uav.spec.deploy_delay_s / dt)
        st = _UavState(
            placed.uav, placed.hover, plan.uav_comm_power(j), activate_slot + delay_slots
        )
        if initial_batteries and placed.uav.id in initial_batteries:
            st.battery = initial_batteries[placed.uav.id]
        states.append(st)
    planned_ids = {p.uav.id for p in plan.placed}
    spares = [
        u
        for u in scenario.fleet
        if u.id not in planned_ids
        and u.spec.term is Term.SHORT
        and not u.spec.tethered
    ] if policy.use_replacements else []

    def reserve_ok(station_idx: int, first: int, last: int, uav_id: str) -> bool:
        cap = stations[station_idx].capacity
        return all(
            len(reservations.get((station_idx, s), [])) < cap for s in range(first, last + 1)
        )

    def reserve(station_idx: int, first: int, last: int, uav_id: str):
        for s in range(first, last + 1):
            reservations.setdefault((station_idx, s), []).append(uav_id)

    def pick_station(state: _UavState, slot: int):
        """Nearest station with a free charging window from projected arrival."""
        order = sorted(
            range(len(stations)),
            key=lambda i: (math.dist(stations[i].position, state.hover[:2]), i),
        )
        for idx in order:
            target = _station_position(stations[idx])
            waypoints = plan_path(
                state.position, target, zones, state.uav.spec.speed_max_ms, policy.zone_margin_m
            )
            legs = resample_path(waypoints, state.uav.spec.speed_max_ms, dt)
            arrival = slot + len(legs)
            travel_energy = state.uav.spec.travel_power_w * len(legs) * dt
            batt_at_arrival = state.battery - travel_energy
            if batt_at_arrival < 0:
                continue
            missing = state.uav.spec.battery_energy_j - batt_at_arrival
            charge_slots = max(1, math.ceil(missing / (stations[idx].recharge_rate_w * dt)))
            last = arrival + charge_slots - 1 + policy.booking_slack_slots
            if reserve_ok(idx, arrival, last, state.uav.id):
                reserve(idx, arrival, last, state.uav.id)
                return idx, legs
        return None

    def dispatch_replacement(state: _UavState, slot: int):
        if not spares:
            return
        spare = spares.pop(0)
        repl = _UavState(spare, state.hover, state.comm_power_w, slot)
        repl.phase = "waiting"
        states.append(repl)

    positions_now: dict[str, tuple] = {}

    def conflict(candidate, uav_id) -> bool:
        for other_id, pos in positions_now.items():
            if other_id == uav_id:
                continue
            if math.dist(candidate, pos) < policy.min_separation_m:
                return True
        return False

    for slot in range(grid.horizon_slots):
        # decision order: landing traffic first so bookings stay exact
        order = sorted(
            range(len(states)),
            key=lambda i: (0 if states[i].phase == "back" else 1, states[i].uav.id),
        )
        for i in order:
            st = states[i]
            if st.done:
                positions_now.pop(st.uav.id, None)
                continue
            spec = st.uav.spec
            if st.phase == "waiting":
                if slot < st.start_slot:
                    positions_now.pop(st.uav.id, None)
                    continue
                if spec.tethered or spec.speed_max_ms <= 0:
                    # tethered platforms are erected on site during the delay
                    st.position = st.hover
                    st.phase = "serve"
                else:
                    waypoints = plan_path(
                        st.position, st.hover, zones, spec.speed_max_ms, policy.zone_margin_m
                    )
                    st.pending = resample_path(waypoints, spec.speed_max_ms, dt)
                    out_energy = spec.travel_power_w * len(st.pending) * dt
                    back_energy = _return_energy(st.hover, spec, stations, zones, policy, dt)
                    if st.battery < out_energy + policy.reserve_factor * back_energy:
                        raise EnergyInfeasibleError(
                            f"uav {st.uav.id} cannot afford the outbound leg plus "
                            "its return reserve",
                            slot,
                        )
                    st.phase = "out"

            if deactivate_slot is not None and slot >= deactivate_slot and st.phase in (
                "out",
                "serve",
            ):
                # mission over: fly home and end the trajectory there
                if spec.tethered or spec.speed_max_ms <= 0:
                    st.done = True
                    positions_now.pop(st.uav.id, None)
                    continue
                waypoints = plan_path(
                    st.position,
                    st.uav.start_position,
                    zones,
                    spec.speed_max_ms,
                    policy.zone_margin_m,
                )
                st.pending = resample_path(waypoints, spec.speed_max_ms, dt)
                st.phase = "home"

            if st.phase == "serve":
                drain = (spec.hover_power_w + st.comm_power_w) * dt
                if not spec.tethered and stations:
                    if st.reserve_cache is None:
                        # reserve is billed in whole slots, like travel itself
                        st.reserve_cache = _return_energy(
                            st.position, spec, stations, zones, policy, dt
                        )
                    reserve_energy = st.reserve_cache * policy.reserve_factor
                    if st.battery - drain < reserve_energy:
                        choice = pick_station(st, slot)
                        if choice is None:
                            raise ScheduleInfeasibleError(
                                f"uav {st.uav.id} must land but no station window is free", slot
                            )
                        st.station, st.pending = choice
                        st.phase = "back"
                        dispatch_replacement(st, slot)
                if st.phase == "serve":
                    positions_now[st.uav.id] = st.hover
                    st.record(slot, st.hover, Action.SERVE_HOVER, st.battery, drain, 0.0, st.comm_power_w)
                    continue

            if st.phase in ("out", "back", "home"):
                candidate = st.pending[0]
                on_final = (
                    st.phase == "back"
                    and st.station is not None
                    and candidate == _station_position(stations[st.station])
                )
                if (
                    not on_final
                    and conflict(candidate, st.uav.id)
                    and not conflict(st.position, st.uav.id)
                ):
                    candidate = st.position  # hold this slot
                    st.hold_count += 1
                    if st.hold_count >= 3:
                        # persistent standoff (parked blocker on the line, or
                        # head-on traffic): sidestep perpendicular to the
                        # heading, then replan the rest of the leg from there
                        goal = st.pending[-1]
                        dx = st.pending[0][0] - st.position[0]
                        dy = st.pending[0][1] - st.position[1]
                        norm = math.hypot(dx, dy) or 1.0
                        step = min(2.0 * policy.min_separation_m, spec.speed_max_ms * dt)
                        for sign in (1.0, -1.0):
                            side = (
                                st.position[0] - sign * dy / norm * step,
                                st.position[1] + sign * dx / norm * step,
                                st.position[2],
                            )
                            if not conflict(side, st.uav.id):
                                candidate = side
                                st.pending = resample_path(
                                    plan_path(
                                        side, goal, zones, spec.speed_max_ms,
                                        policy.zone_margin_m,
                                    ),
                                    spec.speed_max_ms,
                                    dt,
                                )
                                st.hold_count = 0
                                break
                    if st.hold_count > policy.max_hold_slots:
                        raise ScheduleInfeasibleError(
                            f"uav {st.uav.id} is in a standoff it cannot resolve "
                            "(conflicting hover assignments?)",
                            slot,
                        )
                else:
                    st.pending.pop(0)
                    st.hold_count = 0
                action = Action.RETURN_TO_CHARGE if st.phase == "back" else Action.TRAVEL
                drain = spec.travel_power_w * dt
                positions_now[st.uav.id] = candidate
                st.record(slot, candidate, action, st.battery, drain, 0.0, 0.0)
                if st.battery < 0:
                    raise EnergyInfeasibleError(f"uav {st.uav.id} battery exhausted", slot)
                if not st.pending:
                    if st.phase == "out":
                        st.phase = "serve"
                    elif st.phase == "back":
                        st.phase = "charge"
                    else:
                        st.done = True
                        positions_now.pop(st.uav.id, None)
                continue

            if st.phase == "charge":
                station = scenario.geography.charging_stations[st.station]
                headroom = spec.battery_energy_j - st.battery
                charge = min(station.recharge_rate_w * dt, headroom)
                # parked on a pad: not part of the airborne separation picture
                positions_now.pop(st.uav.id, None)
                schedule.add(st.station, slot, st.uav.id)
                st.record(slot, st.position, Action.CHARGING, st.battery, 0.0, charge, 0.0)
                if st.battery >= spec.battery_energy_j - 1e-9:
                    # full: resume serving (the replacement, if any, keeps the
                    # cell; this UAV then just flies home and goes on standby)
                    replaced = any(
                        s is not st and s.hover == st.hover and not s.done for s in states
                    )
                    target = st.uav.start_position if replaced else st.hover
                    waypoints = plan_path(
                        st.position, target, zones, spec.speed_max_ms, policy.zone_margin_m
                    )
                    pending = resample_path(waypoints, spec.speed_max_ms, dt)
                    if not replaced:
                        out_energy = spec.travel_power_w * len(pending) * dt
                        back_energy = _return_energy(st.hover, spec, stations, zones, policy, dt)
                        serve_slot = (spec.hover_power_w + st.comm_power_w) * dt
                        if st.battery < out_energy + policy.reserve_factor * back_energy + serve_slot:
                            # a full battery cannot sustain another cycle:
                            # stay parked at the pad (released) as standby
                            st.done = True
                            positions_now.pop(st.uav.id, None)
                            continue
                    st.pending = pending
                    st.phase = "home" if replaced else "out"
                continue

    trajectories = []
    for st in states:
        if not st.records:
            continue
        start = st.records[0][0]
        n = len(st.records)
        positions = np.zeros((n, 3))
        actions = []
        battery = np.zeros(n + 1)
        drains = np.zeros(n)
        charges = np.zeros(n)
        comm = np.zeros(n)
        for idx, (slot, pos, action, before, drain, charge, cw) in enumerate(st.records):
            positions[idx] = pos
            actions.append(action)
            battery[idx] = before
            drains[idx] = drain
            charges[idx] = charge
            comm[idx] = cw
        battery[n] = st.battery
        trajectories.append(
            Trajectory(
                uav_id=st.uav.id,
                start_slot=start,
                positions=positions,
                actions=actions,
                battery_j=battery,
                drains_j=drains,
                charges_j=charges,
                comm_power_w=comm,
            )
        )
    return trajectories, schedule


# ---------------------------------------------------------------------------
# validation and energy accounting
# ---------------------------------------------------------------------------


def validate_trajectory(
    trajectories: list[Trajectory],
    schedule: ChargingSchedule,
    scenario: Scenario,
    grid: TimeGrid,
    policy: SchedulePolicy = SchedulePolicy(),
) -> list[Violation]:
    """Per-slot rule checks; an empty list means the plan is flyable."""
    violations: list[Violation] = []
    dt = grid.slot_length_s
    specs = {u.id: u.spec for u in scenario.fleet}
    stations = scenario.geography.charging_stations
    zone_polys = [Polygon(z).buffer(-1e-9) for z in scenario.geography.restricted_zones]

    for tr in trajectories:
        spec = specs.get(tr.uav_id)
        prev = None
        for i, action in enumerate(tr.actions):
            slot = tr.start_slot + i
            pos = tuple(tr.positions[i])
            if prev is not None and spec is not None:
                step = math.dist(prev, pos)
                limit = spec.speed_max_ms * dt * (1 + 1e-9)
                if step > limit:
                    violations.append(
                        Violation(
                            ViolationKind.SPEED_LIMIT,
                            slot,
                            (tr.uav_id,),
                            f"moved {step:.1f} m in one {dt:.0f} s slot (limit {limit:.1f} m)",
                        )
                    )
            for poly in zone_polys:
                if poly.contains(Point(pos[0], pos[1])):
                    violations.append(
                        Violation(
                            ViolationKind.ZONE, slot, (tr.uav_id,), "inside a restricted zone"
                        )
                    )
            if action is Action.CHARGING:
                at = [
                    k
                    for k, s in enumerate(stations)
                    if math.dist(s.position, pos[:2]) < 1e-6 and abs(pos[2]) < 1e-6
                ]
                if len(at) != 1:
                    violations.append(
                        Violation(
                            ViolationKind.ACTION_POSITION,
                            slot,
                            (tr.uav_id,),
                            "charging away from a station pad",
                        )
                    )
            if action is Action.SERVE_HOVER and prev is not None and math.dist(prev, pos) > 1e-6:
                prev_action = tr.actions[i - 1]
                if prev_action is Action.SERVE_HOVER:
                    violations.append(
                        Violation(
                            ViolationKind.ACTION_POSITION,
                            slot,
                            (tr.uav_id,),
                            "moved while marked serving",
                        )
                    )
            prev = pos
        if np.any(tr.battery_j < 0):
            first = int(np.argmax(tr.battery_j < 0))
            violations.append(
                Violation(
                    ViolationKind.NEGATIVE_BATTERY,
                    tr.start_slot + max(0, first - 1),
                    (tr.uav_id,),
                    "battery below zero",
                )
            )

    # pairwise separation among airborne platforms; anything on a station pad
    # (charging, or touching down at z = 0) sits on its own physical pad
    def on_pad(pos):
        return abs(pos[2]) < 1e-6 and any(
            math.dist(s.position, pos[:2]) < 1e-6 for s in stations
        )

    for slot in range(grid.horizon_slots):
        live = [
            (tr.uav_id, tr.position_at(slot))
            for tr in trajectories
            if tr.active(slot)
            and tr.action_at(slot) is not Action.CHARGING
            and not on_pad(tr.position_at(slot))
        ]
        for a in range(len(live)):
            for b in range(a + 1, len(live)):
                d = math.dist(live[a][1], live[b][1])
                if d < policy.min_separation_m:
                    violations.append(
                        Violation(
                            ViolationKind.COLLISION,
                            slot,
                            (live[a][0], live[b][0]),
                            f"separation {d:.1f} m below {policy.min_separation_m} m",
                        )
                    )

    # station capacity from the trajectories themselves
    for slot in range(grid.horizon_slots):
        for k, station in enumerate(stations):
            chargers = [
                tr.uav_id
                for tr in trajectories
                if tr.active(slot)
                and tr.action_at(slot) is Action.CHARGING
                and math.dist(tr.position_at(slot)[:2], station.position) < 1e-6
            ]
            if len(chargers) > station.capacity:
                violations.append(
                    Violation(
                        ViolationKind.STATION_CAPACITY,
                        slot,
                        tuple(chargers),
                        f"{len(chargers)} charging at a capacity-{station.capacity} station",
                    )
                )
    return violations


def battery_profile(tr: Trajectory, spec, scenario: Scenario, grid: TimeGrid) -> np.ndarray:
    """Recompute the energy trace from actions alone (independent of planner).

    Travel-class slots drain travel power, serving slots drain hover plus the
    recorded comm power, charging slots add the pad's rate capped at capacity.
    """
    dt = grid.slot_length_s
    stations = scenario.geography.charging_stations
    levels = np.zeros(len(tr.actions) + 1)
    levels[0] = spec.battery_energy_j if not math.isinf(spec.battery_energy_j) else math.inf
    for i, action in enumerate(tr.actions):
        level = levels[i]
        if action in (Action.TRAVEL, Action.RETURN_TO_CHARGE):
            level -= spec.travel_power_w * dt
        elif action is Action.SERVE_HOVER:
            level -= (spec.hover_power_w + float(tr.comm_power_w[i])) * dt
        else:
            pos = tuple(tr.positions[i])
            station = min(stations, key=lambda s: math.dist(s.position, pos[:2]))
            level = min(level + station.recharge_rate_w * dt, spec.battery_energy_j)
        if level < 0:
            raise EnergyInfeasibleError(
                f"recomputed battery of {tr.uav_id} dips below zero", tr.start_slot + i
            )
        levels[i + 1] = level
    return levels
