"""Four-phase slotted simulation: demand, decision, deployment, service.

run() snapshots demand, dimensions the fleet (short and/or long term),
plans trajectories, then advances slot by slot: move UAVs, recompute rates,
step the backbone, drain and charge batteries, and swap plans at the
short-to-long transition boundary.  Everything is a deterministic function
of (scenario, config), including the CSV bundle byte for byte.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import dimensioning as dim
from . import routing
from .dimensioning import DeploymentPlan, DimensionConfig, FrontResult, PlanPoint
from .fleet import Term
from .scenario import DevicePoint, FailureClass, Scenario, devices_at
from .trajectory import (
    Action,
    ChargingSchedule,
    SchedulePolicy,
    TimeGrid,
    Trajectory,
    plan_trajectories,
)


class SimulationError(RuntimeError):
    def __init__(self, phase: str, message: str, slot: int | None = None):
        self.phase = phase
        self.slot = slot
        where = f" at slot {slot}" if slot is not None else ""
        super().__init__(f"[{phase}]{where} {message}")


@dataclass(frozen=True)
class SimConfig:
    slot_length_s: float = 10.0
    horizon_s: float | None = None  # default: failure window (or request window)
    plan_select: str = "min_uavs"  # or "max_lifetime"
    beta: float = 0.0
    backbone_range_m: float = 600.0
    policy: SchedulePolicy = SchedulePolicy()
    dimension: DimensionConfig = DimensionConfig(restarts=6)
    redimension_after_slots: int = 10


@dataclass
class SimReport:
    seed: int
    slot_length_s: float
    ue_ids: tuple[str, ...]
    min_rates: dict[str, float]
    rates_bps: np.ndarray  # (slots, n_ue)
    gbs_served: np.ndarray  # (slots, n_ue) 1 where a live GBS covers the UE
    energy: dict[str, dict[str, np.ndarray]]  # uav -> battery/drain/charge
    trajectories: list[Trajectory]
    schedule: ChargingSchedule
    routing_metrics: routing.RouteMetrics | None
    routing_trace: routing.RoutingTrace | None
    timeline: list[tuple[int, str, str]]
    demand_ids: tuple[str, ...]  # UEs the UAV fleet is responsible for
    serving_from_slot: int | None  # all planned UAVs on station
    violations: np.ndarray  # (slots,) demand UEs below min rate
    fronts: dict[str, FrontResult] = field(default_factory=dict)

    def energy_closes(self) -> bool:
        """Replay fold: start - drains + charges must equal the final level."""
        for rec in self.energy.values():
            level = rec["battery"][0]
            for d, c in zip(rec["drain"], rec["charge"]):
                level = level - d + c
            if not (level == rec["battery"][-1] or (math.isinf(level) and math.isinf(rec["battery"][-1]))):
                return False
            if np.any(rec["battery"] < 0):
                return False
        return True

    def write_csv_bundle(self, outdir) -> list[str]:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        written = []

        def emit(name: str, header: str, rows):
            path = out / name
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(header + "\n")
                for row in rows:
                    fh.write(",".join(_fmt(v) for v in row) + "\n")
            written.append(name)

        slots = self.rates_bps.shape[0]
        emit(
            "rates.csv",
            "slot,t_s,ue_id,rate_bps,min_rate_bps,gbs_served",
            (
                (
                    t,
                    t * self.slot_length_s,
                    ue,
                    self.rates_bps[t, i],
                    self.min_rates[ue],
                    int(self.gbs_served[t, i]),
                )
                for t in range(slots)
                for i, ue in enumerate(self.ue_ids)
            ),
        )
        emit(
            "energy.csv",
            "uav_id,slot,battery_j,drain_j,charge_j",
            (
                (uav, t, rec["battery"][t], rec["drain"][t], rec["charge"][t])
                for uav, rec in sorted(self.energy.items())
                for t in range(len(rec["drain"]))
            ),
        )
        emit(
            "trajectories.csv",
            "uav_id,slot,x,y,z,action,battery_j",
            (row for tr in sorted(self.trajectories, key=lambda t: t.uav_id) for row in tr.rows()),
        )
        emit(
            "timeline.csv",
            "slot,event,detail",
            ((slot, event, detail) for slot, event, detail in self.timeline),
        )
        emit(
            "violations.csv",
            "slot,demand_ues_below_min_rate",
            ((t, int(self.violations[t])) for t in range(slots)),
        )
        if self.routing_trace is not None:
            emit(
                "routing_queues.csv",
                "slot,node,flow,queue_bits",
                self.routing_trace.queue_rows,
            )
            emit(
                "routing_tx.csv",
                "slot,src,dst,flow,tx_bits",
                self.routing_trace.tx_rows,
            )
        return written


def _fmt(v) -> str:
    if isinstance(v, float):
        if v != v:
            return "nan"
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


@dataclass
class SimState:
    scenario: Scenario
    config: SimConfig
    grid: TimeGrid
    clock: int
    t0_s: float
    demand_ids: tuple[str, ...]
    short_point: PlanPoint | None
    long_point: PlanPoint | None
    t_long_active_s: float | None
    trajectories: list[Trajectory]
    schedule: ChargingSchedule
    bp: routing.BackpressureState | None
    report: SimReport
    consec_violation: dict[str, int] = field(default_factory=dict)
    redimensioned: bool = False

    def active_plan(self) -> DeploymentPlan | None:
        wall = self.t0_s + self.clock * self.grid.slot_length_s
        if (
            self.long_point is not None
            and self.t_long_active_s is not None
            and wall >= self.t_long_active_s
        ):
            return self.long_point.plan
        if self.short_point is not None:
            return self.short_point.plan
        return self.long_point.plan if self.long_point else None


def _select(front: FrontResult, how: str) -> PlanPoint:
    if not front.front:
        if front.flagged:
            return front.flagged[0]
        raise SimulationError("decision", "dimensioning produced no plan")
    return front.front[0] if how == "min_uavs" else front.front[-1]


def run(scenario: Scenario, config: SimConfig = SimConfig()) -> SimReport:
    state = init_state(scenario, config)
    while state.clock < state.grid.horizon_slots:
        advance_slot(state)
    finalize(state)
    return state.report


def init_state(scenario: Scenario, config: SimConfig) -> SimState:
    """Demand snapshot, dimensioning, transition, and trajectory planning."""
    if scenario.failures:
        failure_window_end = max(f.t_fail_s + f.duration_s for f in scenario.failures)
        t0 = min(f.t_fail_s for f in scenario.failures)
        demand_ids = tuple(
            sorted({d for f in scenario.failures for d in f.device_ids})
        )
        long_term = any(f.failure_class is FailureClass.LONG_TERM for f in scenario.failures)
    else:
        t0 = scenario.request.window_s[0]
        failure_window_end = scenario.request.window_s[1]
        demand_ids = tuple(sorted(d.id for d in scenario.devices)) + tuple(
            sorted(m.id for m in scenario.mobiles)
        )
        long_term = not any(u.spec.term is Term.SHORT for u in scenario.fleet)

    horizon_s = config.horizon_s
    if horizon_s is None:
        horizon_s = min(failure_window_end, scenario.request.window_s[1]) - t0
    grid = TimeGrid(config.slot_length_s, max(1, math.ceil(horizon_s / config.slot_length_s)))

    demand_scenario = _demand_view(scenario, demand_ids, t0)
    fronts: dict[str, FrontResult] = {}
    short_point = long_point = None
    t_long_active = None
    try:
        has_short = any(u.spec.term is Term.SHORT for u in scenario.fleet)
        if has_short:
            fronts["short"] = dim.dimension_short_term(
                demand_scenario, scenario.fleet, config.dimension
            )
            short_point = _select(fronts["short"], config.plan_select)
        if long_term:
            fronts["long"] = dim.dimension_long_term(
                demand_scenario, scenario.fleet, config.dimension
            )
            if fronts["long"].front or fronts["long"].flagged:
                long_point = _select(fronts["long"], config.plan_select)
    except dim.DimensioningError as exc:
        raise SimulationError("decision", str(exc)) from exc

    if long_point is not None and long_point.plan.placed:
        delay = max(p.uav.spec.deploy_delay_s for p in long_point.plan.placed)
        if short_point is not None and short_point.plan.placed and delay > 0:
            schedule = dim.transition_plan(short_point.plan, long_point.plan, demand_scenario)
            t_long_active = schedule.t_long_active_s
        else:
            t_long_active = t0 + delay
            short_point = None if delay == 0 else short_point

    timeline: list[tuple[int, str, str]] = []
    trajectories: list[Trajectory] = []
    schedule = ChargingSchedule()
    try:
        if short_point is not None and short_point.plan.placed:
            deactivate = (
                grid.slot_of(t_long_active - t0) if t_long_active is not None else None
            )
            trs, schedule = plan_trajectories(
                short_point.plan,
                demand_scenario,
                grid,
                config.policy,
                activate_slot=0,
                deactivate_slot=deactivate,
            )
            trajectories.extend(trs)
        if long_point is not None and long_point.plan.placed:
            trs_long, sched_long = plan_trajectories(
                long_point.plan, demand_scenario, grid, config.policy, activate_slot=0
            )
            trajectories.extend(trs_long)
            for key, ids in sched_long.occupancy.items():
                for i in ids:
                    schedule.add(key[0], key[1], i)
    except Exception as exc:
        raise SimulationError("deployment", str(exc)) from exc

    if scenario.failures:
        for f in scenario.failures:
            timeline.append((grid.slot_of(f.t_fail_s - t0), "failure", f.gbs_id))
    n_ue = len(scenario.devices) + len(scenario.mobiles)
    report = SimReport(
        seed=scenario.seed,
        slot_length_s=config.slot_length_s,
        ue_ids=tuple(sorted([d.id for d in scenario.devices] + [m.id for m in scenario.mobiles])),
        min_rates={
            **{d.id: d.min_rate_bps for d in scenario.devices},
            **{m.id: m.min_rate_bps for m in scenario.mobiles},
        },
        rates_bps=np.zeros((grid.horizon_slots, n_ue)),
        gbs_served=np.zeros((grid.horizon_slots, n_ue), dtype=np.int8),
        energy={},
        trajectories=trajectories,
        schedule=schedule,
        routing_metrics=None,
        routing_trace=None,
        timeline=timeline,
        demand_ids=demand_ids,
        serving_from_slot=None,
        violations=np.zeros(grid.horizon_slots),
        fronts=fronts,
    )
    bp = None
    active = short_point or long_point
    if active is not None and active.plan.placed:
        topo = routing.topology_from_plan(
            active.plan, demand_scenario, config.slot_length_s, config.backbone_range_m
        )
        flows = _backbone_flows(active.plan, demand_scenario)
        if flows and topo.links:
            bp = routing.BackpressureState(topo, flows, config.beta)
    return SimState(
        scenario=scenario,
        config=config,
        grid=grid,
        clock=0,
        t0_s=t0,
        demand_ids=demand_ids,
        short_point=short_point,
        long_point=long_point,
        t_long_active_s=t_long_active,
        trajectories=trajectories,
        schedule=schedule,
        bp=bp,
        report=report,
    )


def _demand_view(scenario: Scenario, demand_ids, t0: float) -> Scenario:
    """Scenario restricted to the devices the fleet must serve, window from t0."""
    keep = set(demand_ids)
    return replace(
        scenario,
        request=replace(scenario.request, window_s=(t0, scenario.request.window_s[1])),
        devices=tuple(d for d in scenario.devices if d.id in keep),
        mobiles=tuple(m for m in scenario.mobiles if m.id in keep),
        failures=(),
    )


def _backbone_flows(plan: DeploymentPlan, scenario: Scenario) -> list[routing.Flow]:
    if plan.gateway_gbs_id is None:
        return []
    serving = {}
    for i, dev in enumerate(plan.device_ids):
        row = np.flatnonzero(plan.assoc_device[i])
        if row.size:
            serving.setdefault(int(row[0]), []).append(dev)
    return [
        routing.Flow(f"dl_{plan.placed[j].uav.id}", plan.gateway_gbs_id, plan.placed[j].uav.id)
        for j in sorted(serving)
    ]


def advance_slot(state: SimState) -> SimState:
    """One slot of the service loop; replaying a copied state is bit-identical."""
    slot = state.clock
    if slot >= state.grid.horizon_slots:
        raise SimulationError("service", "advancing past the horizon", slot)
    scenario = state.scenario
    grid = state.grid
    wall = state.t0_s + slot * grid.slot_length_s
    wall = min(wall, scenario.request.window_s[1])
    plan = state.active_plan()

    serving_uavs = {
        tr.uav_id
        for tr in state.trajectories
        if tr.action_at(slot) is Action.SERVE_HOVER
    }
    snapshot = devices_at(scenario, wall)
    by_id = {p.id: p for p in snapshot}

    rates: dict[str, float] = {}
    if plan is not None and plan.placed:
        live = _live_plan(state, plan, serving_uavs, snapshot, slot)
        if live is not None:
            rates = dim.achieved_rates(live, snapshot, scenario.channels, scenario.radio)

    idx = {ue: i for i, ue in enumerate(state.report.ue_ids)}
    demand = set(state.demand_ids)
    violated_now = 0
    for pt in snapshot:
        i = idx[pt.id]
        if pt.id in demand:
            rate = rates.get(pt.id, 0.0)
            state.report.rates_bps[slot, i] = rate
            if rate < pt.min_rate_bps:
                violated_now += 1
                state.consec_violation[pt.id] = state.consec_violation.get(pt.id, 0) + 1
            else:
                state.consec_violation[pt.id] = 0
        else:
            gbs_ok = _covered_by_live_gbs(scenario, pt, wall)
            state.report.gbs_served[slot, i] = 1 if gbs_ok else 0
            state.report.rates_bps[slot, i] = pt.min_rate_bps if gbs_ok else 0.0
    state.report.violations[slot] = violated_now

    if (
        state.report.serving_from_slot is None
        and plan is not None
        and plan.placed
        and all(p.uav.id in serving_uavs for p in plan.placed)
    ):
        state.report.serving_from_slot = slot
        state.report.timeline.append((slot, "serving", "all planned UAVs on station"))

    if (
        state.t_long_active_s is not None
        and grid.slot_of(state.t_long_active_s - state.t0_s) == slot
    ):
        state.report.timeline.append((slot, "long_term_active", "plan swap"))

    if state.bp is not None:
        arrivals = {}
        for flow in state.bp.flows:
            uav_id = flow.id.removeprefix("dl_")
            if uav_id in serving_uavs:
                load = _flow_demand(plan, uav_id, by_id)
                arrivals[flow.id] = load * grid.slot_length_s
        state.bp.step(arrivals)

    # mobile devices re-associate every slot; a persistent violation forces a
    # fresh decision round from the current demand snapshot
    if (
        scenario.mobiles
        and not state.redimensioned
        and any(
            v >= state.config.redimension_after_slots for v in state.consec_violation.values()
        )
    ):
        state.report.timeline.append((slot, "redimension", "persistent rate violation"))
        _redimension(state, slot)

    state.clock += 1
    return state


def _covered_by_live_gbs(scenario: Scenario, pt: DevicePoint, wall: float) -> bool:
    for g in scenario.geography.gbs:
        if g.operational_at(wall) and math.dist(g.position, pt.position) <= g.coverage_radius_m:
            return True
    return False


def _flow_demand(plan: DeploymentPlan, uav_id: str, by_id) -> float:
    j = next(i for i, p in enumerate(plan.placed) if p.uav.id == uav_id)
    total = 0.0
    for i, dev in enumerate(plan.device_ids):
        if plan.assoc_device[i, j] and dev in by_id:
            total += by_id[dev].min_rate_bps
    return total


def _live_plan(state, plan, serving_uavs, snapshot, slot):
    """The plan as flown this slot: only on-station UAVs transmit.

    With mobile devices the association and powers are refreshed against the
    current snapshot (budgets still enforced); static scenarios reuse the
    planned matrices unchanged.
    """
    keep = [j for j, p in enumerate(plan.placed) if p.uav.id in serving_uavs]
    if not keep:
        return None
    if not state.scenario.mobiles and len(keep) == len(plan.placed):
        return plan
    placed = tuple(plan.placed[j] for j in keep)
    positions = tuple(p.hover for p in placed)
    try:
        assoc, assignment = dim.associate_devices(
            snapshot, positions, state.scenario.channels, state.scenario.radio
        )
        power, power_uav = dim.allocate_power(
            assoc,
            assignment,
            snapshot,
            placed,
            state.scenario.channels,
            state.scenario.radio,
            state.scenario.channels.mode,
            dim_config=state.config.dimension,
        )
    except dim.DimensioningError:
        return None
    n = len(placed)
    return DeploymentPlan(
        placed=placed,
        device_ids=tuple(p.id for p in snapshot),
        assoc_device=assoc,
        assoc_uav=np.zeros((n, n), dtype=np.int8),
        power_device=power,
        power_uav=power_uav,
        channel_assignment=assignment,
        mode=state.scenario.channels.mode,
        gateway_gbs_id=plan.gateway_gbs_id,
    )


def _redimension(state: SimState, slot: int) -> None:
    """Fresh decision round mid-run: re-plan from current UAV positions."""
    scenario = state.scenario
    wall = state.t0_s + slot * state.grid.slot_length_s
    demand_scenario = _demand_view(scenario, state.demand_ids, wall)
    current = {
        tr.uav_id: tr.position_at(slot) for tr in state.trajectories if tr.active(slot)
    }
    fleet = tuple(
        replace(u, start_position=current[u.id]) if u.id in current else u
        for u in scenario.fleet
    )
    demand_scenario = replace(demand_scenario, fleet=fleet)
    front = dim.dimension_short_term(demand_scenario, fleet, state.config.dimension)
    if not front.front and not front.flagged:
        return
    point = _select(front, state.config.plan_select)
    batteries = {
        tr.uav_id: float(tr.battery_j[slot - tr.start_slot])
        for tr in state.trajectories
        if tr.active(slot)
    }
    remaining = TimeGrid(
        state.grid.slot_length_s, state.grid.horizon_slots - slot, state.grid.max_slot_length_s
    )
    trs, sched = plan_trajectories(
        point.plan,
        demand_scenario,
        remaining,
        state.config.policy,
        initial_batteries=batteries,
    )
    for tr in state.trajectories:
        if tr.active(slot):
            cut = slot - tr.start_slot
            tr.positions = tr.positions[:cut]
            tr.actions = tr.actions[:cut]
            tr.battery_j = tr.battery_j[: cut + 1]
            tr.drains_j = tr.drains_j[:cut]
            tr.charges_j = tr.charges_j[:cut]
            tr.comm_power_w = tr.comm_power_w[:cut]
    state.trajectories = [tr for tr in state.trajectories if len(tr.actions)]
    for tr in trs:
        tr.start_slot += slot
        state.trajectories.append(tr)
    for (station, s), ids in sched.occupancy.items():
        for i in ids:
            state.schedule.add(station, s + slot, i)
    state.short_point = point
    state.redimensioned = True


def finalize(state: SimState) -> None:
    report = state.report
    for tr in state.trajectories:
        spec = next(u.spec for u in state.scenario.fleet if u.id == tr.uav_id)
        pad = state.grid.horizon_slots
        battery = np.full(pad + 1, math.inf if spec.tethered else spec.battery_energy_j)
        drain = np.zeros(pad)
        charge = np.zeros(pad)
        n = len(tr.actions)
        battery[tr.start_slot : tr.start_slot + n + 1] = tr.battery_j
        battery[tr.start_slot + n + 1 :] = tr.battery_j[-1]
        drain[tr.start_slot : tr.start_slot + n] = tr.drains_j
        charge[tr.start_slot : tr.start_slot + n] = tr.charges_j
        if tr.uav_id in report.energy:
            # a re-dimension splice continues the same platform's ledger
            prev = report.energy[tr.uav_id]
            drain = prev["drain"] + drain
            charge = prev["charge"] + charge
            merged = prev["battery"].copy()
            mask = slice(tr.start_slot, pad + 1)
            merged[mask] = battery[mask]
            battery = merged
        report.energy[tr.uav_id] = {"battery": battery, "drain": drain, "charge": charge}
    if state.bp is not None:
        report.routing_trace = state.bp.trace
        report.routing_metrics = routing.route_metrics(state.bp.trace)
    withdrawn = [
        tr for tr in state.trajectories if tr.end_slot < state.grid.horizon_slots
    ]
    if state.t_long_active_s is not None and withdrawn:
        last = max(tr.end_slot for tr in withdrawn)
        report.timeline.append((last, "short_term_withdrawn", "bridge platforms home"))
    report.timeline.sort(key=lambda e: (e[0], e[1]))
