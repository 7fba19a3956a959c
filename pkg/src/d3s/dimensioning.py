"""Decision phase: fleet sizing, placement, association, power allocation.

Produces a Pareto front over (number of UAVs, min UAV lifetime) where every
front member serves all demand at its minimum rate (zero violation); plans
that cannot are returned separately, flagged.

Channel model conventions (shared with the simulator):
  - within a cell, devices sharing a channel split its width equally, so
    intra-cell transmissions are orthogonal;
  - in shared-spectrum mode other cells' co-channel transmissions interfere,
    in OFDMA mode cells get disjoint channel partitions and no interference;
  - the UAV-UAV backbone runs in its own band (full aggregate width) and
    neither suffers nor causes device-link interference.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from . import radio
from .fleet import Term, Uav, UavSpec
from .radio import RadioConfig, SpectrumMode
from .scenario import ChannelSet, DevicePoint, Scenario, devices_at


class DimensioningError(ValueError):
    pass


class PlanInvariantError(DimensioningError):
    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


class InfeasibleAssociationError(DimensioningError):
    pass


class NonConvergenceError(DimensioningError):
    def __init__(self, message: str, last_powers):
        self.last_powers = last_powers
        super().__init__(message)


class OracleSizeError(DimensioningError):
    pass


class TransitionError(DimensioningError):
    pass


@dataclass(frozen=True)
class PlacedUav:
    uav: Uav
    hover: tuple[float, float, float]


@dataclass(frozen=True)
class Objectives:
    f_u: int
    f_t_s: float  # math.inf for tethered-only plans
    max_rate_violation_bps: float


@dataclass
class DeploymentPlan:
    placed: tuple[PlacedUav, ...]
    device_ids: tuple[str, ...]
    assoc_device: np.ndarray  # (n_dev, n_uav) binary
    assoc_uav: np.ndarray  # (n_uav, n_uav) binary, symmetric, zero diagonal
    power_device: np.ndarray  # (n_dev, n_uav) watts
    power_uav: np.ndarray  # (n_uav, n_uav) watts, entry [m, n] = power m sends to n
    channel_assignment: dict[str, tuple[int, ...]]  # device id -> channel indices
    mode: SpectrumMode
    gateway_gbs_id: str | None = None

    @property
    def n_uavs(self) -> int:
        return len(self.placed)

    def uav_comm_power(self, j: int) -> float:
        return float(self.power_device[:, j].sum() + self.power_uav[j, :].sum())


@dataclass(frozen=True)
class MissionGeometry:
    """Per-UAV travel endpoints: standby start and post-mission return point."""

    start: dict[str, tuple[float, float, float]]
    back: dict[str, tuple[float, float, float]]


@dataclass(frozen=True)
class PlanPoint:
    plan: DeploymentPlan
    objectives: Objectives


@dataclass(frozen=True)
class FrontResult:
    front: tuple[PlanPoint, ...]  # non-dominated, zero violation, sorted by f_u
    flagged: tuple[PlanPoint, ...]  # violating plans kept for diagnostics


@dataclass(frozen=True)
class DimensionConfig:
    restarts: int = 4
    kmeans_iters: int = 40
    altitude_candidates_short: tuple[float, ...] = (50.0, 100.0, 200.0)
    altitude_candidates_long: tuple[float, ...] = (300.0,)
    power_objective: str = "min_power"  # or "max_min_rate"
    fixed_point_max_iters: int = 200
    fixed_point_tol_w: float = 1e-12
    backbone_margin: float = 1.0


@dataclass(frozen=True)
class TransitionSchedule:
    short_plan: DeploymentPlan
    long_plan: DeploymentPlan
    t_deploy_s: float
    t_long_active_s: float  # long plan serves from here; short UAVs then withdraw


# ---------------------------------------------------------------------------
# plan validation and objectives
# ---------------------------------------------------------------------------


def validate_plan(plan: DeploymentPlan) -> None:
    """Raise PlanInvariantError listing every violated plan invariant."""
    problems = []
    n_dev = len(plan.device_ids)
    n_uav = plan.n_uavs
    if plan.assoc_device.shape != (n_dev, n_uav):
        problems.append("assoc_device shape mismatch")
    if n_dev and n_uav:
        sums = plan.assoc_device.sum(axis=1)
        for i, s in enumerate(sums):
            if s != 1:
                problems.append(f"device {plan.device_ids[i]} has {s} associations (needs 1)")
    if not np.array_equal(plan.assoc_uav, plan.assoc_uav.T):
        problems.append("assoc_uav is not symmetric")
    if n_uav and np.any(np.diag(plan.assoc_uav) != 0):
        problems.append("assoc_uav has nonzero diagonal")
    if np.any((plan.power_device > 0) & (plan.assoc_device == 0)):
        problems.append("power assigned outside associations")
    for j, placed in enumerate(plan.placed):
        total = plan.uav_comm_power(j)
        if total > placed.uav.spec.comm_power_max_w * (1 + 1e-9):
            problems.append(
                f"uav {placed.uav.id} comm power {total:.6g} W exceeds budget "
                f"{placed.uav.spec.comm_power_max_w} W"
            )
        alt = placed.hover[2]
        if not placed.uav.spec.altitude_min_m <= alt <= placed.uav.spec.altitude_max_m:
            problems.append(f"uav {placed.uav.id} altitude {alt} outside spec range")
    if problems:
        raise PlanInvariantError(problems)


def mission_geometry(scenario: Scenario, placed: tuple[PlacedUav, ...]) -> MissionGeometry:
    """Start at the fleet standby point; return to the nearest charging station."""
    start = {}
    back = {}
    for p in placed:
        start[p.uav.id] = p.uav.start_position
        stations = scenario.geography.charging_stations
        if stations and not p.uav.spec.tethered:
            st = min(stations, key=lambda s: (math.dist(s.position, p.hover[:2]), s.position))
            back[p.uav.id] = (st.position[0], st.position[1], 0.0)
        else:
            back[p.uav.id] = p.uav.start_position
    return MissionGeometry(start=start, back=back)


def uav_lifetime(placed: PlacedUav, plan: DeploymentPlan, geometry: MissionGeometry) -> float:
    """Service time left after travel: (battery - travel energy) / (hover + comm)."""
    spec = placed.uav.spec
    if spec.tethered:
        return math.inf
    j = next(i for i, p in enumerate(plan.placed) if p.uav.id == placed.uav.id)
    p_comm = plan.uav_comm_power(j)
    travel_dist = radio.distance(geometry.start[placed.uav.id], placed.hover) + radio.distance(
        placed.hover, geometry.back[placed.uav.id]
    )
    e_travel = spec.travel_power_w * (travel_dist / spec.speed_max_ms) if spec.speed_max_ms else 0.0
    remaining = spec.battery_energy_j - e_travel
    if remaining <= 0:
        return 0.0
    denom = spec.hover_power_w + p_comm
    return remaining / denom if denom > 0 else math.inf


def achieved_rates(
    plan: DeploymentPlan,
    snapshot: tuple[DevicePoint, ...],
    channels: ChannelSet,
    config: RadioConfig,
) -> dict[str, float]:
    """Per-device downlink rate under the plan's powers and channel map."""
    points = {p.id: p for p in snapshot}
    serving = _serving_map(plan)
    sharers = _channel_sharers(plan)
    rates: dict[str, float] = {}
    for dev_id in plan.device_ids:
        if dev_id not in points:
            continue
        j = serving.get(dev_id)
        if j is None:
            rates[dev_id] = 0.0
            continue
        rates[dev_id] = _device_rate(plan, points[dev_id], dev_id, j, channels, config, sharers)
    return rates


def _serving_map(plan: DeploymentPlan) -> dict[str, int]:
    out = {}
    for i, dev_id in enumerate(plan.device_ids):
        row = np.flatnonzero(plan.assoc_device[i])
        if row.size:
            out[dev_id] = int(row[0])
    return out


def _channel_sharers(plan: DeploymentPlan) -> dict[tuple[int, int], int]:
    """(uav index, channel index) -> number of cell devices on that channel."""
    serving = _serving_map(plan)
    counts: dict[tuple[int, int], int] = {}
    for dev_id, chans in plan.channel_assignment.items():
        j = serving.get(dev_id)
        if j is None:
            continue
        for ch in chans:
            counts[(j, ch)] = counts.get((j, ch), 0) + 1
    return counts


def _device_rate(plan, point, dev_id, j, channels, config, sharers) -> float:
    i = plan.device_ids.index(dev_id)
    chans = plan.channel_assignment.get(dev_id, ())
    if not chans:
        return 0.0
    p_total = float(plan.power_device[i, j])
    rx = (point.position[0], point.position[1], 0.0)
    total = 0.0
    per_ch_power = p_total / len(chans)
    for ch in chans:
        width = channels.channels[ch].width_hz / sharers[(j, ch)]
        if per_ch_power <= 0:
            continue
        target = radio.Link(plan.placed[j].hover, rx, per_ch_power, channel=ch)
        interferers = _co_channel_interferers(plan, dev_id, j, ch)
        s = radio.sinr(target, interferers, config, plan.mode, width)
        total += radio.achievable_rate(width, s)
    return total


def _co_channel_interferers(plan, dev_id, j, ch) -> list[radio.Link]:
    if plan.mode is SpectrumMode.OFDMA:
        return []
    serving = _serving_map(plan)
    links = []
    for other_id, chans in plan.channel_assignment.items():
        if other_id == dev_id or ch not in chans:
            continue
        k = serving.get(other_id)
        if k is None or k == j:
            continue  # same-cell transmissions are orthogonal by construction
        m = plan.device_ids.index(other_id)
        p = float(plan.power_device[m, k]) / len(chans)
        if p <= 0:
            continue
        # receiver position does not matter for an interferer description;
        # sinr() recomputes the gain toward the actual receiver
        links.append(radio.Link(plan.placed[k].hover, (0.0, 0.0, -1.0), p, channel=ch))
    return links


def evaluate_plan(plan: DeploymentPlan, scenario: Scenario, t: float) -> Objectives:
    """Objectives (f_U, f_T, max rate violation) of a plan at time t.

    A UAV counts toward f_U when it serves at least one device or carries a
    backbone link.
    """
    validate_plan(plan)
    snapshot = devices_at(scenario, t)
    by_id = {p.id: p for p in snapshot}
    geometry = mission_geometry(scenario, plan.placed)
    f_u = sum(
        1
        for j in range(plan.n_uavs)
        if (len(plan.device_ids) and plan.assoc_device[:, j].any()) or plan.assoc_uav[j].any()
    )
    if plan.n_uavs == 0:
        return Objectives(0, math.inf, 0.0)
    f_t = min(uav_lifetime(p, plan, geometry) for p in plan.placed)
    rates = achieved_rates(plan, snapshot, scenario.channels, scenario.radio)
    violation = 0.0
    for dev_id in plan.device_ids:
        point = by_id.get(dev_id)
        if point is None:
            continue
        violation = max(violation, point.min_rate_bps - rates.get(dev_id, 0.0))
    return Objectives(f_u, f_t, max(0.0, violation))


# ---------------------------------------------------------------------------
# association and channel assignment
# ---------------------------------------------------------------------------


def associate_devices(
    snapshot: tuple[DevicePoint, ...],
    uav_positions: tuple[tuple[float, float, float], ...],
    channels: ChannelSet,
    config: RadioConfig,
) -> tuple[np.ndarray, dict[str, tuple[int, ...]]]:
    """Max-gain association (ties to the lower UAV index) plus channel deal.

    Channels available to a cell (all of them in shared mode, a round-robin
    partition in OFDMA mode) are dealt round-robin to the cell's devices in id
    order; extra passes hand out the remaining channels to devices whose
    demand is not yet coverable at full budget on what they hold.
    """
    n_dev, n_uav = len(snapshot), len(uav_positions)
    if n_dev and not n_uav:
        raise InfeasibleAssociationError("no UAV available for a nonempty demand set")
    assoc = np.zeros((n_dev, n_uav), dtype=np.int8)
    order = sorted(range(n_dev), key=lambda i: snapshot[i].id)
    for i in order:
        rx = (snapshot[i].position[0], snapshot[i].position[1], 0.0)
        gains = [radio.channel_gain(pos, rx, config) for pos in uav_positions]
        assoc[i, int(np.argmax(gains))] = 1
    assignment = _deal_channels(snapshot, assoc, channels)
    return assoc, assignment


def _cell_channel_pool(channels: ChannelSet, n_uav: int, j: int) -> list[int]:
    ids = list(range(len(channels.channels)))
    if channels.mode is SpectrumMode.OFDMA and n_uav > 0:
        return [c for c in ids if c % n_uav == j]
    return ids


def _deal_channels(snapshot, assoc, channels: ChannelSet) -> dict[str, tuple[int, ...]]:
    n_dev, n_uav = assoc.shape
    by_id = {p.id: p for p in snapshot}
    assignment: dict[str, list[int]] = {p.id: [] for p in snapshot}
    for j in range(n_uav):
        members = sorted(snapshot[i].id for i in np.flatnonzero(assoc[:, j]))
        pool = _cell_channel_pool(channels, n_uav, j)
        if not members:
            continue
        if not pool:
            raise InfeasibleAssociationError(
                f"cell {j} received no channels under {channels.mode.value} partitioning"
            )
        # first pass: one channel each, wrapping if devices outnumber channels
        for idx, dev in enumerate(members):
            assignment[dev].append(pool[idx % len(pool)])
        remaining = pool[len(members) % len(pool):] if len(members) < len(pool) else []
        cursor = 0
        for ch in remaining:
            # extra channels go to devices that still need headroom, in order
            for _ in range(len(members)):
                dev = members[cursor % len(members)]
                cursor += 1
                if _wants_more(by_id[dev], assignment[dev], channels):
                    assignment[dev].append(ch)
                    break
            else:
                break
    return {k: tuple(v) for k, v in assignment.items()}


def _wants_more(point: DevicePoint, held: list[int], channels: ChannelSet) -> bool:
    # capacity bound at a generous reference SINR; below demand means another
    # channel is still useful
    cap = sum(channels.channels[ch].width_hz for ch in held) * math.log2(1 + 1e6)
    return cap < point.min_rate_bps


# ---------------------------------------------------------------------------
# power allocation
# ---------------------------------------------------------------------------


def _noise_w(config: RadioConfig, width: float) -> float:
    return config.noise_density_w_hz * width


def allocate_power(
    assoc: np.ndarray,
    assignment: dict[str, tuple[int, ...]],
    snapshot: tuple[DevicePoint, ...],
    placed: tuple[PlacedUav, ...],
    channels: ChannelSet,
    config: RadioConfig,
    mode: SpectrumMode,
    backbone: tuple[np.ndarray, np.ndarray] | None = None,
    dim_config: DimensionConfig = DimensionConfig(),
) -> tuple[np.ndarray, np.ndarray]:
    """Minimum powers meeting each device's min rate, then budget enforcement.

    OFDMA inverts the Shannon formula in closed form; shared spectrum runs a
    fixed-point iteration over the co-channel interference.  When a UAV's
    budget is insufficient its powers are scaled down to the budget and the
    shortfall shows up as a rate violation downstream.
    """
    n_dev, n_uav = assoc.shape
    device_ids = tuple(p.id for p in snapshot)
    plan = DeploymentPlan(
        placed=placed,
        device_ids=device_ids,
        assoc_device=assoc,
        assoc_uav=np.zeros((n_uav, n_uav), dtype=np.int8),
        power_device=np.zeros((n_dev, n_uav)),
        power_uav=np.zeros((n_uav, n_uav)),
        channel_assignment=assignment,
        mode=mode,
    )
    sharers = _channel_sharers(plan)
    serving = _serving_map(plan)
    power = np.zeros((n_dev, n_uav))
    prev = None
    for iteration in range(dim_config.fixed_point_max_iters):
        new_power = np.zeros_like(power)
        for i, point in enumerate(snapshot):
            j = serving.get(point.id)
            if j is None:
                continue
            chans = assignment.get(point.id, ())
            if not chans:
                continue
            widths = [channels.channels[ch].width_hz / sharers[(j, ch)] for ch in chans]
            eff_total = sum(widths)
            target_sinr = radio.invert_rate(point.min_rate_bps, eff_total)
            rx = (point.position[0], point.position[1], 0.0)
            g = radio.channel_gain(placed[j].hover, rx, config)
            need = 0.0
            for ch, width in zip(chans, widths):
                noise_plus_i = _noise_w(config, width)
                if mode is SpectrumMode.SHARED:
                    noise_plus_i += _interference_at(
                        plan, power, point, i, j, ch, config
                    )
                need += target_sinr * noise_plus_i / g
            new_power[i, j] = need
        if prev is not None and np.max(np.abs(new_power - power)) < dim_config.fixed_point_tol_w:
            power = new_power
            break
        prev = power
        power = new_power
        if mode is SpectrumMode.OFDMA:
            break  # closed form, no interference coupling
    else:
        raise NonConvergenceError(
            f"power fixed point did not converge in {dim_config.fixed_point_max_iters} iterations",
            power,
        )

    power_uav = _backbone_powers(plan, snapshot, channels, config, backbone, dim_config)
    # enforce per-UAV budgets by scaling device powers down
    for j, p in enumerate(placed):
        budget = p.uav.spec.comm_power_max_w
        backbone_power = float(power_uav[j, :].sum())
        device_power = float(power[:, j].sum())
        if device_power + backbone_power > budget:
            avail = max(0.0, budget - backbone_power)
            scale = avail / device_power if device_power > 0 else 0.0
            power[:, j] *= scale
    return power, power_uav


def _interference_at(plan, power, point, i, j, ch, config) -> float:
    total = 0.0
    rx = (point.position[0], point.position[1], 0.0)
    serving = _serving_map(plan)
    for other_id, chans in plan.channel_assignment.items():
        if other_id == point.id or ch not in chans:
            continue
        k = serving.get(other_id)
        if k is None or k == j:
            continue
        m = plan.device_ids.index(other_id)
        p = power[m, k] / len(chans)
        if p <= 0:
            continue
        total += p * radio.channel_gain(plan.placed[k].hover, rx, config)
    return total


def _backbone_powers(
    plan, snapshot, channels, config, backbone, dim_config
) -> np.ndarray:
    """Power on each directed tree edge sized for its subtree's demand sum.

    The backbone runs in its own band of the full aggregate channel width, so
    the inversion is interference free.
    """
    n_uav = plan.n_uavs
    power_uav = np.zeros((n_uav, n_uav))
    if backbone is None or n_uav == 0:
        return power_uav
    assoc_uav, subtree_rate = backbone
    width = channels.total_width_hz
    for m in range(n_uav):
        for n in range(n_uav):
            rate = subtree_rate[m, n]
            if rate <= 0:
                continue
            g = radio.channel_gain(plan.placed[m].hover, plan.placed[n].hover, config)
            target = radio.invert_rate(rate * dim_config.backbone_margin, width)
            power_uav[m, n] = target * _noise_w(config, width) / g
    return power_uav


def build_backbone(
    placed: tuple[PlacedUav, ...],
    scenario: Scenario,
    demand_rate: dict[str, float],
    serving: dict[str, int],
) -> tuple[np.ndarray, np.ndarray, str | None]:
    """Minimum spanning tree over used UAVs rooted at the nearest live GBS.

    Returns (symmetric association matrix, directed subtree-rate matrix,
    gateway GBS id).  Edge [m, n] carries the total device demand served in
    n's subtree when m is n's parent on the path from the gateway.
    """
    n = len(placed)
    assoc = np.zeros((n, n), dtype=np.int8)
    rates = np.zeros((n, n))
    if n == 0:
        return assoc, rates, None
    gateways = [g for g in scenario.geography.gbs if g.operational_at(scenario.request.window_s[0])]
    gateway = None
    root_pos = None
    if gateways:
        t0 = scenario.request.window_s[0]
        gateway = min(
            gateways,
            key=lambda g: (min(math.dist(g.position, p.hover[:2]) for p in placed), g.id),
        )
        root_pos = (gateway.position[0], gateway.position[1], 0.0)
    if n == 1:
        return assoc, rates, gateway.id if gateway else None

    # Prim from the root (or UAV 0 when no GBS is alive), ties to lower index
    nodes = [root_pos] + [p.hover for p in placed] if root_pos else [p.hover for p in placed]
    offset = 1 if root_pos else 0
    in_tree = {0}
    parent: dict[int, int] = {}
    while len(in_tree) < len(nodes):
        best = None
        for u in sorted(in_tree):
            for v in range(len(nodes)):
                if v in in_tree:
                    continue
                d = radio.distance(nodes[u], nodes[v])
                if best is None or (d, v, u) < best:
                    best = (d, v, u)
        _, v, u = best
        in_tree.add(v)
        parent[v] = u
    for v, u in parent.items():
        if u >= offset and v >= offset:
            assoc[u - offset, v - offset] = 1
            assoc[v - offset, u - offset] = 1

    # per-UAV served demand, then accumulate up the tree
    served = np.zeros(n)
    for dev_id, j in serving.items():
        served[j] += demand_rate.get(dev_id, 0.0)
    children: dict[int, list[int]] = {}
    for v, u in parent.items():
        children.setdefault(u, []).append(v)

    def subtree(v: int) -> float:
        total = served[v - offset] if v >= offset else 0.0
        for c in children.get(v, []):
            total += subtree(c)
        return total

    for v, u in parent.items():
        if v >= offset:
            load = subtree(v)
            if u >= offset:
                rates[u - offset, v - offset] = load
    return assoc, rates, gateway.id if gateway else None


def max_min_rate_powers(
    plan: DeploymentPlan,
    snapshot: tuple[DevicePoint, ...],
    channels: ChannelSet,
    config: RadioConfig,
    tol_bps: float = 1e3,
) -> np.ndarray:
    """Scale device powers up to each UAV's remaining budget, equalizing rates.

    Per cell, bisect a common target rate r* and give each device the power
    that reaches max(r*, its min rate); the budget binds at the top.  Shared
    mode reuses the current interference (one outer refresh pass).
    """
    serving = _serving_map(plan)
    sharers = _channel_sharers(plan)
    by_index = {p.id: i for i, p in enumerate(snapshot)}
    power = plan.power_device.copy()
    for _ in range(3 if plan.mode is SpectrumMode.SHARED else 1):
        for j, placed in enumerate(plan.placed):
            members = [d for d, jj in serving.items() if jj == j and d in by_index]
            if not members:
                continue
            budget = placed.uav.spec.comm_power_max_w - float(plan.power_uav[j, :].sum())
            if budget <= 0:
                continue

            def cell_power(target_rate: float) -> float:
                total = 0.0
                for dev in members:
                    i = by_index[dev]
                    point = snapshot[i]
                    chans = plan.channel_assignment.get(dev, ())
                    if not chans:
                        continue
                    widths = [channels.channels[c].width_hz / sharers[(j, c)] for c in chans]
                    eff = sum(widths)
                    goal = max(target_rate, point.min_rate_bps)
                    s = radio.invert_rate(goal, eff)
                    rx = (point.position[0], point.position[1], 0.0)
                    g = radio.channel_gain(plan.placed[j].hover, rx, config)
                    for c, width in zip(chans, widths):
                        noise_plus_i = _noise_w(config, width)
                        if plan.mode is SpectrumMode.SHARED:
                            i_dev = by_index[dev]
                            noise_plus_i += _interference_at(
                                plan, power, point, i_dev, j, c, config
                            )
                        total += s * noise_plus_i / g
                return total

            lo, hi = 0.0, 1e9
            while cell_power(hi) < budget and hi < 1e12:
                hi *= 2
            while hi - lo > tol_bps:
                mid = (lo + hi) / 2
                if cell_power(mid) <= budget:
                    lo = mid
                else:
                    hi = mid
            for dev in members:
                i = by_index[dev]
                point = snapshot[i]
                chans = plan.channel_assignment.get(dev, ())
                if not chans:
                    continue
                widths = [channels.channels[c].width_hz / sharers[(j, c)] for c in chans]
                eff = sum(widths)
                goal = max(lo, point.min_rate_bps)
                s = radio.invert_rate(goal, eff)
                rx = (point.position[0], point.position[1], 0.0)
                g = radio.channel_gain(plan.placed[j].hover, rx, config)
                need = 0.0
                for c, width in zip(chans, widths):
                    noise_plus_i = _noise_w(config, width)
                    if plan.mode is SpectrumMode.SHARED:
                        noise_plus_i += _interference_at(plan, power, point, i, j, c, config)
                    need += s * noise_plus_i / g
                power[i, j] = need
            scale = budget / max(power[:, j].sum(), 1e-30)
            if scale < 1.0:
                power[:, j] *= scale
    return power


# ---------------------------------------------------------------------------
# clustering
# ---------------------------------------------------------------------------


def _weighted_kmeans(points, weights, k, rng, iters):
    """Plain Lloyd iterations on rate-weighted positions; returns labels."""
    n = len(points)
    xs = np.asarray(points, dtype=float)
    ws = np.asarray(weights, dtype=float)
    centroids = xs[rng.choice(n, size=k, replace=False)]
    labels = np.zeros(n, dtype=int)
    for _ in range(iters):
        d2 = ((xs[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        if np.array_equal(new_labels, labels) and _ > 0:
            break
        labels = new_labels
        for c in range(k):
            mask = labels == c
            if mask.any():
                w = ws[mask]
                centroids[c] = (xs[mask] * w[:, None]).sum(axis=0) / w.sum()
            else:
                centroids[c] = xs[rng.integers(0, n)]
    return labels, centroids


# ---------------------------------------------------------------------------
# dimensioning pipelines
# ---------------------------------------------------------------------------


def _empty_plan(mode: SpectrumMode) -> DeploymentPlan:
    return DeploymentPlan(
        placed=(),
        device_ids=(),
        assoc_device=np.zeros((0, 0), dtype=np.int8),
        assoc_uav=np.zeros((0, 0), dtype=np.int8),
        power_device=np.zeros((0, 0)),
        power_uav=np.zeros((0, 0)),
        channel_assignment={},
        mode=mode,
    )


def _build_plan_at(
    scenario: Scenario,
    snapshot: tuple[DevicePoint, ...],
    chosen: list[tuple[Uav, tuple[float, float, float]]],
    config: DimensionConfig,
) -> DeploymentPlan:
    """Assemble a full plan for given UAV placements: associate, tree, powers."""
    placed = tuple(PlacedUav(uav=u, hover=h) for u, h in chosen)
    positions = tuple(p.hover for p in placed)
    assoc, assignment = associate_devices(snapshot, positions, scenario.channels, scenario.radio)
    plan = DeploymentPlan(
        placed=placed,
        device_ids=tuple(p.id for p in snapshot),
        assoc_device=assoc,
        assoc_uav=np.zeros((len(placed), len(placed)), dtype=np.int8),
        power_device=np.zeros((len(snapshot), len(placed))),
        power_uav=np.zeros((len(placed), len(placed))),
        channel_assignment=assignment,
        mode=scenario.channels.mode,
    )
    serving = _serving_map(plan)
    demand = {p.id: p.min_rate_bps for p in snapshot}
    assoc_uav, subtree, gateway_id = build_backbone(placed, scenario, demand, serving)
    power_device, power_uav = allocate_power(
        assoc,
        assignment,
        snapshot,
        placed,
        scenario.channels,
        scenario.radio,
        scenario.channels.mode,
        backbone=(assoc_uav, subtree),
        dim_config=config,
    )
    plan.assoc_uav = assoc_uav
    plan.power_device = power_device
    plan.power_uav = power_uav
    plan.gateway_gbs_id = gateway_id
    return plan


def _assign_fleet(
    centroids: np.ndarray, fleet: list[Uav]
) -> list[tuple[Uav, tuple[float, float]]]:
    """Standby-to-cluster matching minimizing the worst travel distance.

    Small instance counts allow exhaustive matching (min max-distance, then
    min total); larger fleets fall back to greedy nearest-standby.
    """
    k = len(centroids)
    points = [(float(c[0]), float(c[1])) for c in centroids]
    members = sorted(fleet, key=lambda u: u.id)
    if k <= 6 and len(members) <= 8:
        best = None
        for subset in itertools.permutations(members, k):
            dists = [math.dist(u.start_position[:2], p) for u, p in zip(subset, points)]
            key = (max(dists), sum(dists), tuple(u.id for u in subset))
            if best is None or key < best[0]:
                best = (key, subset)
        return list(zip(best[1], points))
    available = list(members)
    chosen = []
    for p in points:
        uav = min(available, key=lambda u: (math.dist(u.start_position[:2], p), u.id))
        available.remove(uav)
        chosen.append((uav, p))
    return chosen


def _pick_altitude(
    scenario: Scenario,
    snapshot: tuple[DevicePoint, ...],
    chosen2d: list[tuple[Uav, tuple[float, float]]],
    candidates: tuple[float, ...],
    config: DimensionConfig,
) -> list[tuple[Uav, tuple[float, float, float]]]:
    """Per-UAV altitude from the candidate set maximizing its cell's min rate.

    Cells are evaluated in isolation (interference-free proxy), which is exact
    under OFDMA and a close upper bound in shared mode.
    """
    out = []
    for uav, (cx, cy) in chosen2d:
        usable = [a for a in candidates if uav.spec.altitude_min_m <= a <= uav.spec.altitude_max_m]
        if not usable:
            usable = [min(max(candidates[0], uav.spec.altitude_min_m), uav.spec.altitude_max_m)]
        best = None
        for alt in usable:
            # min-gain point decides the cell's worst rate at any power split
            worst = min(
                (
                    radio.channel_gain((cx, cy, alt), (p.position[0], p.position[1], 0.0), scenario.radio)
                    for p in snapshot
                ),
                default=0.0,
            )
            if best is None or worst > best[0]:
                best = (worst, alt)
        out.append((uav, (cx, cy, best[1])))
    return out


def _pareto_front(points: list[PlanPoint]) -> list[PlanPoint]:
    """Mutually non-dominated subset in (f_u asc, f_t desc), sorted by f_u."""
    front = []
    for p in points:
        dominated = False
        for q in points:
            if q is p:
                continue
            if (
                q.objectives.f_u <= p.objectives.f_u
                and q.objectives.f_t_s >= p.objectives.f_t_s
                and (q.objectives.f_u < p.objectives.f_u or q.objectives.f_t_s > p.objectives.f_t_s)
            ):
                dominated = True
                break
        if not dominated:
            front.append(p)
    front.sort(key=lambda p: (p.objectives.f_u, -p.objectives.f_t_s))
    dedup = []
    for p in front:
        if not dedup or (
            dedup[-1].objectives.f_u,
            dedup[-1].objectives.f_t_s,
        ) != (p.objectives.f_u, p.objectives.f_t_s):
            dedup.append(p)
    return dedup


def _dimension(
    scenario: Scenario,
    fleet: list[Uav],
    config: DimensionConfig,
    altitude_candidates: tuple[float, ...],
    t: float,
) -> FrontResult:
    snapshot = devices_at(scenario, t)
    if not snapshot:
        empty = PlanPoint(_empty_plan(scenario.channels.mode), Objectives(0, math.inf, 0.0))
        return FrontResult(front=(empty,), flagged=())
    if not fleet:
        raise DimensioningError("fleet has no UAV of the requested term")
    points = [p.position for p in snapshot]
    weights = [p.min_rate_bps for p in snapshot]
    rng = np.random.default_rng(scenario.seed)
    k_max = min(len(fleet), len(snapshot))
    feasible: list[PlanPoint] = []
    flagged: list[PlanPoint] = []
    for k in range(1, k_max + 1):
        best: PlanPoint | None = None
        for _ in range(config.restarts):
            labels, centroids = _weighted_kmeans(points, weights, k, rng, config.kmeans_iters)
            chosen2d = _assign_fleet(centroids, fleet)
            chosen = _pick_altitude(scenario, snapshot, chosen2d, altitude_candidates, config)
            try:
                plan = _build_plan_at(scenario, snapshot, chosen, config)
            except (InfeasibleAssociationError, NonConvergenceError):
                continue
            objectives = evaluate_plan(plan, scenario, t)
            point = PlanPoint(plan, objectives)
            if best is None or _plan_key(point) < _plan_key(best):
                best = point
        if best is None:
            continue
        if best.objectives.max_rate_violation_bps <= 0:
            feasible.append(best)
        else:
            flagged.append(best)
    return FrontResult(front=tuple(_pareto_front(feasible)), flagged=tuple(flagged))


def _plan_key(point: PlanPoint):
    # prefer zero violation, then longest lifetime
    return (point.objectives.max_rate_violation_bps, -point.objectives.f_t_s)


def dimension_short_term(
    scenario: Scenario, fleet: tuple[Uav, ...], config: DimensionConfig = DimensionConfig()
) -> FrontResult:
    """Pareto front over k = 1..k_max short-term UAVs at the window start."""
    short = [u for u in fleet if u.spec.term is Term.SHORT]
    return _dimension(
        scenario, short, config, config.altitude_candidates_short, scenario.request.window_s[0]
    )


def dimension_long_term(
    scenario: Scenario, fleet: tuple[Uav, ...], config: DimensionConfig = DimensionConfig()
) -> FrontResult:
    """Same pipeline over long-term platforms; tethered lifetime is unbounded."""
    long_fleet = [u for u in fleet if u.spec.term is Term.LONG]
    return _dimension(
        scenario, long_fleet, config, config.altitude_candidates_long, scenario.request.window_s[0]
    )


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------

ORACLE_MAX_CANDIDATES = 6
ORACLE_MAX_FLEET = 3
ORACLE_MAX_DEVICES = 5
ORACLE_MAX_POWER_LEVELS = 4


def brute_force_front(
    scenario: Scenario,
    fleet: tuple[Uav, ...],
    candidate_locations: tuple[tuple[float, float, float], ...],
    power_levels: tuple[float, ...],
    config: DimensionConfig = DimensionConfig(),
) -> FrontResult:
    """Exhaustive front over UAV subsets x location assignments x power levels.

    Guardrails keep the enumeration desk-sized; every configuration is scored
    by the same evaluate_plan as the heuristic.
    """
    t = scenario.request.window_s[0]
    snapshot = devices_at(scenario, t)
    if len(candidate_locations) > ORACLE_MAX_CANDIDATES:
        raise OracleSizeError(f"more than {ORACLE_MAX_CANDIDATES} candidate locations")
    if len(fleet) > ORACLE_MAX_FLEET:
        raise OracleSizeError(f"more than {ORACLE_MAX_FLEET} fleet members")
    if len(snapshot) > ORACLE_MAX_DEVICES:
        raise OracleSizeError(f"more than {ORACLE_MAX_DEVICES} devices")
    if len(power_levels) > ORACLE_MAX_POWER_LEVELS:
        raise OracleSizeError(f"more than {ORACLE_MAX_POWER_LEVELS} power levels")
    if not fleet:
        return FrontResult(front=(), flagged=())

    feasible: list[PlanPoint] = []
    flagged: list[PlanPoint] = []
    members = sorted(fleet, key=lambda u: u.id)
    for size in range(1, len(members) + 1):
        for subset in itertools.combinations(members, size):
            for locs in itertools.permutations(candidate_locations, size):
                base = None
                try:
                    base = _build_plan_at(scenario, snapshot, list(zip(subset, locs)), config)
                except (InfeasibleAssociationError, NonConvergenceError):
                    continue
                for levels in itertools.product(power_levels, repeat=size):
                    plan = replace_powers(base, levels)
                    objectives = evaluate_plan(plan, scenario, t)
                    point = PlanPoint(plan, objectives)
                    if objectives.max_rate_violation_bps <= 0:
                        feasible.append(point)
                    else:
                        flagged.append(point)
    return FrontResult(front=tuple(_pareto_front(feasible)), flagged=tuple(flagged[:32]))


def replace_powers(base: DeploymentPlan, levels: tuple[float, ...]) -> DeploymentPlan:
    """Oracle configuration: UAV j transmits at levels[j] to each of its devices."""
    power = np.zeros_like(base.power_device)
    for i in range(len(base.device_ids)):
        js = np.flatnonzero(base.assoc_device[i])
        if js.size:
            power[i, js[0]] = levels[js[0]]
    plan = DeploymentPlan(
        placed=base.placed,
        device_ids=base.device_ids,
        assoc_device=base.assoc_device,
        assoc_uav=base.assoc_uav,
        power_device=power,
        power_uav=base.power_uav,
        channel_assignment=base.channel_assignment,
        mode=base.mode,
        gateway_gbs_id=base.gateway_gbs_id,
    )
    # budget overruns are not representable plans: cap to budget (flagged later)
    for j, p in enumerate(plan.placed):
        total = plan.uav_comm_power(j)
        budget = p.uav.spec.comm_power_max_w
        if total > budget:
            backbone = float(plan.power_uav[j, :].sum())
            avail = max(0.0, budget - backbone)
            dev = float(plan.power_device[:, j].sum())
            plan.power_device[:, j] *= (avail / dev) if dev > 0 else 0.0
    return plan


# ---------------------------------------------------------------------------
# short -> long transition
# ---------------------------------------------------------------------------


def transition_plan(
    short_plan: DeploymentPlan,
    long_plan: DeploymentPlan,
    scenario: Scenario,
) -> TransitionSchedule:
    """Bridge schedule: short fleet serves until the long fleet becomes active.

    The long activation instant is the deployment delay of the slowest
    long-term platform; short UAVs must survive (lifetime) until then.
    """
    t0 = scenario.request.window_s[0]
    delay = max((p.uav.spec.deploy_delay_s for p in long_plan.placed), default=0.0)
    t_active = t0 + delay
    if t_active >= scenario.request.window_s[1]:
        raise TransitionError(
            f"long plan activates at {t_active} s, after the service window ends"
        )
    if delay > 0 and short_plan.placed:
        geometry = mission_geometry(scenario, short_plan.placed)
        worst = min(uav_lifetime(p, short_plan, geometry) for p in short_plan.placed)
        if worst < delay:
            raise TransitionError(
                f"short-term lifetime {worst:.0f} s cannot cover the {delay:.0f} s "
                "long-term deployment delay"
            )
    for plan in (short_plan, long_plan):
        if plan.placed:
            objectives = evaluate_plan(plan, scenario, t0)
            if objectives.max_rate_violation_bps > 0:
                raise TransitionError("transition requires zero-violation plans on both sides")
    return TransitionSchedule(
        short_plan=short_plan, long_plan=long_plan, t_deploy_s=t0, t_long_active_s=t_active
    )
