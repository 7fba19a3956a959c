"""Service phase: slotted backbone routing among UAVs and gateway GBSs.

Three engines share one topology model:
  - proactive shortest-hop tables (baseline),
  - back-pressure with a momentum term on the previous slot's allocation,
  - opportunistic anycast with custodian priority by distance-to-sink.

Back-pressure moves fluid bits; the opportunistic engine moves packets.
Queue dynamics follow Q(t+1) = Q(t) - served + arrivals, so a bit injected
in slot t is first servable in slot t+1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import radio
from .dimensioning import DeploymentPlan
from .scenario import Scenario


class RoutingError(ValueError):
    pass


@dataclass(frozen=True)
class Flow:
    id: str
    src: str
    dst: str


@dataclass
class MeshTopology:
    nodes: tuple[str, ...]
    links: dict[tuple[str, str], float]  # directed capacity, bits per slot
    gateways: frozenset[str] = frozenset()

    def __post_init__(self):
        for (u, v), cap in self.links.items():
            if cap < 0:
                raise RoutingError(f"negative capacity on link {u}->{v}")
            if u not in self.nodes or v not in self.nodes:
                raise RoutingError(f"link {u}->{v} references unknown node")

    def out_neighbors(self, u: str) -> list[str]:
        return sorted(v for (a, v) in self.links if a == u)

    def hop_distances(self, sink: str) -> dict[str, int]:
        """BFS over reversed links: hops from each node to the sink."""
        dist = {sink: 0}
        frontier = [sink]
        while frontier:
            nxt = []
            for v in frontier:
                for (a, b) in self.links:
                    if b == v and a not in dist:
                        dist[a] = dist[v] + 1
                        nxt.append(a)
            frontier = sorted(nxt)
        return dist


def build_proactive_routes(topology: MeshTopology) -> dict[tuple[str, str], str]:
    """Next hop per (node, sink): fewest hops, ties to the lowest neighbor id."""
    table: dict[tuple[str, str], str] = {}
    sinks = {v for (_, v) in topology.links} | set(topology.nodes)
    for sink in sorted(sinks):
        dist = topology.hop_distances(sink)
        for node in topology.nodes:
            if node == sink or node not in dist:
                continue
            best = None
            for nb in topology.out_neighbors(node):
                if dist.get(nb, math.inf) == dist[node] - 1:
                    if best is None or nb < best:
                        best = nb
            if best is not None:
                table[(node, sink)] = best
    return table


# ---------------------------------------------------------------------------
# traces and metrics
# ---------------------------------------------------------------------------


@dataclass
class RoutingTrace:
    slots: int = 0
    injected: list[tuple[int, str, float]] = field(default_factory=list)
    delivered: list[tuple[int, str, float]] = field(default_factory=list)
    queue_rows: list[tuple[int, str, str, float]] = field(default_factory=list)
    tx_rows: list[tuple[int, str, str, str, float]] = field(default_factory=list)


@dataclass(frozen=True)
class FlowMetrics:
    throughput_bits_per_slot: float
    mean_delay_slots: float  # nan when nothing was delivered
    delivery_ratio: float
    max_queue_bits: float


@dataclass(frozen=True)
class RouteMetrics:
    per_flow: dict[str, FlowMetrics]
    throughput_bits_per_slot: float
    mean_delay_slots: float
    delivery_ratio: float
    max_queue_bits: float
    empty_trace: bool = False


def route_metrics(trace: RoutingTrace) -> RouteMetrics:
    """Deterministic tallies of a finished trace (FIFO delay attribution)."""
    if trace.slots == 0:
        empty = FlowMetrics(0.0, math.nan, 0.0, 0.0)
        return RouteMetrics({}, 0.0, math.nan, 0.0, 0.0, empty_trace=True)
    flows = sorted({f for _, f, _ in trace.injected} | {f for _, f, _ in trace.delivered})
    per_flow = {}
    total_in = total_out = 0.0
    delay_bits = delay_weighted = 0.0
    max_queue = max((q for _, _, _, q in trace.queue_rows), default=0.0)
    for flow in flows:
        inj = [(s, b) for s, f, b in trace.injected if f == flow]
        dlv = [(s, b) for s, f, b in trace.delivered if f == flow]
        in_bits = sum(b for _, b in inj)
        out_bits = sum(b for _, b in dlv)
        # FIFO cohort matching: delivered bits consume injections in order
        fifo = list(inj)
        w_sum = w_bits = 0.0
        idx = 0
        for slot, bits in dlv:
            remaining = bits
            while remaining > 1e-12 and idx < len(fifo):
                s0, avail = fifo[idx]
                take = min(avail, remaining)
                w_sum += (slot - s0) * take
                w_bits += take
                remaining -= take
                if take >= avail - 1e-12:
                    idx += 1
                else:
                    fifo[idx] = (s0, avail - take)
        q_max = max((q for _, _, f, q in trace.queue_rows if f == flow), default=0.0)
        per_flow[flow] = FlowMetrics(
            throughput_bits_per_slot=out_bits / trace.slots,
            mean_delay_slots=(w_sum / w_bits) if w_bits > 0 else math.nan,
            delivery_ratio=(out_bits / in_bits) if in_bits > 0 else 0.0,
            max_queue_bits=q_max,
        )
        total_in += in_bits
        total_out += out_bits
        if w_bits > 0:
            delay_bits += w_bits
            delay_weighted += w_sum
    return RouteMetrics(
        per_flow=per_flow,
        throughput_bits_per_slot=total_out / trace.slots,
        mean_delay_slots=(delay_weighted / delay_bits) if delay_bits > 0 else math.nan,
        delivery_ratio=(total_out / total_in) if total_in > 0 else 0.0,
        max_queue_bits=max_queue,
    )


# ---------------------------------------------------------------------------
# back-pressure with momentum
# ---------------------------------------------------------------------------


class BackpressureState:
    """Max-weight scheduling on queue differentials plus a momentum term.

    Per link and flow the weight is (Q_src - Q_dst) + beta * (bits allocated
    on this link for this flow last slot); each link serves its max-weight
    flow up to capacity when the weight is positive.  beta = 0 is classic
    back-pressure.
    """

    def __init__(self, topology: MeshTopology, flows: list[Flow], beta: float = 0.0):
        if not 0 <= beta < 1:
            raise RoutingError("momentum weight must satisfy 0 <= beta < 1")
        self.topology = topology
        self.flows = sorted(flows, key=lambda f: f.id)
        self.beta = beta
        self.queues: dict[tuple[str, str], float] = {
            (n, f.id): 0.0 for n in topology.nodes for f in self.flows
        }
        self.last_alloc: dict[tuple[str, str, str], float] = {}
        self.trace = RoutingTrace()
        self._flow_by_id = {f.id: f for f in self.flows}

    def step(
        self,
        arrivals: dict[str, float],
        capacities: dict[tuple[str, str], float] | None = None,
    ) -> dict[tuple[str, str, str], float]:
        """One slot: allocate, move bits, then admit this slot's arrivals."""
        slot = self.trace.slots
        caps = capacities if capacities is not None else self.topology.links
        available = dict(self.queues)
        alloc: dict[tuple[str, str, str], float] = {}
        for (u, v) in sorted(caps):
            cap = caps[(u, v)]
            if cap <= 0:
                continue
            best_flow, best_weight = None, 0.0
            for f in self.flows:
                q_u = self.queues[(u, f.id)]
                q_v = 0.0 if v == f.dst else self.queues[(v, f.id)]
                weight = (q_u - q_v) + self.beta * self.last_alloc.get((u, v, f.id), 0.0)
                if weight > best_weight + 1e-12:
                    best_flow, best_weight = f, weight
            if best_flow is None:
                continue
            send = min(cap, available[(u, best_flow.id)])
            if send <= 1e-12:
                continue
            available[(u, best_flow.id)] -= send
            alloc[(u, v, best_flow.id)] = send
        # apply transfers
        for (u, v, fid), bits in alloc.items():
            self.queues[(u, fid)] -= bits
            flow = self._flow_by_id[fid]
            if v == flow.dst:
                self.trace.delivered.append((slot, fid, bits))
            else:
                self.queues[(v, fid)] += bits
            self.trace.tx_rows.append((slot, u, v, fid, bits))
        # admit arrivals (servable from the next slot)
        for fid, bits in arrivals.items():
            if bits <= 0:
                continue
            flow = self._flow_by_id[fid]
            self.queues[(flow.src, fid)] += bits
            self.trace.injected.append((slot, fid, bits))
        self.last_alloc = alloc
        for (n, fid), q in sorted(self.queues.items()):
            if q > 0:
                self.trace.queue_rows.append((slot, n, fid, q))
        self.trace.slots += 1
        return alloc

    def max_queue(self) -> float:
        return max(self.queues.values(), default=0.0)


# ---------------------------------------------------------------------------
# opportunistic anycast
# ---------------------------------------------------------------------------


@dataclass
class Packet:
    flow_id: str
    seq: int
    created_slot: int
    size_bits: float
    custodian: str
    delivered_slot: int | None = None

    def __post_init__(self):
        if self.size_bits <= 0:
            raise RoutingError("packet size must be > 0")


@dataclass(frozen=True)
class ForwardingDecision:
    candidates: tuple[str, ...]  # priority order
    successful: tuple[str, ...]
    custodian: str  # after the slot


class OpportunisticState:
    """Anycast forwarding toward one sink with duplicate suppression."""

    def __init__(self, topology: MeshTopology, sink: str):
        self.topology = topology
        self.sink = sink
        self.distance = topology.hop_distances(sink)

    def candidates_of(self, node: str) -> tuple[str, ...]:
        d = self.distance.get(node)
        if d is None:
            return ()
        cands = [
            nb
            for nb in self.topology.out_neighbors(node)
            if self.distance.get(nb, math.inf) < d
        ]
        cands.sort(key=lambda n: (self.distance[n], n))
        return tuple(cands)


def step_opportunistic(
    state: OpportunisticState,
    packet: Packet,
    link_success: dict[tuple[str, str], bool],
) -> ForwardingDecision:
    """One forwarding attempt: duplicate to all successful closer neighbors,
    keep the copy at the highest-priority receiver, drop the rest."""
    cands = state.candidates_of(packet.custodian)
    successful = tuple(
        n for n in cands if link_success.get((packet.custodian, n), False)
    )
    new_custodian = successful[0] if successful else packet.custodian
    return ForwardingDecision(candidates=cands, successful=successful, custodian=new_custodian)


def run_opportunistic(
    topology: MeshTopology,
    sink: str,
    source: str,
    n_packets: int,
    p_success: float,
    seed: int,
    ttl_slots: int,
    packet_bits: float = 1.0,
) -> tuple[RoutingTrace, list[Packet]]:
    """Seeded packet simulation: one packet injected per slot, TTL-bounded."""
    state = OpportunisticState(topology, sink)
    rng = np.random.default_rng(seed)
    trace = RoutingTrace()
    packets: list[Packet] = []
    live: list[Packet] = []
    slot = 0
    while len(packets) < n_packets or live:
        if len(packets) < n_packets:
            pkt = Packet("f0", len(packets), slot, packet_bits, source)
            packets.append(pkt)
            live.append(pkt)
            trace.injected.append((slot, "f0", packet_bits))
        still = []
        for pkt in live:
            if slot - pkt.created_slot >= ttl_slots:
                continue  # expired
            cands = state.candidates_of(pkt.custodian)
            draws = {
                (pkt.custodian, n): bool(rng.random() < p_success) for n in cands
            }
            decision = step_opportunistic(state, pkt, draws)
            if decision.custodian != pkt.custodian:
                trace.tx_rows.append(
                    (slot, pkt.custodian, decision.custodian, pkt.flow_id, pkt.size_bits)
                )
                pkt.custodian = decision.custodian
            if pkt.custodian == sink:
                pkt.delivered_slot = slot
                trace.delivered.append((slot, pkt.flow_id, pkt.size_bits))
            else:
                still.append(pkt)
        live = still
        slot += 1
    trace.slots = slot
    return trace, packets


# ---------------------------------------------------------------------------
# topology from a deployment plan
# ---------------------------------------------------------------------------


def topology_from_plan(
    plan: DeploymentPlan,
    scenario: Scenario,
    slot_length_s: float,
    backbone_range_m: float = 500.0,
    default_backbone_power_w: float = 0.1,
) -> MeshTopology:
    """Backbone mesh: tree links plus any UAV pair within range, plus gateways.

    Link capacity is the Shannon rate of the aggregate channel width at the
    allocated power (or a default when the plan carries none), times the slot
    length.  The backbone band is interference free by construction.
    """
    cfg = scenario.radio
    width = scenario.channels.total_width_hz
    names = [p.uav.id for p in plan.placed]
    pos = {p.uav.id: p.hover for p in plan.placed}
    links: dict[tuple[str, str], float] = {}

    def capacity(a, b, power):
        g = radio.channel_gain(pos[a], pos[b], cfg)
        snr = power * g / (cfg.noise_density_w_hz * width)
        return radio.achievable_rate(width, snr) * slot_length_s

    n = plan.n_uavs
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            a, b = names[i], names[j]
            linked = plan.assoc_uav[i, j] == 1
            close = math.dist(pos[a], pos[b]) <= backbone_range_m
            if linked or close:
                power = float(plan.power_uav[i, j]) or default_backbone_power_w
                links[(a, b)] = capacity(a, b, power)
    gateways = set()
    t0 = scenario.request.window_s[0]
    for g in scenario.geography.gbs:
        if not g.operational_at(t0):
            continue
        gpos = (g.position[0], g.position[1], 0.0)
        for name in names:
            if math.dist(gpos, pos[name]) <= backbone_range_m:
                gateways.add(g.id)
                ga = radio.channel_gain(gpos, pos[name], cfg)
                snr = default_backbone_power_w * ga / (cfg.noise_density_w_hz * width)
                cap = radio.achievable_rate(width, snr) * slot_length_s
                links[(g.id, name)] = cap
                links[(name, g.id)] = cap
    nodes = tuple(names) + tuple(sorted(gateways))
    return MeshTopology(nodes=nodes, links=links, gateways=frozenset(gateways))
