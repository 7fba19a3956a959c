"""Trajectory planning walkthrough: no-fly detours and charging cycles.

First plans a path around a restricted square and prints the detour cost,
then flies two small-battery drones against a single capacity-1 pad and
shows the disjoint charging windows the planner books.

Run:  python3 demos/demo_trajectory.py
"""
import math

from d3s import dimensioning as dim
from d3s.fleet import Uav, drone_spec
from d3s.radio import RadioConfig, SpectrumMode
from d3s.scenario import (
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
    devices_at,
)
from d3s.trajectory import (
    Action,
    TimeGrid,
    path_length,
    plan_path,
    plan_trajectories,
    validate_trajectory,
)

# --- part 1: geometry ---
zone = ((-50.0, -50.0), (50.0, -50.0), (50.0, 50.0), (-50.0, 50.0))
waypoints = plan_path((-200.0, 0.0, 0.0), (200.0, 0.0, 0.0), (zone,), 10.0, margin_m=10.0)
straight = 400.0
detour = path_length(waypoints)
print("no-fly square between start and goal:")
print(f"  straight distance {straight:.0f} m, detour {detour:.1f} m "
      f"(+{(detour/straight - 1)*100:.1f}%)")
print("  corners visited:", [(round(x), round(y)) for x, y, _ in waypoints])

# --- part 2: charging under a capacity-1 pad ---
devices = (
    StationaryDevice("d1", (480.0, 500.0), 1e6),
    StationaryDevice("d2", (520.0, 500.0), 1e6),
)
fleet = (
    Uav("u1", drone_spec(battery_energy_j=8e3, hover_power_w=10.0, travel_power_w=15.0,
                         comm_power_max_w=1.0), (470.0, 500.0, 0.0)),
    Uav("u2", drone_spec(battery_energy_j=6e3, hover_power_w=10.0, travel_power_w=15.0,
                         comm_power_max_w=1.0), (530.0, 500.0, 0.0)),
)
scenario = Scenario(
    request=ServiceRequest(RequestType.DISASTER_RECOVERY, (500.0, 500.0), 200.0, 2e6,
                           (0.0, 7200.0), Continuity.CONTINUOUS),
    devices=devices,
    mobiles=(),
    channels=ChannelSet((Channel(2.0e9, 1e6), Channel(2.0012e9, 1e6)), SpectrumMode.OFDMA),
    geography=Geography(
        area=(0.0, 0.0, 1000.0, 1000.0),
        charging_stations=(ChargingStation((500.0, 480.0), 1, 200.0),),
        restricted_zones=(),
        gbs=(GroundBaseStation("g1", (500.0, 400.0), 80.0),),
    ),
    fleet=fleet,
    radio=RadioConfig(),
    seed=1,
)
plan = dim._build_plan_at(
    scenario,
    devices_at(scenario, 0.0),
    [(fleet[0], (480.0, 500.0, 50.0)), (fleet[1], (520.0, 500.0, 50.0))],
    dim.DimensionConfig(),
)
grid = TimeGrid(10.0, 120)
trajectories, schedule = plan_trajectories(plan, scenario, grid)
print("\ntwo drones, one capacity-1 pad, 8 kJ / 6 kJ batteries:")
for tr in trajectories:
    charge_slots = [tr.start_slot + i for i, a in enumerate(tr.actions) if a is Action.CHARGING]
    spans = f"{charge_slots[0]}..{charge_slots[-1]}" if charge_slots else "none"
    print(f"  {tr.uav_id}: serve from slot {tr.first_serve_slot()}, charging slots {spans}")
occupied = sorted(slot for (_, slot) in schedule.occupancy)
print(f"  pad occupied {len(occupied)} slots, max simultaneous = "
      f"{max((len(v) for v in schedule.occupancy.values()), default=0)}")
violations = validate_trajectory(trajectories, schedule, scenario, grid)
print(f"  validator: {len(violations)} violations")
