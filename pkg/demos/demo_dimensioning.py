"""Fleet dimensioning walkthrough on the bundled self-healing scenario.

Builds the 400 m x 400 m network, fails the central small cell, and prints
the Pareto front over fleet size vs worst UAV lifetime, then cross-checks
the heuristic against the exhaustive oracle on a desk-sized instance.

Run:  python3 demos/demo_dimensioning.py
"""
import math

from d3s.casestudy import case_study_scenario
from d3s.dimensioning import (
    DimensionConfig,
    brute_force_front,
    dimension_long_term,
    dimension_short_term,
)
from d3s.scenario import FailureClass, inject_failure

SEED = 7

scenario = case_study_scenario(SEED)
scenario = inject_failure(scenario, "gbs5", FailureClass.SHORT_TERM, 1800.0)
print(f"case study, seed {SEED}: {len(scenario.devices)} UEs under the failed cell")
print(f"fleet: {', '.join(u.id for u in scenario.fleet)}")

front = dimension_short_term(scenario, scenario.fleet, DimensionConfig(restarts=6))
print("\nshort-term Pareto front (more drones buy lifetime):")
for point in front.front:
    powers = ", ".join(
        f"{point.plan.placed[j].uav.id}={point.plan.uav_comm_power(j)*1e3:.1f} mW"
        for j in range(point.plan.n_uavs)
    )
    print(
        f"  k={point.objectives.f_u}  min lifetime {point.objectives.f_t_s:7.0f} s  "
        f"({powers})"
    )
for point in front.flagged:
    print(
        f"  k={point.objectives.f_u}  flagged: rate shortfall "
        f"{point.objectives.max_rate_violation_bps/1e6:.1f} Mb/s"
    )

long_front = dimension_long_term(scenario, scenario.fleet)
hel = long_front.front[0]
print(
    f"\nlong-term plan: {hel.objectives.f_u} helikite at "
    f"{hel.plan.placed[0].hover[2]:.0f} m, total power "
    f"{sum(hel.plan.uav_comm_power(j) for j in range(hel.plan.n_uavs)):.2f} W "
    f"(tethered: lifetime unbounded)"
)

# oracle cross-check on a small instance: enumerate every placement/power
small = case_study_scenario(SEED, n_drones=2, include_helikite=False)
small = small.__class__(
    request=small.request,
    devices=small.devices[:4],
    mobiles=(),
    channels=small.channels,
    geography=small.geography,
    fleet=small.fleet,
    radio=small.radio,
    seed=small.seed,
)
candidates = tuple(
    (d.position[0], d.position[1], 50.0) for d in small.devices[:3]
)
heur = dimension_short_term(small, small.fleet, DimensionConfig(restarts=6))
oracle = brute_force_front(small, small.fleet, candidates, (0.25, 0.5, 1.0))
print(
    f"\noracle check (4 UEs, 2 drones): heuristic min k = "
    f"{heur.front[0].objectives.f_u}, exhaustive min k = "
    f"{oracle.front[0].objectives.f_u}"
)
