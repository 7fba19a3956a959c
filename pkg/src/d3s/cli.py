"""Command-line front end: simulate, dimension, oracle-check, case studies.

    d3s --mode simulate --scenario net.yaml --out out/
    d3s --mode casestudy-short --seed 7 --out out/
    d3s --mode casestudy-long --seed 7 --power-sweep 0.25,0.5,1,2 --out out/
    d3s --mode oracle --scenario small.yaml --out out/

Exit codes: 0 success, 2 scenario or validation problem, 1 internal error.
``D3S_LOG`` (debug/info/warning/error) sets verbosity.  All outputs are
plain CSV plus YAML plan sheets; nothing is plotted here.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import dimensioning as dim
from . import scenario as sc
from .casestudy import case_study_scenario
from .dimensioning import DimensionConfig, FrontResult
from .fleet import Term
from .radio import SpectrumMode
from .scenario import FailureClass, Scenario, devices_at, parse_scenario
from .simulator import SimConfig, SimulationError, run
from .trajectory import SchedulePolicy, TrajectoryError

log = logging.getLogger("d3s")

MODES = ("simulate", "dimension-only", "oracle", "casestudy-short", "casestudy-long")

SCENARIO_ERRORS = (
    sc.ScenarioError,
    dim.OracleSizeError,
    dim.DimensioningError,
    TrajectoryError,
    FileNotFoundError,
)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="d3s", description=__doc__.splitlines()[0])
    p.add_argument("--scenario", type=Path, help="scenario YAML (not needed for case studies)")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--mode", choices=MODES, default="simulate")
    p.add_argument("--power-sweep", type=_floats, default=None, metavar="W1,W2,...")
    p.add_argument("--out", type=Path, default=Path("d3s_out"))
    p.add_argument("--beta", type=float, default=0.0, help="back-pressure momentum weight")
    p.add_argument("--spectrum", choices=("shared", "ofdma"), default=None)
    p.add_argument("--slot", type=float, default=None, help="slot length in seconds")
    p.add_argument("--horizon", type=float, default=None, help="simulated seconds")
    return p


def _floats(text: str) -> list[float]:
    vals = [float(x) for x in text.split(",") if x]
    if any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("sweep powers must be > 0")
    return vals


def main(argv=None) -> int:
    logging.basicConfig(
        level=getattr(logging, os.environ.get("D3S_LOG", "warning").upper(), logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except SCENARIO_ERRORS as exc:
        print(f'error: kind={type(exc).__name__} msg="{exc}"', file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f'error: kind=SimulationError msg="{exc}"', file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports and exits
        print(f'error: kind=internal msg="{type(exc).__name__}: {exc}"', file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    spectrum = SpectrumMode(args.spectrum) if args.spectrum else None

    if args.mode == "casestudy-short":
        scenario = case_study_scenario(args.seed, spectrum=spectrum or SpectrumMode.OFDMA)
        scenario = sc.inject_failure(scenario, "gbs5", FailureClass.SHORT_TERM, 1800.0)
        slot = args.slot or 10.0
    elif args.mode == "casestudy-long":
        scenario = case_study_scenario(args.seed, spectrum=spectrum or SpectrumMode.OFDMA)
        scenario = sc.inject_failure(scenario, "gbs5", FailureClass.LONG_TERM, 3 * 86400.0)
        slot = args.slot or 30.0
    else:
        if args.scenario is None:
            raise sc.ScenarioError(f"--scenario is required for mode {args.mode}")
        text = args.scenario.read_text(encoding="utf-8")
        scenario = parse_scenario(text)
        if spectrum is not None and spectrum is not scenario.channels.mode:
            scenario = _with_spectrum(scenario, spectrum)
        slot = args.slot or 10.0

    dim_config = DimensionConfig(restarts=6)
    fronts = _dimension_both(scenario, dim_config)
    for name, front in fronts.items():
        _write_front_csv(out / f"front_{name}.csv", name, front)
        _write_plan_sheets(out, name, front)
    log.info("fronts written: %s", ", ".join(sorted(fronts)))

    if args.power_sweep:
        _write_power_sweep(out / "power_sweep.csv", scenario, args, dim_config)

    if args.mode == "oracle":
        return _run_oracle(out, scenario, fronts, dim_config)
    if args.mode == "dimension-only":
        _write_summary(out, scenario, args, fronts, report=None)
        return 0

    horizon = args.horizon
    if horizon is None and args.mode == "casestudy-long":
        horizon = 4500.0
    config = SimConfig(
        slot_length_s=slot,
        horizon_s=horizon,
        beta=args.beta,
        dimension=dim_config,
        policy=SchedulePolicy(),
    )
    report = run(scenario, config)
    files = report.write_csv_bundle(out)
    log.info("simulation bundle: %s", ", ".join(files))
    _write_summary(out, scenario, args, fronts, report)
    return 0


def _with_spectrum(scenario: Scenario, mode: SpectrumMode) -> Scenario:
    from dataclasses import replace

    return replace(scenario, channels=replace(scenario.channels, mode=mode))


def _dimension_both(scenario: Scenario, config: DimensionConfig) -> dict[str, FrontResult]:
    fronts = {}
    if any(u.spec.term is Term.SHORT for u in scenario.fleet):
        fronts["short"] = dim.dimension_short_term(scenario, scenario.fleet, config)
    if any(u.spec.term is Term.LONG for u in scenario.fleet):
        fronts["long"] = dim.dimension_long_term(scenario, scenario.fleet, config)
    return fronts


def _plan_id(name: str, point) -> str:
    return f"{name}-k{point.objectives.f_u}"


def _write_front_csv(path: Path, name: str, front: FrontResult) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("k,f_T_seconds,violation,plan_id\n")
        for point in list(front.front) + list(front.flagged):
            ft = point.objectives.f_t_s
            fh.write(
                f"{point.objectives.f_u},{'inf' if math.isinf(ft) else repr(ft)},"
                f"{repr(point.objectives.max_rate_violation_bps)},{_plan_id(name, point)}\n"
            )


def _write_plan_sheets(out: Path, name: str, front: FrontResult) -> None:
    plans_dir = out / "plans"
    plans_dir.mkdir(exist_ok=True)
    for point in list(front.front) + list(front.flagged):
        plan = point.plan
        doc = {
            "plan_id": _plan_id(name, point),
            "mode": plan.mode.value,
            "objectives": {
                "uav_count": point.objectives.f_u,
                "min_lifetime_s": None
                if math.isinf(point.objectives.f_t_s)
                else point.objectives.f_t_s,
                "max_rate_violation_bps": point.objectives.max_rate_violation_bps,
            },
            "gateway_gbs": plan.gateway_gbs_id,
            "uavs": [
                {
                    "id": placed.uav.id,
                    "hover": list(placed.hover),
                    "comm_power_w": plan.uav_comm_power(j),
                }
                for j, placed in enumerate(plan.placed)
            ],
            "associations": [
                {
                    "device": dev,
                    "uav": plan.placed[int(np.flatnonzero(plan.assoc_device[i])[0])].uav.id,
                    "power_w": float(plan.power_device[i].sum()),
                    "channels": list(plan.channel_assignment.get(dev, ())),
                }
                for i, dev in enumerate(plan.device_ids)
                if plan.assoc_device[i].any()
            ],
            "backbone": [
                {
                    "a": plan.placed[m].uav.id,
                    "b": plan.placed[n].uav.id,
                    "power_w": float(plan.power_uav[m, n]),
                }
                for m in range(plan.n_uavs)
                for n in range(plan.n_uavs)
                if plan.assoc_uav[m, n] and m < n
            ],
        }
        path = plans_dir / f"{_plan_id(name, point)}.yaml"
        path.write_text(yaml.safe_dump(doc, sort_keys=False), encoding="utf-8")


def _write_power_sweep(path: Path, scenario: Scenario, args, dim_config) -> None:
    """Re-dimension per max-power value; report per-UE max-min rates."""
    rows = []
    for power in args.power_sweep:
        if args.mode in ("casestudy-short", "casestudy-long"):
            swept = case_study_scenario(
                args.seed,
                n_drones=3,
                drone_power_w=power,
                include_helikite=False,
                spectrum=scenario.channels.mode,
            )
            swept = sc.inject_failure(swept, "gbs5", FailureClass.SHORT_TERM, 1800.0)
        else:
            swept = _fleet_power(scenario, power)
        front = dim.dimension_short_term(swept, swept.fleet, dim_config)
        snapshot = devices_at(swept, swept.request.window_s[0])
        best_rates: dict[str, float] | None = None
        for point in list(front.front) + list(front.flagged):
            plan = point.plan
            plan.power_device = dim.max_min_rate_powers(
                plan, snapshot, swept.channels, swept.radio
            )
            rates = dim.achieved_rates(plan, snapshot, swept.channels, swept.radio)
            if best_rates is None or min(rates.values()) > min(best_rates.values()):
                best_rates = rates
        if best_rates is None:
            continue
        for ue in sorted(best_rates):
            rows.append((power, ue, best_rates[ue]))
        rows.append((power, "min", min(best_rates.values())))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("max_power_w,ue_id,rate_bps\n")
        for power, ue, rate in rows:
            fh.write(f"{repr(power)},{ue},{repr(rate)}\n")


def _fleet_power(scenario: Scenario, power: float) -> Scenario:
    from dataclasses import replace

    fleet = tuple(
        replace(u, spec=replace(u.spec, comm_power_max_w=power))
        if u.spec.term is Term.SHORT
        else u
        for u in scenario.fleet
    )
    return replace(scenario, fleet=fleet)


def _oracle_inputs(scenario: Scenario):
    """Deterministic guardrail-sized candidates and power levels."""
    short = [u for u in scenario.fleet if u.spec.term is Term.SHORT]
    if not short:
        raise dim.DimensioningError("oracle mode needs a short-term fleet")
    alt = min(u.spec.altitude_min_m for u in short)
    alt = max(alt, 50.0)
    snapshot = devices_at(scenario, scenario.request.window_s[0])
    candidates = [(p.position[0], p.position[1], alt) for p in snapshot]
    cx = sum(p.position[0] for p in snapshot) / max(1, len(snapshot))
    cy = sum(p.position[1] for p in snapshot) / max(1, len(snapshot))
    candidates.append((cx, cy, alt))
    budget = min(u.spec.comm_power_max_w for u in short)
    levels = tuple(budget * f for f in (0.125, 0.25, 0.5, 1.0))
    return tuple(candidates[: dim.ORACLE_MAX_CANDIDATES]), levels


def _run_oracle(out: Path, scenario: Scenario, fronts, dim_config) -> int:
    candidates, levels = _oracle_inputs(scenario)
    oracle = dim.brute_force_front(scenario, scenario.fleet, candidates, levels, dim_config)
    _write_front_csv(out / "front_oracle.csv", "oracle", oracle)
    heur = fronts.get("short")
    agree = (
        heur is not None
        and bool(heur.front)
        and bool(oracle.front)
        and heur.front[0].objectives.f_u == oracle.front[0].objectives.f_u
    )
    (out / "oracle_check.txt").write_text(
        "heuristic_min_uavs={}\noracle_min_uavs={}\nagree={}\n".format(
            heur.front[0].objectives.f_u if heur and heur.front else "none",
            oracle.front[0].objectives.f_u if oracle.front else "none",
            agree,
        ),
        encoding="utf-8",
    )
    print(f"oracle agreement on minimum fleet size: {agree}")
    return 0 if agree else 1


def _write_summary(out: Path, scenario: Scenario, args, fronts, report) -> None:
    lines = [
        "d3s run summary",
        f"mode: {args.mode}",
        f"seed: {scenario.seed}",
        f"spectrum: {scenario.channels.mode.value}",
        f"devices: {len(scenario.devices)} stationary, {len(scenario.mobiles)} mobile",
        f"fleet: {', '.join(u.id for u in scenario.fleet)}",
    ]
    for name, front in sorted(fronts.items()):
        pts = ", ".join(
            f"k={p.objectives.f_u} fT={'inf' if math.isinf(p.objectives.f_t_s) else f'{p.objectives.f_t_s:.0f}s'}"
            for p in front.front
        )
        lines.append(f"front[{name}]: {pts or 'empty'} ({len(front.flagged)} flagged)")
    if report is not None:
        lines.append(f"slots: {report.rates_bps.shape[0]} x {report.slot_length_s}s")
        lines.append(f"serving_from_slot: {report.serving_from_slot}")
        demand_idx = [report.ue_ids.index(d) for d in report.demand_ids]
        if demand_idx and report.serving_from_slot is not None:
            served = report.rates_bps[report.serving_from_slot :, demand_idx]
            lines.append(f"min_demand_rate_bps: {served.min():.0f}")
        lines.append(f"violation_slots: {int((report.violations > 0).sum())}")
        lines.append(f"energy_closes: {report.energy_closes()}")
        if report.routing_metrics is not None:
            m = report.routing_metrics
            lines.append(
                "routing: throughput={:.0f} bits/slot delay={} delivery={:.3f}".format(
                    m.throughput_bits_per_slot,
                    "nan" if math.isnan(m.mean_delay_slots) else f"{m.mean_delay_slots:.2f}",
                    m.delivery_ratio,
                )
            )
        for slot, event, detail in report.timeline:
            lines.append(f"timeline: slot {slot}: {event} ({detail})")
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    sys.exit(main())
