"""Emissions-signal charging scheduler and fixed-schedule evaluation.

Marginal emission rates cannot be minimized endogenously in one LP (the
rates are themselves outputs of the model), so scheduling works by fixed-point
iteration: freeze the current rate estimates, re-solve the flexible
operational model with a high per-ton penalty on rate-weighted charging, then
re-estimate the rates around the new schedule. Convergence is declared on the
consequential-emissions check (the operational emissions delta from scaling
the current schedule up by the configured EV perturbation), not on schedule
stability; the schedule delta norm is reported for diagnostics only.

Final schedules are evaluated under full capacity expansion at base and
EV-scaled levels, which is where structural (capacity) effects enter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ScheduleMismatch
from .flex import ChargingSchedule, ScheduleSource
from .grid import GridModel
from .metrics import (SRME1, SRME2, ConsequentialReport, EmissionRateSeries, long_run_mer,
                      srme_dual, srme_uniform)
from .planner import (DispatchResult, FixedCapacities, ScaleEV, atomic_write_text,
                      build_operational_lp, decode_solution, solve_model)
from . import lp


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    consequential_tco2: float
    rel_change: float
    schedule_delta_norm: float
    rate_weighted_proxy: float       # sum(R_k * served) after the re-solve
    rate_weighted_proxy_prev: float  # same rates applied to the previous schedule


@dataclass(frozen=True)
class IterationTrace:
    records: tuple[IterationRecord, ...]
    converged: bool
    iterations_used: int


def pin_schedule(grid: GridModel, per_load: dict[str, np.ndarray]) -> GridModel:
    """Replace each flexible load with a rigid profile equal to its served schedule.

    The pinned loads drop their explicit rate cap (a fixed profile cannot
    exceed itself), so EV-scaling perturbations of a pinned grid stay valid.
    """
    loads = []
    for load in grid.flexible_loads:
        if load.id not in per_load:
            raise ScheduleMismatch(f"schedule missing profile for load {load.id!r}")
        loads.append(replace(load, baseline_profile=per_load[load.id].copy(),
                             max_advance_hours=0, max_delay_hours=0,
                             max_charge_rate_mw=None, penetration_scale=1.0))
    return replace(grid, flexible_loads=tuple(loads))


def schedule_from_result(grid: GridModel, result: DispatchResult,
                         source: ScheduleSource) -> ChargingSchedule:
    zone_ids = tuple(grid.zone_ids())
    served = np.zeros((len(zone_ids), grid.horizon))
    per_load = {}
    for load in grid.flexible_loads:
        profile = result.flex_served[load.id].copy()
        per_load[load.id] = profile
        served[zone_ids.index(load.zone_id)] += profile
    return ChargingSchedule(served=served, per_load=per_load, source=source,
                            zone_ids=zone_ids)


def consequential_check(grid: GridModel, fixed_capacities: FixedCapacities,
                        per_load: dict[str, np.ndarray], fraction: float) -> float:
    """Operational emissions delta from scaling the pinned schedule by (1 + fraction)."""
    base = solve_model(build_operational_lp(pin_schedule(grid, per_load), fixed_capacities))
    scaled = {fid: profile * (1.0 + fraction) for fid, profile in per_load.items()}
    pert = solve_model(build_operational_lp(pin_schedule(grid, scaled), fixed_capacities))
    return pert.total_emissions - base.total_emissions


def _rates(grid: GridModel, fixed_capacities: FixedCapacities, method: str,
           per_load: dict[str, np.ndarray], zones) -> EmissionRateSeries:
    pinned = pin_schedule(grid, per_load)
    if method == SRME1:
        return srme_uniform(pinned, fixed_capacities, zones=zones)
    return srme_dual(pinned, fixed_capacities)


def schedule_min_srme(grid: GridModel, fixed_capacities: FixedCapacities,
                      method: str = SRME1, penalty: float | None = None,
                      rate_zones=None) -> tuple[ChargingSchedule, IterationTrace]:
    """Iteratively schedule flexible charging against frozen marginal-emission rates.

    Each pass re-solves the flexible operational model with the objective
    cost + penalty * sum(R_k[z,t] * served[z,t]); rates R_k come from the
    schedule of the previous pass. Stops when the consequential-emissions
    check moves by less than the configured threshold, or after
    max_iterations (returned with converged=False; not fatal).
    """
    method = method.upper()
    if method not in (SRME1, SRME2):
        raise ValueError(f"method must be {SRME1} or {SRME2}, got {method!r}")
    cfg = grid.config
    if penalty is None:
        penalty = cfg.emissions_penalty
    if rate_zones is None:
        flex_zones = {load.zone_id for load in grid.flexible_loads}
        rate_zones = [z for z in grid.zone_ids() if z in flex_zones] or "all"

    model = build_operational_lp(grid, fixed_capacities)
    base_cost = model.problem.c
    result = solve_model(model)  # B0: cost-minimizing flexible schedule
    per_load = {fid: arr.copy() for fid, arr in result.flex_served.items()}
    cons_prev = consequential_check(grid, fixed_capacities, per_load, cfg.perturbation_fraction)

    zone_ids = grid.zone_ids()
    records: list[IterationRecord] = []
    converged = False
    for iteration in range(1, cfg.max_iterations + 1):
        rates = _rates(grid, fixed_capacities, method, per_load, rate_zones)
        c2 = base_cost.copy()
        for load in grid.flexible_loads:
            zi = zone_ids.index(load.zone_id)
            c2[model.index.served[load.id]] += penalty * rates.rates[zi]
        sol = lp.solve(replace(model.problem, c=c2))
        if sol.status is not lp.SolveStatus.OPTIMAL:
            raise RuntimeError(f"penalty re-solve unexpectedly {sol.status.value}")
        new_result = decode_solution(model, sol)
        new_per_load = {fid: arr.copy() for fid, arr in new_result.flex_served.items()}

        def proxy(profiles: dict[str, np.ndarray]) -> float:
            total = 0.0
            for load in grid.flexible_loads:
                zi = zone_ids.index(load.zone_id)
                total += float(rates.rates[zi] @ profiles[load.id])
            return total

        cons = consequential_check(grid, fixed_capacities, new_per_load,
                                   cfg.perturbation_fraction)
        rel = abs(cons - cons_prev) / max(abs(cons_prev), 1e-9)
        delta_norm = math.sqrt(sum(
            float(np.sum((new_per_load[fid] - per_load[fid]) ** 2)) for fid in per_load))
        records.append(IterationRecord(
            iteration=iteration,
            consequential_tco2=cons,
            rel_change=rel,
            schedule_delta_norm=delta_norm,
            rate_weighted_proxy=proxy(new_per_load),
            rate_weighted_proxy_prev=proxy(per_load),
        ))
        per_load, cons_prev = new_per_load, cons
        if rel < cfg.convergence_threshold:
            converged = True
            break

    zone_served = np.zeros((len(zone_ids), grid.horizon))
    for load in grid.flexible_loads:
        zone_served[zone_ids.index(load.zone_id)] += per_load[load.id]
    source = ScheduleSource.MIN_SRME1 if method == SRME1 else ScheduleSource.MIN_SRME2
    schedule = ChargingSchedule(served=zone_served, per_load=per_load, source=source,
                                zone_ids=tuple(zone_ids))
    trace = IterationTrace(records=tuple(records), converged=converged,
                           iterations_used=len(records))
    return schedule, trace


def evaluate_fixed_schedule(grid: GridModel, schedule: ChargingSchedule) -> ConsequentialReport:
    """Full capacity expansion at base and EV-scaled levels with charging pinned.

    Raises ScheduleMismatch unless each load's scheduled energy matches its
    baseline request to 1e-6 MWh.
    """
    for load in grid.flexible_loads:
        if load.id not in schedule.per_load:
            raise ScheduleMismatch(f"schedule missing profile for load {load.id!r}")
        scheduled = float(np.sum(schedule.per_load[load.id]))
        requested = float(np.sum(load.effective_baseline()))
        if abs(scheduled - requested) > 1e-6:
            raise ScheduleMismatch(
                f"load {load.id!r}: scheduled {scheduled:g} MWh vs requested {requested:g} MWh")
    pinned = pin_schedule(grid, schedule.per_load)
    return long_run_mer(pinned, ScaleEV(grid.config.perturbation_fraction))


def write_schedule_csv(schedule: ChargingSchedule, path) -> None:
    rows = ["hour,zone,source,served_mw"]
    horizon = schedule.served.shape[1]
    for zi, zid in enumerate(schedule.zone_ids):
        for t in range(horizon):
            rows.append(f"{t},{zid},{schedule.source.value},{schedule.served[zi, t]:.12g}")
    atomic_write_text(Path(path), "\n".join(rows) + "\n")


def write_trace_csv(trace: IterationTrace, path) -> None:
    rows = ["iteration,consequential_tco2,rel_change,schedule_delta_norm"]
    for rec in trace.records:
        rows.append(f"{rec.iteration},{rec.consequential_tco2:.12g},"
                    f"{rec.rel_change:.12g},{rec.schedule_delta_norm:.12g}")
    atomic_write_text(Path(path), "\n".join(rows) + "\n")
